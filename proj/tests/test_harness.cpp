#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "gfe/harness.hpp"

using namespace gfe;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

RunOutput run_text(const std::string& text) {
    return run_experiment(Config::parse(text, "<test>"));
}

const double* estimate_of(const ResultRecord& r, const std::string& name) {
    for (const auto& [k, v] : r.estimates)
        if (k == name) return &v;
    return nullptr;
}

const double* constant_of(const ResultRecord& r, const std::string& name) {
    for (const auto& [k, v] : r.constants)
        if (k == name) return &v;
    return nullptr;
}

const bool* check_of(const ResultRecord& r, const std::string& name) {
    for (const auto& [k, v] : r.checks)
        if (k == name) return &v;
    return nullptr;
}

const Interval* interval_of(const ResultRecord& r, const std::string& name) {
    for (const auto& [k, v] : r.intervals)
        if (k == name) return &v;
    return nullptr;
}

const std::string* note_of(const ResultRecord& r, const std::string& name) {
    for (const auto& [k, v] : r.notes)
        if (k == name) return &v;
    return nullptr;
}

} // namespace

TEST_CASE("every experiment kind belongs to a CLI family") {
    for (const char* kind : experiment_kinds) {
        const char* fam = family_of(kind);
        REQUIRE(fam != nullptr);
        const std::string f = fam;
        CHECK((f == "sim" || f == "peaks" || f == "fe" || f == "martingale" || f == "tail" ||
               f == "surface"));
    }
    CHECK(std::string(family_of("sup-stats")) == "sim");
    CHECK(std::string(family_of("corollary25")) == "peaks");
    CHECK(std::string(family_of("peak-event-fe")) == "fe");
    CHECK(std::string(family_of("doob-qv")) == "martingale");
    CHECK(std::string(family_of("borell")) == "tail");
    CHECK(std::string(family_of("nazarov")) == "surface");
    CHECK(family_of("bogus") == nullptr);
}

TEST_CASE("field section builds every field kind") {
    auto field_of = [](const std::string& body) {
        return field_from_config(Config::parse("[field]\n" + body, "<test>"));
    };

    const GaussianField ind = field_of("kind = \"independent\"\nn = 4\n");
    CHECK(ind.size() == 4);
    CHECK(ind.covariance(0, 1) == Approx(0.0).margin(1e-12));
    CHECK(ind.variance_of(2) == Approx(1.0).margin(1e-12));

    const GaussianField blk = field_of("kind = \"block\"\nblocks = 2\nn = 4\n");
    CHECK(blk.kind() == FieldKind::block);
    CHECK(blk.size() == 4);
    CHECK(blk.block_count() == 2);

    const GaussianField sh = field_of("kind = \"shifted\"\nn = 4\nalpha = 0.7\n");
    CHECK(sh.kind() == FieldKind::shifted);
    CHECK(sh.size() == 4);
    CHECK(sh.alpha() == Approx(0.7));

    const GaussianField poly = field_of("kind = \"polymer\"\nn = 2\n");
    CHECK(poly.kind() == FieldKind::directed_polymer);
    CHECK(poly.size() > 0);

    const GaussianField spin = field_of("kind = \"spin\"\nn = 3\n");
    CHECK(spin.kind() == FieldKind::spin_glass);
    CHECK(spin.size() > 0);

    const GaussianField two = field_of("kind = \"two-orthonormal\"\n");
    CHECK(two.size() == 2);
    CHECK(two.covariance(0, 1) == Approx(0.0).margin(1e-12));

    const GaussianField eq = field_of("kind = \"equicorrelated\"\nn = 3\nrho = 0.4\n");
    CHECK(eq.size() == 3);
    CHECK(eq.covariance(0, 1) == Approx(0.4).margin(1e-9));
    CHECK(eq.variance_of(0) == Approx(1.0).margin(1e-9));

    const std::string cov_path =
        (std::filesystem::temp_directory_path() / "gfe_test_cov.csv").string();
    write_text_file(cov_path, "1.0,0.5\n0.5,1.0\n");
    const GaussianField cov =
        field_of("kind = \"covariance\"\ncovariance_csv = \"" + cov_path + "\"\n");
    CHECK(cov.size() == 2);
    CHECK(cov.covariance(0, 1) == Approx(0.5).margin(1e-9));
    CHECK(cov.variance_of(1) == Approx(1.0).margin(1e-9));
    std::filesystem::remove(cov_path);

    const GaussianField norm = field_of("kind = \"polymer\"\nn = 2\nnormalized = true\n");
    CHECK(norm.max_variance() == Approx(1.0).margin(1e-12));

    const GaussianField ex = field_of("kind = \"block\"\nblocks = 2\nn = 4\nexplicit = true\n");
    CHECK(ex.kind() == FieldKind::explicit_factor);
    CHECK(ex.size() == 4);
    CHECK(ex.covariance(0, 1) == Approx(blk.covariance(0, 1)).margin(1e-12));
}

TEST_CASE("field section errors name the offending key") {
    auto field_of = [](const std::string& body) {
        return field_from_config(Config::parse("[field]\n" + body, "<test>"));
    };
    CHECK_THROWS_MATCHES(field_of("kind = \"frobnicate\"\n"), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("[field].kind") &&
                                                         ContainsSubstring("frobnicate")));
    CHECK_THROWS_MATCHES(
        field_of("kind = \"independent\"\n"), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("[field].n") &&
                                        ContainsSubstring("missing required key")));
    CHECK_THROWS_MATCHES(
        field_of("kind = \"covariance\"\ncovariance_csv = \"/nonexistent/cov.csv\"\n"),
        ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("config error: [field]:") &&
                                        ContainsSubstring("cannot open")));
}

TEST_CASE("run_experiment validates the experiment section") {
    CHECK_THROWS_MATCHES(
        run_text("[experiment]\nkind = \"bogus\"\nseed = 1\n"), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("unknown experiment") &&
                                        ContainsSubstring("sup-stats") &&
                                        ContainsSubstring("nazarov")));
    CHECK_THROWS_MATCHES(run_text("[experiment]\nkind = \"sup-stats\"\n"), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("[experiment].seed") &&
                             ContainsSubstring("missing required key")));
    CHECK_THROWS_MATCHES(
        run_text("[experiment]\nkind = \"sup-stats\"\nseed = 1\ntrials = 0\n"), ConfigError,
        Catch::Matchers::MessageMatches(ContainsSubstring("[experiment].trials") &&
                                        ContainsSubstring("must be positive")));
    CHECK_THROWS_MATCHES(run_text("[experiment]\n"
                                  "kind = \"fe-curve\"\n"
                                  "seed = 1\n"
                                  "trials = 8\n"
                                  "[field]\n"
                                  "kind = \"independent\"\n"
                                  "n = 2\n"),
                         ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("[params].betas") &&
                             ContainsSubstring("missing required key")));
    CHECK_THROWS_MATCHES(run_text("[experiment]\n"
                                  "kind = \"doob-qv\"\n"
                                  "seed = 1\n"
                                  "trials = 2\n"
                                  "[field]\n"
                                  "kind = \"independent\"\n"
                                  "n = 2\n"
                                  "[params]\n"
                                  "estimator = \"fancy\"\n"),
                         ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("split or naive")));
    CHECK_THROWS_MATCHES(run_text("[experiment]\n"
                                  "kind = \"doob-qv\"\n"
                                  "seed = 1\n"
                                  "trials = 2\n"
                                  "[field]\n"
                                  "kind = \"independent\"\n"
                                  "n = 2\n"
                                  "[params]\n"
                                  "eta = 0.5\n"),
                         ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("config error: doob-qv:")));
}

TEST_CASE("sup-stats dispatch reports supremum statistics") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"sup-stats\"\n"
                                   "seed = 101\n"
                                   "trials = 4000\n"
                                   "workers = 2\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 2\n"
                                   "[params]\n"
                                   "resamples = 100\n");
    const ResultRecord& rec = out.record;
    CHECK(rec.experiment == "sup-stats");
    CHECK(rec.seed == 101);
    CHECK(rec.trials == 4000);
    CHECK(rec.workers == 2);
    CHECK(rec.wall_seconds > 0.0);
    CHECK(out.artifacts.empty());

    const double* m = estimate_of(rec, "m_hat");
    REQUIRE(m != nullptr);
    CHECK(*m == Approx(1.0 / std::sqrt(std::acos(-1.0))).margin(0.05));
    REQUIRE(interval_of(rec, "m_hat") != nullptr);
    REQUIRE(interval_of(rec, "var_hat") != nullptr);
    CHECK(estimate_of(rec, "sigma_hat") != nullptr);
    const double* mv = constant_of(rec, "max_variance");
    REQUIRE(mv != nullptr);
    CHECK(*mv == Approx(1.0).margin(1e-12));

    REQUIRE(note_of(rec, "field") != nullptr);
    bool echoed_kind = false;
    for (const auto& [k, v] : rec.config_echo)
        if (k == "experiment.kind") echoed_kind = true;
    CHECK(echoed_kind);
}

TEST_CASE("borell dispatch tags one point per threshold") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"borell\"\n"
                                   "seed = 103\n"
                                   "trials = 1500\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 8\n"
                                   "[params]\n"
                                   "zs = [1.0]\n"
                                   "resamples = 60\n");
    const ResultRecord& rec = out.record;
    CHECK(estimate_of(rec, "m_hat") != nullptr);
    const double* freq = estimate_of(rec, "freq_z1.0");
    REQUIRE(freq != nullptr);
    CHECK(*freq >= 0.0);
    const double* env = constant_of(rec, "envelope_z1.0");
    REQUIRE(env != nullptr);
    CHECK(*env == Approx(borell_tail_bound(1.0, 1.0)));
    const bool* pass = check_of(rec, "within_envelope_z1.0");
    REQUIRE(pass != nullptr);
    CHECK(*pass);
}

TEST_CASE("peak-event dispatch routes the query parameters through") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"peak-event\"\n"
                                   "seed = 107\n"
                                   "trials = 600\n"
                                   "[field]\n"
                                   "kind = \"block\"\n"
                                   "blocks = 4\n"
                                   "n = 8\n"
                                   "[params]\n"
                                   "delta = 1.0\n"
                                   "eps = 0.5\n"
                                   "ell = 1\n"
                                   "pilot_trials = 400\n");
    const ResultRecord& rec = out.record;
    const double* freq = estimate_of(rec, "freq");
    REQUIRE(freq != nullptr);
    // with delta = 1 the threshold sits at zero, so the event is "some block
    // draw is positive": 1 - 2^-4
    CHECK(*freq == Approx(15.0 / 16.0).margin(0.05));
    REQUIRE(interval_of(rec, "freq") != nullptr);
    const double* m_ref = estimate_of(rec, "m_ref");
    REQUIRE(m_ref != nullptr);
    CHECK(*m_ref > 0.8);
    CHECK(estimate_of(rec, "sigma_hat") != nullptr);
    const double* min_sz = constant_of(rec, "min_success_size");
    REQUIRE(min_sz != nullptr);
    CHECK(*min_sz >= 1.0);
    CHECK(constant_of(rec, "fitted_c1") != nullptr);
    CHECK(constant_of(rec, "fitted_c2") != nullptr);
    CHECK(constant_of(rec, "size_bound") != nullptr);
}

TEST_CASE("lemma22 dispatch records the inapplicability reason") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"lemma22\"\n"
                                   "seed = 109\n"
                                   "trials = 50\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 4\n"
                                   "[params]\n"
                                   "eps = 1.0\n"
                                   "r = -10.0\n"
                                   "s = 10.0\n");
    const ResultRecord& rec = out.record;
    const double* out_frac = estimate_of(rec, "out_fraction");
    REQUIRE(out_frac != nullptr);
    CHECK(*out_frac == 0.0);
    CHECK(estimate_of(rec, "set_size") != nullptr);
    CHECK(constant_of(rec, "size_bound") != nullptr);
    const bool* applicable = check_of(rec, "applicable");
    REQUIRE(applicable != nullptr);
    CHECK_FALSE(*applicable);
    const std::string* reason = note_of(rec, "reason");
    REQUIRE(reason != nullptr);
    CHECK_THAT(*reason, ContainsSubstring("eps/8"));
}

TEST_CASE("corollary25 dispatch exposes the nearness level") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"corollary25\"\n"
                                   "seed = 113\n"
                                   "trials = 600\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 2\n"
                                   "[params]\n"
                                   "delta = 0.5\n"
                                   "pilot_trials = 400\n");
    const ResultRecord& rec = out.record;
    CHECK(estimate_of(rec, "m_hat") != nullptr);
    CHECK(estimate_of(rec, "var_hat") != nullptr);
    const double* freq = estimate_of(rec, "freq");
    REQUIRE(freq != nullptr);
    CHECK(*freq >= 0.0);
    CHECK(*freq <= 1.0);
    const double* alpha = constant_of(rec, "alpha");
    REQUIRE(alpha != nullptr);
    CHECK(*alpha == Approx(0.875));
    CHECK(constant_of(rec, "fitted_c") != nullptr);
    CHECK(constant_of(rec, "defect") != nullptr);
}

TEST_CASE("restricted-sup dispatch emits one point per (t, lambda) pair") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"restricted-sup\"\n"
                                   "seed = 127\n"
                                   "trials = 500\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 8\n"
                                   "[params]\n"
                                   "ts = [0.5]\n"
                                   "lambda_factors = [1.0]\n"
                                   "pilot_trials = 400\n");
    const ResultRecord& rec = out.record;
    CHECK(rec.estimates.size() == 3); // m_hat, var_hat, one frequency
    CHECK(rec.constants.size() == 1);
    REQUIRE(rec.checks.size() == 1);
    CHECK_THAT(rec.checks.front().first, ContainsSubstring("within_bound_t0.5_l"));
}

TEST_CASE("fe-curve dispatch tags per-temperature estimates") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"fe-curve\"\n"
                                   "seed = 131\n"
                                   "trials = 96\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 8\n"
                                   "[params]\n"
                                   "betas = [0.5, 2.0]\n"
                                   "resamples = 50\n");
    const ResultRecord& rec = out.record;
    const double* f_lo = estimate_of(rec, "f_hat_b0.5");
    const double* f_hi = estimate_of(rec, "f_hat_b2.0");
    REQUIRE(f_lo != nullptr);
    REQUIRE(f_hi != nullptr);
    CHECK(*f_lo > *f_hi);
    REQUIRE(interval_of(rec, "f_hat_b0.5") != nullptr);
    CHECK(estimate_of(rec, "var_hat_b0.5") != nullptr);
    CHECK(estimate_of(rec, "var_hat_b2.0") != nullptr);
    CHECK(constant_of(rec, "sigma_tilde_b0.5") != nullptr);
    CHECK(constant_of(rec, "sigma_tilde_b2.0") != nullptr);
}

TEST_CASE("fe-contribution dispatch verifies the exact side") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"fe-contribution\"\n"
                                   "seed = 137\n"
                                   "trials = 300\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 4\n"
                                   "[params]\n"
                                   "delta = 0.5\n"
                                   "beta = 6.0\n"
                                   "pilot_trials = 400\n");
    const ResultRecord& rec = out.record;
    CHECK(estimate_of(rec, "m_hat") != nullptr);
    const double* ff = estimate_of(rec, "fail_freq");
    REQUIRE(ff != nullptr);
    CHECK(*ff >= 0.0);
    const double* left = constant_of(rec, "left_failures");
    REQUIRE(left != nullptr);
    CHECK(*left == 0.0);
    CHECK(constant_of(rec, "right_failures") != nullptr);
    CHECK(constant_of(rec, "empty_sets") != nullptr);
    CHECK(constant_of(rec, "fitted_c") != nullptr);
    const bool* exact = check_of(rec, "lower_sandwich_exact");
    REQUIRE(exact != nullptr);
    CHECK(*exact);
}

TEST_CASE("peak-event-fe dispatch picks a temperature when none is given") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"peak-event-fe\"\n"
                                   "seed = 139\n"
                                   "trials = 300\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 4\n"
                                   "[params]\n"
                                   "delta = 0.5\n"
                                   "eps = 0.2\n"
                                   "ell = 1\n"
                                   "pilot_trials = 2000\n");
    const ResultRecord& rec = out.record;
    const double* iters = constant_of(rec, "beta_iterations");
    REQUIRE(iters != nullptr);
    CHECK(*iters >= 1.0);
    CHECK(*iters <= 10.0);
    const double* beta = estimate_of(rec, "beta");
    REQUIRE(beta != nullptr);
    CHECK(*beta > 0.0);
    const double* st = estimate_of(rec, "sigma_tilde");
    REQUIRE(st != nullptr);
    CHECK(*st > 0.0);
    CHECK(estimate_of(rec, "freq") != nullptr);
    CHECK(estimate_of(rec, "m_ref") != nullptr);
    CHECK(constant_of(rec, "min_success_size") != nullptr);
    CHECK(constant_of(rec, "fitted_c2") != nullptr);
    CHECK(constant_of(rec, "fitted_c3") != nullptr);
    CHECK(constant_of(rec, "size_bound") != nullptr);
}

TEST_CASE("doob-qv dispatch reports the path diagnostics") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"doob-qv\"\n"
                                   "seed = 149\n"
                                   "trials = 3\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 2\n"
                                   "[params]\n"
                                   "inner_samples = 160\n"
                                   "nodes = 6\n"
                                   "estimator = \"split\"\n");
    const ResultRecord& rec = out.record;
    const double* qv = estimate_of(rec, "qv_plus_eta_mean");
    REQUIRE(qv != nullptr);
    CHECK(*qv > 0.0);
    CHECK(estimate_of(rec, "qv_plus_eta_stderr") != nullptr);
    const double* v0 = estimate_of(rec, "v0_mean");
    REQUIRE(v0 != nullptr);
    CHECK(*v0 > 0.3);
    CHECK(*v0 < 1.2);
    const double* s0 = estimate_of(rec, "s0_mean");
    REQUIRE(s0 != nullptr);
    CHECK(*s0 > 0.3);
    CHECK(*s0 < 0.9);
    const double* nodes = constant_of(rec, "nodes");
    REQUIRE(nodes != nullptr);
    CHECK(*nodes == 6.0);
    const double* inner = constant_of(rec, "inner_samples");
    REQUIRE(inner != nullptr);
    CHECK(*inner == 160.0);
    const double* eta = constant_of(rec, "eta");
    REQUIRE(eta != nullptr);
    CHECK(*eta == Approx(1e-3));
    const double* band_z = constant_of(rec, "v_band_z");
    REQUIRE(band_z != nullptr);
    CHECK(*band_z == Approx(normal_quantile(1.0 - 1e-3 / 6.0)));
    const bool* v_ok = check_of(rec, "v_mean_within_band");
    REQUIRE(v_ok != nullptr);
    CHECK(*v_ok);
}

TEST_CASE("doob-events dispatch echoes the supplied reference level") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"doob-events\"\n"
                                   "seed = 151\n"
                                   "trials = 3\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 4\n"
                                   "[params]\n"
                                   "inner_samples = 160\n"
                                   "nodes = 6\n"
                                   "eps = 0.3\n"
                                   "delta = 1.0\n"
                                   "alpha = 0.5\n"
                                   "m_ref = 1.03\n");
    const ResultRecord& rec = out.record;
    const double* e1 = estimate_of(rec, "freq_e1");
    const double* e2 = estimate_of(rec, "freq_e2");
    const double* e2n = estimate_of(rec, "freq_e2_not_e1");
    REQUIRE(e1 != nullptr);
    REQUIRE(e2 != nullptr);
    REQUIRE(e2n != nullptr);
    CHECK(*e1 >= 0.0);
    CHECK(*e1 <= 1.0);
    CHECK(*e2n <= *e2 + 1e-12);
    const double* m = estimate_of(rec, "m_hat");
    REQUIRE(m != nullptr);
    CHECK(*m == Approx(1.03));
    const double* ref = constant_of(rec, "reference");
    REQUIRE(ref != nullptr);
    CHECK(*ref == Approx(std::pow(4.0, -0.25 / 32.0)));
    const double* used = constant_of(rec, "nodes_used");
    REQUIRE(used != nullptr);
    CHECK(*used == 6.0);
}

TEST_CASE("tail dispatch in closed-form mode echoes the reference slopes") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"tail\"\n"
                                   "seed = 157\n"
                                   "trials = 10\n"
                                   "[field]\n"
                                   "kind = \"shifted\"\n"
                                   "n = 8\n"
                                   "alpha = 1.0\n"
                                   "[params]\n"
                                   "betas = [0.5]\n"
                                   "exact = true\n");
    const ResultRecord& rec = out.record;
    const double* m = estimate_of(rec, "m");
    REQUIRE(m != nullptr);
    CHECK(*m == Approx((1.0 / std::sqrt(2.0)) * exact_mean_max_iid_normals(8)).epsilon(1e-9));
    const double* prob = estimate_of(rec, "prob_b0.5");
    REQUIRE(prob != nullptr);
    CHECK(*prob > 0.0);
    CHECK(*prob < 1.0);
    const double* expnt = estimate_of(rec, "exponent_b0.5");
    REQUIRE(expnt != nullptr);
    CHECK(*expnt > 0.0);
    const double* borell_ref = constant_of(rec, "ref_borell_b0.5");
    REQUIRE(borell_ref != nullptr);
    CHECK(*borell_ref == Approx(0.125));
    const double* alpha_ref = constant_of(rec, "ref_alpha_b0.5");
    REQUIRE(alpha_ref != nullptr);
    CHECK(*alpha_ref == Approx(0.25));
    CHECK(check_of(rec, "improves_borell_b0.5") != nullptr);
}

TEST_CASE("surface-profile dispatch ships the histogram as an artifact") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"surface-profile\"\n"
                                   "seed = 163\n"
                                   "trials = 2500\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 2\n"
                                   "[params]\n"
                                   "bins = 16\n"
                                   "resamples = 40\n"
                                   "pilot_trials = 500\n");
    const ResultRecord& rec = out.record;
    const double* m = estimate_of(rec, "m_hat");
    REQUIRE(m != nullptr);
    CHECK(estimate_of(rec, "l_hat") != nullptr);
    REQUIRE(interval_of(rec, "l_hat") != nullptr);
    CHECK(estimate_of(rec, "t_at_max") != nullptr);
    CHECK(estimate_of(rec, "neg_mass") != nullptr);
    CHECK(estimate_of(rec, "over_mass") != nullptr);
    const double* bins = constant_of(rec, "bins");
    REQUIRE(bins != nullptr);
    CHECK(*bins == 16.0);
    const double* t_max = constant_of(rec, "t_max");
    REQUIRE(t_max != nullptr);
    CHECK(*t_max == Approx(2.0 * *m + 4.0).margin(1e-12));
    const bool* mass = check_of(rec, "mass_conserved");
    REQUIRE(mass != nullptr);
    CHECK(*mass);

    REQUIRE(out.artifacts.size() == 1);
    CHECK(out.artifacts.front().first == "bins.csv");
    const auto rows = parse_csv(out.artifacts.front().second);
    REQUIRE(rows.size() == 17); // header plus one row per bin
    CHECK(rows.front() ==
          std::vector<std::string>{"t_lo", "t_hi", "count", "density", "density_lo",
                                   "density_hi"});
    for (const auto& row : rows) CHECK(row.size() == 6);
}

TEST_CASE("var-exp dispatch reports the product and its reference") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"var-exp\"\n"
                                   "seed = 167\n"
                                   "trials = 2500\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 4\n"
                                   "[params]\n"
                                   "bins = 16\n"
                                   "resamples = 40\n");
    const ResultRecord& rec = out.record;
    CHECK(estimate_of(rec, "m_hat") != nullptr);
    const double* var = estimate_of(rec, "var_hat");
    REQUIRE(var != nullptr);
    CHECK(estimate_of(rec, "product") != nullptr);
    CHECK(estimate_of(rec, "l_hat") != nullptr);
    CHECK(constant_of(rec, "coarea_rhs") != nullptr);
    const double* c_fit = constant_of(rec, "c_fit");
    REQUIRE(c_fit != nullptr);
    CHECK(*c_fit == Approx(*var * std::log(4.0)).margin(1e-12));
    CHECK(check_of(rec, "coarea_holds") != nullptr);
}

TEST_CASE("nazarov dispatch reports the density floor constants") {
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"nazarov\"\n"
                                   "seed = 173\n"
                                   "trials = 2500\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 4\n"
                                   "[params]\n"
                                   "bins = 12\n"
                                   "pilot_trials = 500\n");
    const ResultRecord& rec = out.record;
    CHECK(estimate_of(rec, "m_hat") != nullptr);
    CHECK(estimate_of(rec, "c_inv_linear") != nullptr);
    CHECK(estimate_of(rec, "c_inv_linear_lo") != nullptr);
    CHECK(estimate_of(rec, "c_inv_plateau") != nullptr);
    CHECK(estimate_of(rec, "c_inv_plateau_lo") != nullptr);
    CHECK(constant_of(rec, "plateau_defined") != nullptr);
    CHECK(constant_of(rec, "plateau_bins") != nullptr);
    CHECK(constant_of(rec, "checked_pairs") != nullptr);
    CHECK(constant_of(rec, "ratio_violations") != nullptr);
    CHECK(check_of(rec, "ratio_monotone") != nullptr);
    REQUIRE(out.artifacts.size() == 1);
    CHECK(out.artifacts.front().first == "bins.csv");
}

TEST_CASE("rerunning a config reproduces the serialized record byte for byte") {
    const std::string text = "[experiment]\n"
                             "kind = \"sup-stats\"\n"
                             "seed = 211\n"
                             "trials = 800\n"
                             "[field]\n"
                             "kind = \"equicorrelated\"\n"
                             "n = 3\n"
                             "rho = 0.3\n"
                             "[params]\n"
                             "resamples = 50\n";
    const RunOutput a = run_text(text);
    const RunOutput b = run_text(text);
    CHECK(to_json_text(a.record) == to_json_text(b.record));
    CHECK(to_csv_text(a.record) == to_csv_text(b.record));
    const nlohmann::json j = nlohmann::json::parse(to_json_text(a.record));
    CHECK(j["experiment"] == "sup-stats");
    CHECK(j["config"].contains("experiment.kind"));
    CHECK(j["config"].contains("field.rho"));
}

TEST_CASE("write_outputs lays out the record and artifacts under one stem") {
    namespace fs = std::filesystem;
    const RunOutput out = run_text("[experiment]\n"
                                   "kind = \"surface-profile\"\n"
                                   "seed = 223\n"
                                   "trials = 1200\n"
                                   "[field]\n"
                                   "kind = \"independent\"\n"
                                   "n = 2\n"
                                   "[params]\n"
                                   "bins = 8\n"
                                   "resamples = 20\n"
                                   "pilot_trials = 400\n");
    const fs::path dir = fs::temp_directory_path() / "gfe_harness_out";
    fs::remove_all(dir);
    const std::vector<std::string> paths = write_outputs(out, dir.string());
    REQUIRE(paths.size() == 3);
    CHECK(fs::path(paths[0]).filename() == "surface-profile-223.json");
    CHECK(fs::path(paths[1]).filename() == "surface-profile-223.csv");
    CHECK(fs::path(paths[2]).filename() == "surface-profile-223-bins.csv");
    for (const std::string& p : paths) CHECK(fs::exists(p));

    std::ifstream json_in(paths[0]);
    const nlohmann::json j = nlohmann::json::parse(json_in);
    CHECK(j["experiment"] == "surface-profile");
    CHECK(j["seed"] == 223);

    std::ifstream csv_in(paths[1]);
    std::string header;
    std::getline(csv_in, header);
    CHECK(header == csv_header);

    std::ifstream bins_in(paths[2]);
    std::string bins_header;
    std::getline(bins_in, bins_header);
    CHECK(bins_header == "t_lo,t_hi,count,density,density_lo,density_hi");
    fs::remove_all(dir);
}
