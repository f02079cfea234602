#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "extremes.hpp"
#include "field.hpp"
#include "free_energy_peaks.hpp"
#include "geometry.hpp"
#include "martingale.hpp"
#include "peaks.hpp"
#include "record.hpp"
#include "zoo.hpp"

namespace gfe {

inline constexpr const char* experiment_kinds[] = {
    "sup-stats",   "peak-event", "lemma22",         "corollary25", "restricted-sup",
    "fe-curve",    "fe-contribution", "peak-event-fe", "doob-qv",   "doob-events",
    "tail",        "borell",     "surface-profile", "var-exp",     "nazarov",
};

// CLI subcommand owning each experiment kind.
inline const char* family_of(const std::string& kind) {
    if (kind == "sup-stats") return "sim";
    if (kind == "peak-event" || kind == "lemma22" || kind == "corollary25" ||
        kind == "restricted-sup")
        return "peaks";
    if (kind == "fe-curve" || kind == "fe-contribution" || kind == "peak-event-fe") return "fe";
    if (kind == "doob-qv" || kind == "doob-events") return "martingale";
    if (kind == "tail" || kind == "borell") return "tail";
    if (kind == "surface-profile" || kind == "var-exp" || kind == "nazarov") return "surface";
    return nullptr;
}

// Builds the field named by the [field] section.  Library precondition
// failures are rethrown as config errors naming the section.
inline GaussianField field_from_config(const Config& cfg) {
    const std::string kind = cfg.get_string("field", "kind");
    try {
        GaussianField f = [&] {
            if (kind == "independent")
                return GaussianField::independent(cfg.get_u64("field", "n"));
            if (kind == "block")
                return GaussianField::block(cfg.get_u64("field", "blocks"),
                                            cfg.get_u64("field", "n"));
            if (kind == "shifted")
                return GaussianField::shifted(cfg.get_u64("field", "n"),
                                              cfg.get_double("field", "alpha"));
            if (kind == "polymer")
                return GaussianField::directed_polymer(
                    static_cast<int>(cfg.get_u64("field", "n")));
            if (kind == "spin")
                return GaussianField::spin_glass(static_cast<int>(cfg.get_u64("field", "n")));
            if (kind == "two-orthonormal") return two_orthonormal();
            if (kind == "equicorrelated")
                return equicorrelated(cfg.get_u64("field", "n"),
                                      cfg.get_double("field", "rho"));
            if (kind == "covariance")
                return GaussianField::from_covariance(
                    load_matrix_csv(cfg.get_string("field", "covariance_csv")));
            throw ConfigError("config error: [field].kind: unknown field kind \"" + kind +
                              "\" (independent, block, shifted, polymer, spin, two-orthonormal, "
                              "equicorrelated, covariance)");
        }();
        if (cfg.get_bool_or("field", "normalized", false)) f = f.normalized();
        if (cfg.get_bool_or("field", "explicit", false)) f = explicit_factor_of(f);
        return f;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("config error: [field]: " + std::string(e.what()));
    }
}

struct RunOutput {
    ResultRecord record;
    // extra plot-ready files, written next to the record as
    // <experiment>-<seed>-<name>
    std::vector<std::pair<std::string, std::string>> artifacts;
};

namespace detail {

inline std::string tag(const std::string& base, const std::string& param, double value) {
    return base + "_" + param + render_number(value);
}

inline BootstrapOptions boot_from(const Config& cfg) {
    BootstrapOptions boot;
    boot.resamples = cfg.get_u64_or("params", "resamples", boot.resamples);
    boot.confidence = cfg.get_double_or("params", "confidence", boot.confidence);
    return boot;
}

inline std::string profile_csv(const SurfaceProfile& prof) {
    std::string out = "t_lo,t_hi,count,density,density_lo,density_hi\n";
    for (std::size_t i = 0; i < prof.bins(); ++i)
        out += render_number(prof.edges[i]) + "," + render_number(prof.edges[i + 1]) + "," +
               std::to_string(prof.counts[i]) + "," + render_number(prof.density[i]) + "," +
               render_number(prof.density_ci[i].lo) + "," + render_number(prof.density_ci[i].hi) +
               "\n";
    return out;
}

inline PeakQuery peak_query_from(const Config& cfg) {
    PeakQuery q;
    q.delta = cfg.get_double_or("params", "delta", q.delta);
    q.eps = cfg.get_double_or("params", "eps", q.eps);
    q.zeta = cfg.get_double_or("params", "zeta", q.zeta);
    q.normalized = cfg.get_bool_or("params", "normalized_eps", q.normalized);
    if (cfg.has("params", "m_ref")) q.m_ref = cfg.get_double("params", "m_ref");
    return q;
}

} // namespace detail

// Dispatches the configured experiment, returning the result record plus any
// plot-ready artifacts.  Known keys: [experiment] kind/seed/trials/workers,
// [field] as in field_from_config, [params] per experiment kind.
inline RunOutput run_experiment(const Config& cfg) {
    const std::string kind = cfg.get_string("experiment", "kind");
    if (!family_of(kind)) {
        std::string known;
        for (const char* k : experiment_kinds) {
            if (!known.empty()) known += ", ";
            known += k;
        }
        throw ConfigError("config error: [experiment].kind: unknown experiment \"" + kind +
                          "\" (" + known + ")");
    }
    const std::uint64_t seed = cfg.get_u64("experiment", "seed");
    const std::uint64_t trials = cfg.get_u64_or("experiment", "trials", 10'000);
    const unsigned workers =
        static_cast<unsigned>(std::max<std::uint64_t>(1, cfg.get_u64_or("experiment", "workers", 1)));
    if (trials == 0) throw ConfigError("config error: [experiment].trials: must be positive");

    RunOutput out;
    ResultRecord& rec = out.record;
    rec.experiment = kind;
    rec.seed = seed;
    rec.trials = trials;
    rec.workers = workers;
    for (const std::string& sec : cfg.section_names())
        for (const auto& [k, v] : cfg.entries(sec)) rec.config_echo.emplace_back(sec + "." + k, v);

    const auto started = std::chrono::steady_clock::now();
    try {
        const GaussianField field = field_from_config(cfg);
        rec.put_note("field", field.describe());

        if (kind == "sup-stats") {
            const SupremumStats st =
                estimate_sup_stats(field, trials, seed, workers, detail::boot_from(cfg));
            rec.put("m_hat", st.m_hat, st.m_ci);
            rec.put("var_hat", st.var_hat, st.var_ci);
            rec.put("sigma_hat", st.sigma_hat());
            rec.put_constant("max_variance", st.max_variance);
        } else if (kind == "borell") {
            const std::vector<double> zs = cfg.has("params", "zs")
                                               ? cfg.get_double_list("params", "zs")
                                               : std::vector<double>{0.5, 1.0, 1.5, 2.0};
            const BorellReport rep =
                check_borell(field, zs, trials, seed, workers, detail::boot_from(cfg));
            rec.put("m_hat", rep.stats.m_hat, rep.stats.m_ci);
            rec.put("var_hat", rep.stats.var_hat, rep.stats.var_ci);
            for (const ExceedancePoint& p : rep.points) {
                rec.put(detail::tag("freq", "z", p.z), p.freq);
                rec.put_constant(detail::tag("envelope", "z", p.z), p.envelope);
                rec.put_check(detail::tag("within_envelope", "z", p.z), p.pass);
            }
        } else if (kind == "peak-event") {
            const PeakQuery q = detail::peak_query_from(cfg);
            const std::uint64_t ell = cfg.get_u64_or("params", "ell", 2);
            const PeakEventStats st =
                estimate_peak_event(field, q, ell, trials, seed, workers,
                                    cfg.get_u64_or("params", "pilot_trials", 10'000));
            rec.put("freq", st.freq, st.ci);
            rec.put("m_ref", st.m_ref);
            rec.put("sigma_hat", st.sigma_hat);
            rec.put_constant("min_success_size", static_cast<double>(st.min_success_size));
            rec.put_constant("fitted_c1", st.fitted_c1);
            rec.put_constant("fitted_c2", st.fitted_c2);
            rec.put_constant("size_bound", st.bound);
        } else if (kind == "lemma22") {
            std::vector<FieldSample> batch;
            batch.reserve(trials);
            for (std::uint64_t t = 0; t < trials; ++t)
                batch.push_back(sample(field, seed, streams::trial(t)));
            const NearOrthogonalSetReport rep = check_lemma22_bound(
                field, batch, cfg.get_double("params", "eps"), cfg.get_double("params", "r"),
                cfg.get_double("params", "s"));
            rec.put("out_fraction", rep.out_fraction);
            rec.put("set_size", static_cast<double>(rep.set_size));
            rec.put_constant("size_bound", rep.bound);
            rec.put_check("applicable", rep.applicable);
            rec.put_check("size_at_least_bound", rep.pass);
            if (!rep.reason.empty()) rec.put_note("reason", rep.reason);
        } else if (kind == "corollary25") {
            const ArgmaxStabilityReport rep =
                check_corollary25(field, cfg.get_double("params", "delta"), trials, seed, workers,
                                  cfg.get_u64_or("params", "pilot_trials", 10'000));
            rec.put("m_hat", rep.m_hat);
            rec.put("var_hat", rep.var_hat);
            rec.put("freq", rep.freq, rep.ci);
            rec.put_constant("alpha", rep.alpha);
            rec.put_constant("fitted_c", rep.fitted_c);
            rec.put_constant("defect", rep.defect);
        } else if (kind == "restricted-sup") {
            const std::vector<double> ts = cfg.has("params", "ts")
                                               ? cfg.get_double_list("params", "ts")
                                               : std::vector<double>{0.3, 0.5, 0.7};
            const std::vector<double> lf = cfg.has("params", "lambda_factors")
                                               ? cfg.get_double_list("params", "lambda_factors")
                                               : std::vector<double>{0.5, 1.0, 2.0};
            const Lemma23Report rep = check_restricted_sup_tail(
                field, ts, lf, trials, seed, workers,
                cfg.get_u64_or("params", "pilot_trials", 10'000));
            rec.put("m_hat", rep.m_hat);
            rec.put("var_hat", rep.var_hat);
            for (const Lemma23Point& p : rep.points) {
                const std::string suffix =
                    "_t" + detail::render_number(p.t) + "_l" + detail::render_number(p.lambda);
                rec.put("freq" + suffix, p.freq);
                rec.put_constant("bound" + suffix, p.bound);
                rec.put_check("within_bound" + suffix, p.pass);
            }
        } else if (kind == "fe-curve") {
            const std::vector<double> betas = cfg.get_double_list("params", "betas");
            const FreeEnergyCurve curve =
                estimate_fe_curve(field, betas, trials, seed, workers, detail::boot_from(cfg));
            for (std::size_t k = 0; k < curve.betas.size(); ++k) {
                const FreeEnergyStats& st = curve.stats[k];
                rec.put(detail::tag("f_hat", "b", st.beta), st.f_hat, st.f_ci);
                rec.put(detail::tag("var_hat", "b", st.beta), st.var_hat, st.var_ci);
                rec.put_constant(detail::tag("sigma_tilde", "b", st.beta), curve.sigma_tilde[k]);
            }
        } else if (kind == "fe-contribution") {
            const FeContributionReport rep = check_fe_contribution(
                field, cfg.get_double("params", "delta"), cfg.get_double("params", "beta"),
                trials, seed, workers, cfg.get_double_or("params", "hyp_c", 1.0),
                cfg.get_u64_or("params", "pilot_trials", 10'000));
            rec.put("m_hat", rep.m_hat);
            rec.put("fail_freq", rep.fail_freq, rep.ci);
            rec.put_constant("left_failures", static_cast<double>(rep.left_failures));
            rec.put_constant("right_failures", static_cast<double>(rep.right_failures));
            rec.put_constant("empty_sets", static_cast<double>(rep.empty_sets));
            rec.put_constant("fitted_c", rep.fitted_c);
            rec.put_check("lower_sandwich_exact", rep.left_failures == 0);
        } else if (kind == "peak-event-fe") {
            PeakQuery q = detail::peak_query_from(cfg);
            const std::uint64_t ell = cfg.get_u64_or("params", "ell", 2);
            const double hyp_mult = cfg.get_double_or("params", "hyp_mult", 1.0);
            double beta;
            if (cfg.has("params", "beta")) {
                beta = cfg.get_double("params", "beta");
            } else {
                const BetaChoice bc = choose_beta_fe(field, q, seed, workers, hyp_mult);
                beta = bc.beta;
                rec.put_constant("beta_iterations", bc.iterations);
            }
            std::optional<double> sigma_tilde;
            if (cfg.has("params", "sigma_tilde"))
                sigma_tilde = cfg.get_double("params", "sigma_tilde");
            const FePeakEventStats st = estimate_peak_event_fe(
                field, q, ell, beta, trials, seed, workers, hyp_mult, sigma_tilde,
                cfg.get_u64_or("params", "pilot_trials", 10'000));
            rec.put("freq", st.base.freq, st.base.ci);
            rec.put("m_ref", st.base.m_ref);
            rec.put("beta", st.beta);
            rec.put("sigma_tilde", st.sigma_tilde);
            rec.put_constant("min_success_size", static_cast<double>(st.base.min_success_size));
            rec.put_constant("fitted_c2", st.fitted_c2);
            rec.put_constant("fitted_c3", st.fitted_c3);
            rec.put_constant("size_bound", st.fe_bound);
        } else if (kind == "doob-qv") {
            const GaussianField ex = explicit_factor_of(field);
            const std::uint64_t paths = cfg.get_u64_or("params", "paths", trials);
            const std::uint64_t inner = cfg.get_u64_or("params", "inner_samples", 20'000);
            const double eta = cfg.get_double_or("params", "eta", 1e-3);
            const std::vector<double> grid =
                doob_grid(cfg.get_u64_or("params", "nodes", 64), eta);
            const std::string est_name = cfg.get_string_or("params", "estimator", "split");
            if (est_name != "split" && est_name != "naive")
                throw ConfigError("config error: [params].estimator: expected split or naive");
            const VEstimator est =
                est_name == "split" ? VEstimator::split : VEstimator::naive;
            struct QvRow {
                double qv = 0.0;
                double s0 = 0.0;
                std::vector<double> v_hat, v_se;
            };
            const std::vector<QvRow> rows =
                map_trials<QvRow>(paths, workers, [&](std::uint64_t p) {
                    const MartingalePath path =
                        simulate_doob_path(ex, grid, inner, seed, p, eta, est);
                    QvRow r;
                    r.qv = quadratic_variation(path).estimate();
                    r.s0 = path.nodes.front().s_hat;
                    r.v_hat.reserve(path.nodes.size());
                    r.v_se.reserve(path.nodes.size());
                    for (const DoobNode& n : path.nodes) {
                        r.v_hat.push_back(n.v_hat);
                        r.v_se.push_back(n.v_stderr);
                    }
                    return r;
                });
            Welford qw, v0w, s0w;
            for (const QvRow& r : rows) {
                qw.add(r.qv);
                v0w.add(r.v_hat.front());
                s0w.add(r.s0);
            }
            // the remaining variance never exceeds the field's ceiling of 1,
            // so test the path-averaged estimate per node, splitting a 1e-3
            // rejection level across the nodes
            const double band_z =
                normal_quantile(1.0 - 1e-3 / static_cast<double>(grid.size()));
            bool v_ok = true;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                double mean = 0.0;
                double var_of_mean = 0.0;
                for (const QvRow& r : rows) {
                    mean += r.v_hat[k];
                    var_of_mean += r.v_se[k] * r.v_se[k];
                }
                mean /= static_cast<double>(paths);
                const double se = std::sqrt(var_of_mean) / static_cast<double>(paths);
                if (mean > 1.0 + band_z * se) v_ok = false;
            }
            rec.put("qv_plus_eta_mean", qw.mean());
            rec.put("qv_plus_eta_stderr",
                    paths > 1 ? std::sqrt(qw.variance() / static_cast<double>(paths)) : 0.0);
            rec.put("v0_mean", v0w.mean());
            rec.put("s0_mean", s0w.mean());
            rec.put_constant("nodes", static_cast<double>(grid.size()));
            rec.put_constant("inner_samples", static_cast<double>(inner));
            rec.put_constant("eta", eta);
            rec.put_constant("v_band_z", band_z);
            rec.put_check("v_mean_within_band", v_ok);
        } else if (kind == "doob-events") {
            const GaussianField ex = explicit_factor_of(field);
            const std::uint64_t paths = cfg.get_u64_or("params", "paths", trials);
            const std::uint64_t inner = cfg.get_u64_or("params", "inner_samples", 20'000);
            const double eta = cfg.get_double_or("params", "eta", 1e-3);
            const double eps = cfg.get_double("params", "eps");
            const double delta = cfg.get_double("params", "delta");
            const double alpha = cfg.get_double("params", "alpha");
            std::vector<double> grid = doob_grid(cfg.get_u64_or("params", "nodes", 64), eta);
            if (cfg.get_bool_or("params", "restrict_grid", true)) {
                std::erase_if(grid, [&](double t) { return t > delta; });
                if (grid.size() < 2)
                    throw ConfigError(
                        "config error: [params].delta: too small for the grid; no interior nodes");
            }
            double m_hat;
            if (cfg.has("params", "m_ref")) {
                m_hat = cfg.get_double("params", "m_ref");
            } else {
                const SupremumStats pilot = estimate_sup_stats(
                    ex, cfg.get_u64_or("params", "pilot_trials", 10'000), seed, workers, {},
                    streams::pilot);
                m_hat = pilot.m_hat;
            }
            std::vector<MartingalePath> batch;
            batch.reserve(paths);
            for (std::uint64_t p = 0; p < paths; ++p)
                batch.push_back(simulate_doob_path(ex, grid, inner, seed, p, eta));
            const EventReport rep = check_events(batch, ex, eps, delta, alpha, m_hat);
            rec.put("freq_e1", rep.freq_e1);
            rec.put("freq_e2", rep.freq_e2);
            rec.put("freq_e2_not_e1", rep.freq_e2_not_e1);
            rec.put("m_hat", m_hat);
            rec.put_constant("reference", rep.reference);
            rec.put_constant("fitted_c", rep.fitted_c);
            rec.put_constant("nodes_used", static_cast<double>(rep.nodes_used));
        } else if (kind == "tail") {
            const std::vector<double> betas = cfg.get_double_list("params", "betas");
            const bool exact = cfg.get_bool_or("params", "exact", false);
            std::optional<double> m_override;
            if (cfg.has("params", "m_ref")) m_override = cfg.get_double("params", "m_ref");
            const TailReport rep =
                tail_experiment(field, betas, trials, seed, exact, workers, m_override,
                                cfg.get_u64_or("params", "pilot_trials", 100'000));
            rec.put("m", rep.m);
            for (const TailPoint& p : rep.points) {
                rec.put(detail::tag("prob", "b", p.beta), p.prob);
                rec.put(detail::tag("exponent", "b", p.beta), p.exponent);
                rec.put_constant(detail::tag("ref_borell", "b", p.beta), p.ref_borell);
                if (!std::isnan(rep.alpha))
                    rec.put_constant(detail::tag("ref_alpha", "b", p.beta), p.ref_alpha);
                rec.put_check(detail::tag("improves_borell", "b", p.beta), p.improves_borell);
            }
        } else if (kind == "surface-profile") {
            const SurfaceProfile prof = estimate_surface_profile(
                field, trials, cfg.get_u64_or("params", "bins", 0), seed, workers,
                cfg.get_u64_or("params", "pilot_trials", 10'000));
            const LEstimate l =
                estimate_L(prof, seed, cfg.get_u64_or("params", "resamples", 200));
            rec.put("m_hat", prof.m_hat);
            rec.put("l_hat", l.l_hat, l.ci);
            rec.put("t_at_max", l.t_at_max);
            rec.put("neg_mass", prof.neg_mass);
            rec.put("over_mass", prof.over_mass);
            rec.put_constant("bins", static_cast<double>(prof.bins()));
            rec.put_constant("bin_width", prof.bin_width);
            rec.put_constant("t_max", prof.t_max);
            rec.put_check("mass_conserved", std::abs(prof.total_mass() - 1.0) <= 1e-9);
            out.artifacts.emplace_back("bins.csv", detail::profile_csv(prof));
        } else if (kind == "var-exp") {
            const VarExpReport rep =
                check_var_exp(field, trials, seed, workers,
                              cfg.get_u64_or("params", "bins", 0), detail::boot_from(cfg));
            rec.put("m_hat", rep.m_hat);
            rec.put("var_hat", rep.var_hat, rep.var_ci);
            rec.put("product", rep.product);
            rec.put("l_hat", rep.l_hat, rep.l_ci);
            rec.put_constant("coarea_rhs", rep.coarea_rhs);
            rec.put_constant("c_fit", rep.c_fit);
            rec.put_check("coarea_holds", rep.coarea_pass);
        } else if (kind == "nazarov") {
            const SurfaceProfile prof = estimate_surface_profile(
                field, trials, cfg.get_u64_or("params", "bins", 0), seed, workers,
                cfg.get_u64_or("params", "pilot_trials", 10'000));
            const NazarovReport rep = check_nazarov_bounds(prof, prof.m_hat);
            rec.put("m_hat", prof.m_hat);
            rec.put("c_inv_linear", rep.c_inv_linear);
            rec.put("c_inv_linear_lo", rep.c_inv_linear_lo);
            rec.put("c_inv_plateau", rep.c_inv_plateau);
            rec.put("c_inv_plateau_lo", rep.c_inv_plateau_lo);
            rec.put_constant("plateau_defined", rep.plateau_defined ? 1.0 : 0.0);
            rec.put_constant("plateau_bins", static_cast<double>(rep.plateau_bins));
            rec.put_constant("checked_pairs", static_cast<double>(rep.checked_pairs));
            rec.put_constant("ratio_violations", static_cast<double>(rep.violations));
            rec.put_check("ratio_monotone", rep.monotone_pass);
            out.artifacts.emplace_back("bins.csv", detail::profile_csv(prof));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config error: " + kind + ": " + e.what());
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

// Persists <experiment>-<seed>.json/.csv plus artifacts; returns the paths.
inline std::vector<std::string> write_outputs(const RunOutput& out, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string base =
        out.record.experiment + "-" + std::to_string(out.record.seed);
    std::vector<std::string> paths;
    const std::string json_path = (fs::path(out_dir) / (base + ".json")).string();
    write_text_file(json_path, to_json_text(out.record));
    paths.push_back(json_path);
    const std::string csv_path = (fs::path(out_dir) / (base + ".csv")).string();
    write_text_file(csv_path, to_csv_text(out.record));
    paths.push_back(csv_path);
    for (const auto& [name, text] : out.artifacts) {
        const std::string p = (fs::path(out_dir) / (base + "-" + name)).string();
        write_text_file(p, text);
        paths.push_back(p);
    }
    return paths;
}

} // namespace gfe
