#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "harness.hpp"
#include "zoo.hpp"

namespace gfe {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double limit_seconds = 0.0;
};

struct SuiteReport {
    std::string profile;
    std::vector<CriterionResult> criteria;
    bool all_pass = true;
    double seconds = 0.0;
};

namespace detail {

inline std::string num(double x, int prec = 5) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    return buf;
}

struct CriterionCheck {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [FAIL]");
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

} // namespace detail

// Runs the acceptance suite.  The full profile uses the nominal trial
// counts; quick cuts them down and widens the statistical tolerances by the
// matching square-root factor, keeping structural checks unchanged.
inline SuiteReport verify_all(const std::string& profile, unsigned workers = 1,
                              std::uint64_t base_seed = 20260815) {
    if (profile != "quick" && profile != "full")
        throw ConfigError("config error: profile must be quick or full");
    const bool full = profile == "full";

    SuiteReport report;
    report.profile = profile;
    const auto suite_start = std::chrono::steady_clock::now();

    auto run = [&](int number, const std::string& name, double limit,
                   const std::function<void(detail::CriterionCheck&, std::uint64_t)>& body) {
        CriterionResult res;
        res.number = number;
        res.name = name;
        res.limit_seconds = limit;
        detail::CriterionCheck check;
        const std::uint64_t seed = base_seed + 7919ull * static_cast<std::uint64_t>(number);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(check, seed);
        } catch (const std::exception& e) {
            check.pass = false;
            check.note(std::string("error: ") + e.what());
        }
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (res.seconds > limit) {
            check.pass = false;
            check.note("over time limit");
        }
        res.pass = check.pass;
        res.detail = check.detail;
        report.all_pass = report.all_pass && res.pass;
        report.criteria.push_back(std::move(res));
    };

    constexpr double mean_max2 = 0.5641895835477563;  // E max of two iid standard normals
    constexpr double var_max2 = 0.6816901138162093;   // Var of the same maximum

    run(1, "closed-form moments", 10.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::uint64_t trials = full ? 1'000'000 : 100'000;
        const double widen = full ? 1.0 : std::sqrt(10.0);
        const SupremumStats st =
            estimate_sup_stats(GaussianField::independent(2), trials, seed, workers, {200, 0.95});
        c.require(std::abs(st.m_hat - mean_max2) <= 0.005 * widen,
                  "m_hat=" + detail::num(st.m_hat) + " vs " + detail::num(mean_max2) +
                      " tol " + detail::num(0.005 * widen, 3));
        c.require(std::abs(st.var_hat - var_max2) <= 0.01 * widen,
                  "var_hat=" + detail::num(st.var_hat) + " vs " + detail::num(var_max2) +
                      " tol " + detail::num(0.01 * widen, 3));
    });

    run(2, "concentration envelope", 30.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::uint64_t trials = full ? 100'000 : 10'000;
        const std::vector<double> zs{0.5, 1.0, 1.5, 2.0};
        const BorellReport rep =
            check_borell(GaussianField::independent(1024), zs, trials, seed, workers);
        for (const ExceedancePoint& p : rep.points)
            c.require(p.pass, "z=" + detail::num(p.z, 2) + " freq=" + detail::num(p.freq) +
                                  " env=" + detail::num(p.envelope));
    });

    run(3, "free-energy sandwich", 10.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::vector<double> betas{0.5, 1.0, 5.0, 50.0};
        const std::uint64_t per_field = full ? 1'250 : 250;
        std::uint64_t checked = 0, violations = 0;
        std::uint64_t t = 0;
        for (const ZooEntry& z : standard_zoo()) {
            const double logn = std::log(static_cast<double>(z.field.size()));
            for (std::uint64_t k = 0; k < per_field; ++k) {
                const FieldSample fs = sample(z.field, seed, streams::trial(t++));
                const double m = supremum(fs).value;
                for (double beta : betas) {
                    const double f = free_energy(fs, beta);
                    const double slack = 1e-9 * (1.0 + std::abs(f));
                    ++checked;
                    if (f < m - slack || f > m + logn / beta + slack) ++violations;
                }
            }
        }
        c.require(violations == 0, std::to_string(checked) + " sandwich checks, " +
                                       std::to_string(violations) + " violations");
    });

    run(4, "exhaustive-search equivalence", 60.0, [&](detail::CriterionCheck& c,
                                                      std::uint64_t seed) {
        const std::uint64_t drivers = full ? 100 : 20;
        std::uint64_t polymer_bad = 0, spin_bad = 0;
        for (int n = 2; n <= 6; ++n) {
            const PolymerLattice lat(n);
            std::vector<double> driver(lat.edge_count());
            for (std::uint64_t d = 0; d < drivers; ++d) {
                Rng rng(seed, streams::aux(1000ull * n + d));
                for (double& w : driver) w = rng.normal();
                const PolymerLattice::Best dp = lat.supremum(driver);
                double best = -std::numeric_limits<double>::infinity();
                std::uint64_t best_rank = 0;
                lat.enumerate_paths(driver, [&](std::uint64_t rank, double v) {
                    if (v > best) {
                        best = v;
                        best_rank = rank;
                    }
                });
                if (dp.value != best || dp.rank != best_rank) ++polymer_bad;
            }
        }
        for (int n = 4; n <= 10; ++n) {
            const SpinForm sp(n);
            const std::uint64_t flip = sp.config_count() - 1;
            std::vector<double> w(sp.driver_size());
            for (std::uint64_t d = 0; d < drivers; ++d) {
                Rng rng(seed, streams::aux(2'000'000ull + 1000ull * n + d));
                for (double& x : w) x = rng.normal();
                const SpinForm::Best gray = sp.supremum(w);
                double best = -std::numeric_limits<double>::infinity();
                std::uint64_t best_mask = 0;
                for (std::uint64_t mask = 0; mask < sp.config_count(); ++mask) {
                    const double v = sp.energy(w, mask);
                    if (v > best) {
                        best = v;
                        best_mask = mask;
                    }
                }
                // the energy is invariant under a global spin flip, so the
                // argmax is only defined up to complementing the mask
                if (gray.value != best ||
                    (gray.mask != best_mask && gray.mask != (best_mask ^ flip)))
                    ++spin_bad;
            }
        }
        c.require(polymer_bad == 0, "lattice sup vs enumeration: " +
                                        std::to_string(polymer_bad) + " mismatches");
        c.require(spin_bad == 0,
                  "spin sup vs naive sweep: " + std::to_string(spin_bad) + " mismatches");
    });

    run(5, "peak-set certificates", 60.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::vector<ZooEntry> zoo = standard_zoo();
        const std::uint64_t per_field = (full ? 1'000 : 200) / zoo.size();
        std::uint64_t scanned = 0, invariant_bad = 0, block_bad = 0;
        for (const ZooEntry& z : zoo) {
            const SupremumStats pilot =
                estimate_sup_stats(z.field, 2'000, seed, workers, {50, 0.95}, streams::pilot);
            for (std::uint64_t k = 0; k < per_field; ++k) {
                PeakQuery q;
                q.delta = (k % 2 == 0) ? 0.2 : 0.5;
                q.eps = (k % 2 == 0) ? 0.1 : 0.3;
                q.m_ref = pilot.m_hat;
                const FieldSample fs = sample(z.field, seed, streams::trial(seed + k));
                const PeakSet ps = extract_peaks(fs, q);
                ++scanned;
                if (!verify_peak_set(fs, q, ps)) ++invariant_bad;
                if (z.field.kind() == FieldKind::block && ps.size() > z.field.block_count())
                    ++block_bad;
            }
        }
        c.require(invariant_bad == 0, std::to_string(scanned) + " extractions re-scanned, " +
                                          std::to_string(invariant_bad) + " invariant failures");
        c.require(block_bad == 0,
                  "block peak-count cap: " + std::to_string(block_bad) + " violations");

        PeakQuery q;
        q.delta = 1.0;
        q.eps = 0.5;
        q.zeta = 0.05;
        const std::uint64_t trials = full ? 1'000'000 : 100'000;
        const PeakEventStats ev =
            estimate_peak_event(GaussianField::block(8, 16), q, 8, trials, seed, workers);
        const double p0 = 0.00390625; // all eight block signs positive
        const double se = binomial_stderr(p0, trials);
        c.require(std::abs(ev.freq - p0) <= 4.0 * se,
                  "event freq=" + detail::num(ev.freq) + " vs " + detail::num(p0) + " (4se=" +
                      detail::num(4.0 * se, 3) + ")");
    });

    run(6, "restricted-sup tail bound", 120.0, [&](detail::CriterionCheck& c,
                                                   std::uint64_t seed) {
        const std::uint64_t trials = full ? 100'000 : 10'000;
        const std::vector<double> ts{0.3, 0.5, 0.7};
        const std::vector<double> lf{0.5, 1.0, 2.0};
        const Lemma23Report rep =
            check_restricted_sup_tail(GaussianField::independent(256), ts, lf, trials, seed,
                                      workers);
        for (const Lemma23Point& p : rep.points)
            c.require(p.pass, "t=" + detail::num(p.t, 2) + ",lam=" + detail::num(p.lambda, 3) +
                                  ": freq=" + detail::num(p.freq) + " bound=" +
                                  detail::num(p.bound));
    });

    run(7, "split V estimate at t=0", 10.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::uint64_t inner = full ? 100'000 : 20'000;
        const double tol = 0.02 * (full ? 1.0 : std::sqrt(5.0));
        const std::vector<double> grid{0.0, 0.5};
        const MartingalePath path = simulate_doob_path(two_orthonormal(), grid, inner, seed);
        c.require(std::abs(path.nodes.front().v_hat - 0.5) <= tol,
                  "v0=" + detail::num(path.nodes.front().v_hat) + " vs 0.5 tol " +
                      detail::num(tol, 3));
    });

    run(8, "quadratic-variation identity", 300.0, [&](detail::CriterionCheck& c,
                                                      std::uint64_t seed) {
        const std::uint64_t paths = full ? 200 : 40;
        const std::size_t nodes = full ? 64 : 32;
        const std::uint64_t inner = full ? 100'000 : 20'000;
        const double eta = 1e-3;
        const std::vector<double> grid = doob_grid(nodes, eta);
        const GaussianField orth = two_orthonormal();
        const std::vector<double> qvs =
            map_trials<double>(paths, workers, [&](std::uint64_t p) {
                return quadratic_variation(simulate_doob_path(orth, grid, inner, seed, p, eta))
                    .estimate();
            });
        Welford w;
        for (double q : qvs) w.add(q);
        const double rel_tol = 0.05 * (full ? 1.0 : std::sqrt(5.0));
        c.require(std::abs(w.mean() - var_max2) <= rel_tol * var_max2,
                  "mean(qv+eta)=" + detail::num(w.mean()) + " vs " + detail::num(var_max2) +
                      " rel tol " + detail::num(rel_tol, 3));

        const std::uint64_t zoo_paths = full ? 2 : 1;
        const std::size_t zoo_nodes = full ? 64 : 32;
        const std::uint64_t zoo_inner = full ? 100'000 : 4'992;
        const std::vector<double> zoo_grid = doob_grid(zoo_nodes, eta);
        std::uint64_t checked = 0, out_of_range = 0;
        for (const ZooEntry& z : standard_zoo()) {
            const GaussianField ex = explicit_factor_of(z.field);
            for (std::uint64_t p = 0; p < zoo_paths; ++p) {
                const MartingalePath path =
                    simulate_doob_path(ex, zoo_grid, zoo_inner, seed, p, eta);
                for (const DoobNode& n : path.nodes) {
                    ++checked;
                    if (n.v_hat > 1.0 + 3.0 * n.v_stderr || n.v_hat < -3.0 * n.v_stderr)
                        ++out_of_range;
                }
            }
        }
        c.require(out_of_range == 0, std::to_string(checked) + " zoo nodes checked, " +
                                         std::to_string(out_of_range) + " outside [0,1]+-3se");
    });

    run(9, "tail exponents", 120.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const GaussianField field = GaussianField::shifted(65'536, 1.0);
        const std::vector<double> betas{0.1, 0.2, 0.3, 0.4, 0.5};
        const TailReport exact = tail_experiment(field, betas, 0, seed, true);
        const std::uint64_t trials = full ? 1'000'000 : 100'000;
        const TailReport mc =
            tail_experiment(field, betas, trials, seed, false, workers, exact.m);
        for (std::size_t k = 0; k < betas.size(); ++k) {
            const TailPoint& e = exact.points[k];
            const TailPoint& m = mc.points[k];
            c.require(std::abs(m.prob - e.prob) <= 4.0 * m.se,
                      "b=" + detail::num(m.beta, 2) + " mc=" + detail::num(m.prob) + " exact=" +
                          detail::num(e.prob));
            if (m.beta <= 0.3 + 1e-12)
                c.require(m.improves_borell, "b=" + detail::num(m.beta, 2) + " exponent=" +
                                                 detail::num(m.exponent) + " >= " +
                                                 detail::num(m.ref_borell));
        }
    });

    run(10, "surface-area profile", 120.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::uint64_t trials = full ? 400'000 : 100'000;
        const double widen = full ? 1.0 : 2.0;

        const SurfaceProfile p1 =
            estimate_surface_profile(GaussianField::independent(1), trials, 0, seed, workers);
        const double peak1 = estimate_L(p1, seed).l_hat;
        constexpr double phi0 = 0.3989422804014327;
        c.require(std::abs(peak1 - phi0) <= 0.01 * widen,
                  "n1 peak=" + detail::num(peak1) + " vs " + detail::num(phi0));
        c.require(std::abs(p1.total_mass() - 1.0) <= 1e-9, "n1 mass ok");

        const SurfaceProfile p2 =
            estimate_surface_profile(two_orthonormal(), trials, 0, seed, workers);
        const double l2 = estimate_L(p2, seed).l_hat;
        // independent oracle: the density of max(Z1,Z2) is 2*phi(t)*Phi(t);
        // its peak by ternary search
        double lo = 0.0, hi = 2.0;
        for (int i = 0; i < 200; ++i) {
            const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
            auto f = [](double t) { return 2.0 * normal_pdf(t) * (1.0 - normal_tail(t)); };
            if (f(a) < f(b))
                lo = a;
            else
                hi = b;
        }
        const double l_oracle = 2.0 * normal_pdf(lo) * (1.0 - normal_tail(lo));
        c.require(std::abs(l2 - l_oracle) <= 0.03 * widen * l_oracle,
                  "two-orth L=" + detail::num(l2) + " vs oracle " + detail::num(l_oracle));
        c.require(std::abs(p2.total_mass() - 1.0) <= 1e-9, "two-orth mass ok");

        const std::uint64_t var_trials = full ? 100'000 : 20'000;
        for (const ZooEntry& z : standard_zoo()) {
            const VarExpReport rep =
                check_var_exp(z.field, var_trials, seed, workers, 0, {200, 0.95});
            c.require(rep.coarea_pass, z.name + " coarea sd=" +
                                           detail::num(std::sqrt(rep.var_hat)) + " rhs=" +
                                           detail::num(rep.coarea_rhs));
        }
    });

    run(11, "variance lower-bound shape", 120.0, [&](detail::CriterionCheck& c,
                                                     std::uint64_t seed) {
        const std::uint64_t trials = full ? 200'000 : 50'000;
        std::vector<double> cs;
        std::string shown;
        for (std::uint64_t n : {16ull, 256ull, 4096ull}) {
            const GaussianField f = GaussianField::independent(n);
            const std::vector<double> sups =
                map_trials<double>(trials, workers, [&](std::uint64_t t) {
                    return detail::sup_draw(f, seed, streams::trial(t));
                });
            Welford w;
            for (double v : sups) w.add(v);
            const double cf = w.variance() * std::log(static_cast<double>(n));
            cs.push_back(cf);
            shown += (shown.empty() ? "c=" : ",") + detail::num(cf, 4);
        }
        double mean = 0.0;
        for (double cf : cs) mean += cf;
        mean /= static_cast<double>(cs.size());
        bool ok = mean > 0.0;
        double worst = 0.0;
        for (double cf : cs) {
            ok = ok && cf > 0.0;
            worst = std::max(worst, std::abs(cf - mean) / mean);
        }
        c.require(ok && worst <= 0.20,
                  shown + " spread " + detail::num(100.0 * worst, 3) + "% of mean");
    });

    run(12, "determinism", 120.0, [&](detail::CriterionCheck& c, std::uint64_t seed) {
        const std::string seed_line = "seed = " + std::to_string(seed) + "\n";
        const std::vector<std::pair<std::string, std::string>> configs = {
            {"sup-stats", "[experiment]\nkind = \"sup-stats\"\n" + seed_line +
                              "trials = 2000\n[field]\nkind = \"independent\"\nn = 64\n"},
            {"peak-event",
             "[experiment]\nkind = \"peak-event\"\n" + seed_line +
                 "trials = 1000\n[field]\nkind = \"block\"\nblocks = 4\nn = 16\n"
                 "[params]\ndelta = 0.5\neps = 0.25\nell = 2\npilot_trials = 1000\n"},
            {"fe-curve", "[experiment]\nkind = \"fe-curve\"\n" + seed_line +
                             "trials = 1000\n[field]\nkind = \"shifted\"\nn = 8\nalpha = 1.0\n"
                             "[params]\nbetas = [0.5, 2.0]\n"},
            {"doob-qv", "[experiment]\nkind = \"doob-qv\"\n" + seed_line +
                            "trials = 2\n[field]\nkind = \"two-orthonormal\"\n"
                            "[params]\npaths = 2\nnodes = 16\ninner_samples = 1600\n"},
            {"tail", "[experiment]\nkind = \"tail\"\n" + seed_line +
                         "trials = 2000\n[field]\nkind = \"shifted\"\nn = 256\nalpha = 1.0\n"
                         "[params]\nbetas = [0.1, 0.3]\npilot_trials = 2000\n"},
            {"surface-profile", "[experiment]\nkind = \"surface-profile\"\n" + seed_line +
                                    "trials = 4000\n[field]\nkind = \"independent\"\nn = 8\n"
                                    "[params]\npilot_trials = 2000\n"},
        };
        for (const auto& [name, text] : configs) {
            Config cfg = Config::parse(text, name);
            cfg.set("experiment", "workers", "1");
            const RunOutput a = run_experiment(cfg);
            const RunOutput b = run_experiment(cfg);
            c.require(to_json_text(a.record) == to_json_text(b.record) &&
                          to_csv_text(a.record) == to_csv_text(b.record),
                      name + " rerun bytes");
            for (unsigned wk : {2u, 3u}) {
                cfg.set("experiment", "workers", std::to_string(wk));
                const RunOutput w = run_experiment(cfg);
                bool close = w.record.estimates.size() == a.record.estimates.size() &&
                             w.record.checks == a.record.checks;
                for (std::size_t i = 0; close && i < a.record.estimates.size(); ++i) {
                    const double x = a.record.estimates[i].second;
                    const double y = w.record.estimates[i].second;
                    close = a.record.estimates[i].first == w.record.estimates[i].first &&
                            std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
                }
                c.require(close, name + " workers=" + std::to_string(wk) + " drift");
            }
        }
    });

    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
    return report;
}

} // namespace gfe
