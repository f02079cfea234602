#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "extremes.hpp"
#include "field.hpp"
#include "mathutil.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace gfe {

struct SurfaceProfile {
    std::vector<double> edges;          // bins()+1 ascending, edges[0] = 0
    std::vector<std::uint64_t> counts;
    std::vector<double> density;        // counts / (trials * width)
    std::vector<Interval> density_ci;
    double neg_mass = 0.0;              // P(u < 0), excluded from the sup
    double over_mass = 0.0;             // P(u >= t_max)
    std::uint64_t trials = 0;
    double bin_width = 0.0;
    double t_max = 0.0;
    double m_hat = 0.0;                 // pilot mean of the maximum
    std::uint64_t neg_count = 0;
    std::uint64_t over_count = 0;

    std::size_t bins() const { return counts.size(); }
    double mid(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    double total_mass() const {
        double acc = neg_mass + over_mass;
        for (std::size_t i = 0; i < bins(); ++i) acc += density[i] * bin_width;
        return acc;
    }
};

namespace detail {

inline void require_unit_variances(const GaussianField& field, const char* who) {
    auto check = [&](double v) {
        if (std::abs(v - 1.0) > 1e-12)
            throw std::invalid_argument(std::string(who) +
                                        ": index variances must be 1 within 1e-12");
    };
    if (field.kind() == FieldKind::explicit_factor) {
        for (std::uint64_t i = 0; i < field.size(); ++i) check(field.variance_of(i));
    } else {
        // the remaining kinds are variance-homogeneous by construction
        check(field.variance_of(0));
    }
}

} // namespace detail

// Histogram density of the maximum over [0, t_max], t_max = 2 m_hat + 4.
// With unit index variances the maximum is 1-Lipschitz in the driver, and
// the bin density estimates the Gaussian surface area of the level set.
// bins = 0 picks the width by the Freedman-Diaconis rule on a pilot run.
inline SurfaceProfile estimate_surface_profile(const GaussianField& field, std::uint64_t trials,
                                               std::size_t bins, std::uint64_t seed,
                                               unsigned workers = 1,
                                               std::uint64_t pilot_trials = 10'000,
                                               std::uint64_t (*stream_of)(std::uint64_t) =
                                                   streams::trial) {
    detail::require_unit_variances(field, "estimate_surface_profile");
    if (!field.centered())
        throw std::invalid_argument("estimate_surface_profile: field must be centered");
    if (trials < 2) throw std::invalid_argument("estimate_surface_profile: need at least two trials");

    SurfaceProfile prof;
    prof.trials = trials;
    {
        std::vector<double> pilot =
            map_trials<double>(pilot_trials, workers, [&](std::uint64_t t) {
                return detail::sup_draw(field, seed, streams::pilot(t));
            });
        Welford w;
        for (double v : pilot) w.add(v);
        prof.m_hat = w.mean();
        prof.t_max = 2.0 * prof.m_hat + 4.0;
        if (bins == 0) {
            std::sort(pilot.begin(), pilot.end());
            const double q1 = sorted_quantile(pilot, 0.25);
            const double q3 = sorted_quantile(pilot, 0.75);
            const double width =
                2.0 * (q3 - q1) / std::cbrt(static_cast<double>(trials));
            if (width > 0.0)
                bins = static_cast<std::size_t>(std::ceil(prof.t_max / width));
            bins = std::clamp<std::size_t>(bins, 8, 4096);
        }
    }
    prof.bin_width = prof.t_max / static_cast<double>(bins);
    prof.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        prof.edges[i] = prof.t_max * static_cast<double>(i) / static_cast<double>(bins);
    prof.counts.assign(bins, 0);

    std::vector<std::vector<std::uint64_t>> worker_counts(
        workers, std::vector<std::uint64_t>(bins + 2, 0)); // [neg, bins..., over]
    run_partitioned(trials, workers, [&](unsigned w, std::uint64_t begin, std::uint64_t end) {
        auto& local = worker_counts[w];
        for (std::uint64_t t = begin; t < end; ++t) {
            const double v = detail::sup_draw(field, seed, stream_of(t));
            if (v < 0.0) {
                ++local[0];
            } else {
                const auto bi = static_cast<std::size_t>(v / prof.bin_width);
                if (bi >= bins)
                    ++local[bins + 1];
                else
                    ++local[1 + bi];
            }
        }
    });
    for (const auto& local : worker_counts) {
        prof.neg_count += local[0];
        prof.over_count += local[bins + 1];
        for (std::size_t i = 0; i < bins; ++i) prof.counts[i] += local[1 + i];
    }

    const double n = static_cast<double>(trials);
    prof.neg_mass = static_cast<double>(prof.neg_count) / n;
    prof.over_mass = static_cast<double>(prof.over_count) / n;
    prof.density.resize(bins);
    prof.density_ci.resize(bins);
    const double z = normal_upper_quantile(0.025);
    for (std::size_t i = 0; i < bins; ++i) {
        const double p = static_cast<double>(prof.counts[i]) / n;
        prof.density[i] = p / prof.bin_width;
        const double half = z * binomial_stderr(p, trials);
        prof.density_ci[i] = {std::max(0.0, p - half) / prof.bin_width,
                              (p + half) / prof.bin_width};
    }
    return prof;
}

struct LEstimate {
    double l_hat = 0.0;
    std::size_t argmax_bin = 0;
    double t_at_max = 0.0;
    Interval ci;
};

// Sup of the density profile over t >= 0, with a multinomial bootstrap CI
// (resampling trials over the observed bin distribution).
inline LEstimate estimate_L(const SurfaceProfile& prof, std::uint64_t seed,
                            std::uint64_t resamples = 200, double confidence = 0.95) {
    if (prof.bins() == 0) throw std::invalid_argument("estimate_L: empty profile");
    LEstimate out;
    for (std::size_t i = 0; i < prof.bins(); ++i)
        if (prof.density[i] > out.l_hat) {
            out.l_hat = prof.density[i];
            out.argmax_bin = i;
        }
    out.t_at_max = prof.mid(out.argmax_bin);

    // categories in index order: neg bucket, bins, overflow bucket
    std::vector<std::uint64_t> cum(prof.bins() + 2);
    cum[0] = prof.neg_count;
    for (std::size_t i = 0; i < prof.bins(); ++i) cum[i + 1] = cum[i] + prof.counts[i];
    cum[prof.bins() + 1] = cum[prof.bins()] + prof.over_count;

    std::vector<double> ls(resamples);
    std::vector<std::uint64_t> cnt(prof.bins() + 2);
    ResampleWalker walker;
    for (std::uint64_t b = 0; b < resamples; ++b) {
        std::fill(cnt.begin(), cnt.end(), 0);
        Rng rng(seed, streams::bootstrap(b));
        std::size_t cat = 0;
        walker.walk(rng, prof.trials, [&](std::uint64_t idx) {
            while (idx >= cum[cat]) ++cat;
            ++cnt[cat];
        });
        double best = 0.0;
        for (std::size_t i = 0; i < prof.bins(); ++i)
            best = std::max(best, static_cast<double>(cnt[i + 1]));
        ls[b] = best / (static_cast<double>(prof.trials) * prof.bin_width);
    }
    std::sort(ls.begin(), ls.end());
    out.ci = percentile_interval(ls, confidence);
    return out;
}

struct VarExpReport {
    std::uint64_t n_indices = 0;
    std::uint64_t trials = 0;
    double m_hat = 0.0;
    double var_hat = 0.0;
    Interval var_ci;
    double product = 0.0;    // sqrt(Var M) * E M
    double l_hat = 0.0;
    Interval l_ci;
    double coarea_rhs = 0.0; // 1 / (6 L)
    bool coarea_pass = false;
    double c_fit = 0.0;      // Var M * log N
};

// Variance-expectation relation: reports sqrt(Var M) * E M, checks the
// surface-area lower bound sqrt(Var M) >= 1/(6 L) with CI slack, and fits
// the constant in Var M >= c / log N.
inline VarExpReport check_var_exp(const GaussianField& field, std::uint64_t trials,
                                  std::uint64_t seed, unsigned workers = 1, std::size_t bins = 0,
                                  const BootstrapOptions& boot = {}) {
    if (field.size() < 2)
        throw std::invalid_argument("check_var_exp: refused for N = 1 (degenerate maximum)");
    detail::require_unit_variances(field, "check_var_exp");

    VarExpReport rep;
    rep.n_indices = field.size();
    rep.trials = trials;
    const SupremumStats st = estimate_sup_stats(field, trials, seed, workers, boot);
    rep.m_hat = st.m_hat;
    rep.var_hat = st.var_hat;
    rep.var_ci = st.var_ci;
    rep.product = std::sqrt(st.var_hat) * st.m_hat;

    const SurfaceProfile prof =
        estimate_surface_profile(field, trials, bins, seed, workers, 10'000, streams::aux);
    const LEstimate l = estimate_L(prof, seed);
    rep.l_hat = l.l_hat;
    rep.l_ci = l.ci;
    rep.coarea_rhs = 1.0 / (6.0 * l.l_hat);
    // fail only when the inequality is violated beyond both intervals
    rep.coarea_pass = std::sqrt(std::max(0.0, rep.var_ci.hi)) >= 1.0 / (6.0 * l.ci.hi);
    rep.c_fit = rep.var_hat * std::log(static_cast<double>(field.size()));
    return rep;
}

struct NazarovReport {
    double c_inv_linear = 0.0;    // smallest c^-1 with density(t) <= c^-1 t on all bins
    double c_inv_linear_lo = 0.0; // same, from the CI lower edges
    bool plateau_defined = false; // m_hat must be positive
    double c_inv_plateau = std::numeric_limits<double>::quiet_NaN();
    double c_inv_plateau_lo = std::numeric_limits<double>::quiet_NaN();
    std::size_t plateau_bins = 0;
    std::size_t checked_pairs = 0; // consecutive well-populated bins compared
    std::size_t violations = 0;
    bool monotone_pass = true;
};

// Profile-shape checks: the linear bound density <= c^-1 t, the plateau
// bound density <= 4 c^-1 m_hat for t >= 2 m_hat, and monotonicity of
// density(t) / P(u <= t) along the sampled grid.
inline NazarovReport check_nazarov_bounds(const SurfaceProfile& prof, double m_hat) {
    if (prof.bins() == 0) throw std::invalid_argument("check_nazarov_bounds: empty profile");
    NazarovReport rep;
    for (std::size_t i = 0; i < prof.bins(); ++i) {
        const double t = prof.mid(i);
        rep.c_inv_linear = std::max(rep.c_inv_linear, prof.density[i] / t);
        rep.c_inv_linear_lo = std::max(rep.c_inv_linear_lo, prof.density_ci[i].lo / t);
    }
    if (m_hat > 1e-12) {
        rep.plateau_defined = true;
        double p = 0.0, plo = 0.0;
        for (std::size_t i = 0; i < prof.bins(); ++i) {
            if (prof.mid(i) < 2.0 * m_hat) continue;
            ++rep.plateau_bins;
            p = std::max(p, prof.density[i] / (4.0 * m_hat));
            plo = std::max(plo, prof.density_ci[i].lo / (4.0 * m_hat));
        }
        rep.c_inv_plateau = p;
        rep.c_inv_plateau_lo = plo;
    }

    // ratio density / CDF, compared over consecutive bins that both carry
    // enough mass for the comparison to rise above counting noise
    const double n = static_cast<double>(prof.trials);
    std::uint64_t cum = prof.neg_count;
    double prev_ratio = std::numeric_limits<double>::infinity();
    std::uint64_t prev_count = 0;
    for (std::size_t i = 0; i < prof.bins(); ++i) {
        cum += prof.counts[i];
        if (prof.counts[i] < 16) continue;
        const double ratio = prof.density[i] / (static_cast<double>(cum) / n);
        if (prev_count >= 16) {
            ++rep.checked_pairs;
            const double slack =
                3.0 * (1.0 / std::sqrt(static_cast<double>(prof.counts[i])) +
                       1.0 / std::sqrt(static_cast<double>(prev_count)));
            if (ratio > prev_ratio * (1.0 + slack)) ++rep.violations;
        }
        prev_ratio = ratio;
        prev_count = prof.counts[i];
    }
    rep.monotone_pass = rep.violations == 0;
    return rep;
}

} // namespace gfe
