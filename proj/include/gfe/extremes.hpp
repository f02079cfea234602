#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "field.hpp"
#include "mathutil.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace gfe {

inline constexpr std::uint64_t default_enum_cap = 1ull << 24;
inline constexpr std::size_t default_level_set_cap = 1'000'000;

struct Extreme {
    double value;
    std::uint64_t index; // lowest index attaining the value
};

// Exact maximum of one realization.  Materialized kinds scan; lattice
// paths use the dynamic program; spin configurations use the Gray sweep.
inline Extreme supremum(const FieldSample& fs) {
    if (fs.materialized()) {
        Extreme best{-std::numeric_limits<double>::infinity(), 0};
        for (std::uint64_t i = 0; i < fs.values.size(); ++i)
            if (fs.values[i] > best.value) best = {fs.values[i], i};
        return best;
    }
    const double s = fs.field.value_scale();
    switch (fs.field.kind()) {
        case FieldKind::directed_polymer: {
            const auto b = fs.field.lattice().supremum(fs.driver);
            return {s * b.value, b.rank};
        }
        case FieldKind::spin_glass: {
            const auto b = fs.field.spins().supremum(fs.driver);
            return {s * b.value, b.mask};
        }
        default:
            throw std::logic_error("supremum: unsupported sample state");
    }
}

// Indices with value >= threshold, ascending.  Implicit kinds enumerate
// with pruning (paths) or sweeping (spins); `cap` bounds the result size.
inline std::vector<std::uint64_t> level_set(const FieldSample& fs, double threshold,
                                            std::size_t cap = default_level_set_cap) {
    if (fs.materialized()) {
        std::vector<std::uint64_t> out;
        for (std::uint64_t i = 0; i < fs.values.size(); ++i) {
            if (fs.values[i] >= threshold) {
                if (out.size() >= cap)
                    throw std::runtime_error(
                        "level_set: result exceeds cap; raise the cap or the threshold");
                out.push_back(i);
            }
        }
        return out;
    }
    const double s = fs.field.value_scale();
    switch (fs.field.kind()) {
        case FieldKind::directed_polymer:
            return fs.field.lattice().level_set(fs.driver, threshold / s, cap);
        case FieldKind::spin_glass:
            return fs.field.spins().level_set(fs.driver, threshold / s, cap);
        default:
            throw std::logic_error("level_set: unsupported sample state");
    }
}

// Soft maximum at inverse temperature beta: (1/beta) log sum_i exp(beta x_i).
inline double free_energy(const FieldSample& fs, double beta,
                          std::uint64_t enum_cap = default_enum_cap) {
    if (!(beta > 0.0)) throw std::invalid_argument("free_energy: beta must be positive");
    double peak = -std::numeric_limits<double>::infinity();
    CompensatedSum acc;
    if (fs.materialized()) {
        for (double v : fs.values) peak = std::max(peak, v);
        for (double v : fs.values) acc.add(std::exp(beta * (v - peak)));
    } else if (fs.field.kind() == FieldKind::directed_polymer) {
        const auto& lat = fs.field.lattice();
        if (lat.path_count() > enum_cap)
            throw std::runtime_error("free_energy: path count exceeds the enumeration cap");
        const double s = fs.field.value_scale();
        lat.enumerate_paths(fs.driver,
                            [&](std::uint64_t, double v) { peak = std::max(peak, s * v); });
        lat.enumerate_paths(fs.driver, [&](std::uint64_t, double v) {
            acc.add(std::exp(beta * (s * v - peak)));
        });
    } else if (fs.field.kind() == FieldKind::spin_glass) {
        const auto& sp = fs.field.spins();
        if (sp.config_count() > enum_cap)
            throw std::runtime_error("free_energy: configuration count exceeds the enumeration cap");
        const double s = fs.field.value_scale();
        sp.sweep(fs.driver, [&](std::uint64_t, double v) { peak = std::max(peak, s * v); });
        sp.sweep(fs.driver,
                 [&](std::uint64_t, double v) { acc.add(std::exp(beta * (s * v - peak))); });
    } else {
        throw std::logic_error("free_energy: unsupported sample state");
    }
    // The sum contains exp(0) = 1 for the maximizing index, so it is >= 1
    // in exact arithmetic; the clamp shields the log from summation noise.
    return peak + std::log(std::max(acc.value(), 1.0)) / beta;
}

inline std::vector<double> free_energy_curve(const FieldSample& fs, std::span<const double> betas,
                                             std::uint64_t enum_cap = default_enum_cap) {
    std::vector<double> out;
    out.reserve(betas.size());
    for (double b : betas) out.push_back(free_energy(fs, b, enum_cap));
    return out;
}

namespace detail {

// Exact-law shortcut for the maximum of kinds whose max reduces to a
// closed-form transform of iid draws; avoids materializing huge fields.
inline bool fast_max_applicable(const GaussianField& f) {
    return f.kind() == FieldKind::block || f.kind() == FieldKind::shifted;
}

inline double fast_max_draw(const GaussianField& f, Rng& rng) {
    const double s = f.value_scale();
    if (f.kind() == FieldKind::block) {
        const double u = rng.uniform_co() + 0x1.0p-54;
        return s * max_of_iid_normals_quantile(u, static_cast<double>(f.block_count()));
    }
    const double a = std::sqrt(1.0 - 0.5 * f.alpha() * f.alpha());
    const double bcoef = f.alpha() / std::numbers::sqrt2;
    const double z = rng.normal();
    const double u = rng.uniform_co() + 0x1.0p-54;
    return s * (a * z + bcoef * max_of_iid_normals_quantile(u, static_cast<double>(f.size())));
}

// Value of the maximum only, skipping argmax bookkeeping where a closed
// form exists.
inline double sup_draw(const GaussianField& f, std::uint64_t seed, std::uint64_t stream) {
    if (fast_max_applicable(f)) {
        Rng rng(seed, stream);
        return fast_max_draw(f, rng);
    }
    return supremum(sample(f, seed, stream)).value;
}

} // namespace detail

struct CoupledTriple {
    double t = 0.0;
    FieldSample x;        // t * x_prime + sqrt(1 - t^2) * x_dprime, value-wise
    FieldSample x_prime;
    FieldSample x_dprime;
};

// Interpolation between two independent copies, built at driver level so
// the mixture is itself an exact realization of the field.  Requires a
// centered field: with nonzero means the value-wise identity would fail.
inline CoupledTriple couple_decompose(const GaussianField& field, double t, std::uint64_t seed,
                                      std::uint64_t stream) {
    if (!(t > 0.0 && t < 1.0))
        throw std::invalid_argument("couple_decompose: t must be in (0,1)");
    if (!field.centered())
        throw std::invalid_argument("couple_decompose: field must be centered");
    CoupledTriple out;
    out.t = t;
    out.x_prime = sample(field, seed, stream);
    out.x_dprime = sample(field, seed, streams::companion(stream));
    const double root = std::sqrt(1.0 - t * t);
    std::vector<double> mixed(field.driver_size());
    for (std::size_t k = 0; k < mixed.size(); ++k)
        mixed[k] = t * out.x_prime.driver[k] + root * out.x_dprime.driver[k];
    out.x = with_driver(field, std::move(mixed));
    out.x.seed = seed;
    out.x.stream = stream;
    return out;
}

struct SupremumStats {
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    double m_hat = 0.0;   // mean of the per-realization maximum
    Interval m_ci;
    double var_hat = 0.0; // variance of the maximum
    Interval var_ci;
    double max_variance = 0.0; // largest single-index variance of the field
    std::vector<double> sups;          // per-trial maximum, indexed by trial
    std::vector<std::uint64_t> argmaxes;
    double sigma_hat() const { return std::sqrt(var_hat); }
};

// Monte Carlo moments of the maximum.  Trial t draws from stream_of(t)
// (trial streams by default, pilot streams for calibration runs), so
// results do not depend on the worker count; intervals come from the
// percentile bootstrap over the stored per-trial maxima.
inline SupremumStats estimate_sup_stats(const GaussianField& field, std::uint64_t trials,
                                        std::uint64_t seed, unsigned workers = 1,
                                        const BootstrapOptions& boot = {},
                                        std::uint64_t (*stream_of)(std::uint64_t) = streams::trial) {
    if (trials < 2) throw std::invalid_argument("estimate_sup_stats: need at least two trials");
    SupremumStats out;
    out.trials = trials;
    out.seed = seed;
    out.sups.resize(trials);
    out.argmaxes.resize(trials);
    run_partitioned(trials, workers, [&](unsigned, std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) {
            const Extreme e = supremum(sample(field, seed, stream_of(t)));
            out.sups[t] = e.value;
            out.argmaxes[t] = e.index;
        }
    });
    Welford w;
    for (double v : out.sups) w.add(v);
    const MeanVarIntervals ci = bootstrap_mean_var(out.sups, seed, boot);
    out.m_hat = w.mean();
    out.m_ci = ci.mean;
    out.var_hat = w.variance();
    out.var_ci = ci.variance;
    out.max_variance = field.max_variance();
    return out;
}

struct FreeEnergyStats {
    double beta = 0.0;
    std::uint64_t trials = 0;
    double f_hat = 0.0;   // mean of F_beta
    Interval f_ci;
    double var_hat = 0.0; // variance of F_beta
    Interval var_ci;
};

// Two-sided Gaussian concentration envelope for the deviation of the
// maximum from its mean: 2 P(Z >= z / sigma).
inline double borell_tail_bound(double sigma, double z) {
    if (!(sigma > 0.0)) throw std::invalid_argument("borell_tail_bound: sigma must be positive");
    if (!(z >= 0.0)) throw std::invalid_argument("borell_tail_bound: z must be nonnegative");
    return 2.0 * normal_tail(z / sigma);
}

struct ExceedancePoint {
    double z = 0.0;
    double freq = 0.0;
    double envelope = 0.0;
    double se = 0.0;
    bool pass = false; // freq <= envelope + 4 se
};

struct BorellReport {
    SupremumStats stats;
    std::vector<ExceedancePoint> points;
    bool all_pass = true;
};

// Empirical two-sided deviation frequencies of the maximum around its
// estimated mean, checked against the concentration envelope with a
// four-standard-error grace band.
inline BorellReport check_borell(const GaussianField& field, std::span<const double> zs,
                                 std::uint64_t trials, std::uint64_t seed, unsigned workers = 1,
                                 const BootstrapOptions& boot = {}) {
    BorellReport rep;
    rep.stats = estimate_sup_stats(field, trials, seed, workers, boot);
    const double sigma = std::sqrt(field.max_variance());
    for (double z : zs) {
        std::uint64_t hits = 0;
        for (double v : rep.stats.sups)
            if (std::abs(v - rep.stats.m_hat) >= z) ++hits;
        ExceedancePoint p;
        p.z = z;
        p.freq = static_cast<double>(hits) / static_cast<double>(trials);
        p.envelope = borell_tail_bound(sigma, z);
        p.se = binomial_stderr(p.freq, trials);
        p.pass = p.freq <= p.envelope + 4.0 * p.se;
        rep.all_pass = rep.all_pass && p.pass;
        rep.points.push_back(p);
    }
    return rep;
}

struct Lemma23Point {
    double t = 0.0;
    double lambda = 0.0;
    double freq = 0.0;
    double bound = 0.0; // sigma_hat^2 / lambda^2
    double se = 0.0;
    bool pass = false;  // freq <= bound + 4 se
};

struct Lemma23Report {
    double m_hat = 0.0;
    double var_hat = 0.0;
    std::uint64_t trials = 0;
    std::vector<Lemma23Point> points;
    bool all_pass = true;
};

// Restricted-supremum tail check: sample X, form the level set
// U = {i : X_i >= t m}, draw an independent copy X', and measure how often
// sup over U of X' reaches sqrt(1-t^2) m + lambda / sqrt(1-t^2).  The
// Chebyshev-style bound sigma^2 / lambda^2 must dominate each frequency.
inline Lemma23Report check_restricted_sup_tail(const GaussianField& field,
                                               std::span<const double> ts,
                                               std::span<const double> lambda_factors,
                                               std::uint64_t trials, std::uint64_t seed,
                                               unsigned workers = 1,
                                               std::uint64_t pilot_trials = 10'000) {
    if (!field.centered())
        throw std::invalid_argument("check_restricted_sup_tail: field must be centered");
    if (field.kind() == FieldKind::directed_polymer || field.kind() == FieldKind::spin_glass)
        throw std::invalid_argument(
            "check_restricted_sup_tail: needs a field with materialized values");
    const SupremumStats pilot =
        estimate_sup_stats(field, pilot_trials, seed, workers, {}, streams::pilot);
    const double m = pilot.m_hat;
    const double sig2 = pilot.var_hat;

    const std::size_t cells = ts.size() * lambda_factors.size();
    std::vector<std::vector<std::uint64_t>> worker_hits(workers,
                                                        std::vector<std::uint64_t>(cells, 0));
    run_partitioned(trials, workers, [&](unsigned w, std::uint64_t begin, std::uint64_t end) {
        auto& hits = worker_hits[w];
        for (std::uint64_t trial = begin; trial < end; ++trial) {
            const FieldSample x = sample(field, seed, streams::trial(trial));
            const FieldSample xp =
                sample(field, seed, streams::companion(streams::trial(trial)));
            for (std::size_t a = 0; a < ts.size(); ++a) {
                const double t = ts[a];
                const double thr = t * m;
                double restricted = -std::numeric_limits<double>::infinity();
                for (std::uint64_t i = 0; i < field.size(); ++i)
                    if (x.values[i] >= thr) restricted = std::max(restricted, xp.values[i]);
                const double root = std::sqrt(1.0 - t * t);
                for (std::size_t b = 0; b < lambda_factors.size(); ++b) {
                    const double lambda = lambda_factors[b] * std::sqrt(sig2);
                    if (restricted >= root * m + lambda / root) ++hits[a * lambda_factors.size() + b];
                }
            }
        }
    });

    Lemma23Report rep;
    rep.m_hat = m;
    rep.var_hat = sig2;
    rep.trials = trials;
    for (std::size_t a = 0; a < ts.size(); ++a) {
        for (std::size_t b = 0; b < lambda_factors.size(); ++b) {
            std::uint64_t total = 0;
            for (unsigned w = 0; w < workers; ++w) total += worker_hits[w][a * lambda_factors.size() + b];
            Lemma23Point p;
            p.t = ts[a];
            p.lambda = lambda_factors[b] * std::sqrt(sig2);
            p.freq = static_cast<double>(total) / static_cast<double>(trials);
            p.bound = sig2 / (p.lambda * p.lambda);
            p.se = binomial_stderr(p.freq, trials);
            p.pass = p.freq <= p.bound + 4.0 * p.se;
            rep.all_pass = rep.all_pass && p.pass;
            rep.points.push_back(p);
        }
    }
    return rep;
}

} // namespace gfe
