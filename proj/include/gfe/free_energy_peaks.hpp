#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "extremes.hpp"
#include "field.hpp"
#include "parallel.hpp"
#include "peaks.hpp"
#include "stats.hpp"

namespace gfe {

struct FreeEnergyCurve {
    std::vector<double> betas;
    std::vector<FreeEnergyStats> stats;
    std::vector<double> sigma_tilde;   // per-beta upper bound on sqrt(Var F)
    bool sigma_tilde_supplied = false;
};

// Mean/variance of F_beta on an ascending grid, with one shared driver per
// trial across the whole grid so the curve is smooth in beta.
inline FreeEnergyCurve estimate_fe_curve(const GaussianField& field, std::span<const double> betas,
                                         std::uint64_t trials, std::uint64_t seed,
                                         unsigned workers = 1, const BootstrapOptions& boot = {},
                                         std::span<const double> sigma_tilde = {},
                                         std::uint64_t enum_cap = default_enum_cap) {
    if (betas.empty()) throw std::invalid_argument("estimate_fe_curve: empty beta grid");
    for (std::size_t k = 0; k < betas.size(); ++k) {
        if (!(betas[k] > 0.0))
            throw std::invalid_argument("estimate_fe_curve: betas must be positive");
        if (k > 0 && !(betas[k] > betas[k - 1]))
            throw std::invalid_argument("estimate_fe_curve: beta grid must be strictly ascending");
    }
    if (trials < 2) throw std::invalid_argument("estimate_fe_curve: need at least two trials");
    if (!sigma_tilde.empty() && sigma_tilde.size() != betas.size())
        throw std::invalid_argument("estimate_fe_curve: sigma_tilde length must match the grid");

    std::vector<std::vector<double>> rows =
        map_trials<std::vector<double>>(trials, workers, [&](std::uint64_t t) {
            const FieldSample fs = sample(field, seed, streams::trial(t));
            std::vector<double> row(betas.size());
            for (std::size_t k = 0; k < betas.size(); ++k)
                row[k] = free_energy(fs, betas[k], enum_cap);
            return row;
        });

    FreeEnergyCurve curve;
    curve.betas.assign(betas.begin(), betas.end());
    curve.sigma_tilde_supplied = !sigma_tilde.empty();
    std::vector<double> col(trials);
    for (std::size_t k = 0; k < betas.size(); ++k) {
        for (std::uint64_t t = 0; t < trials; ++t) col[t] = rows[t][k];
        Welford w;
        for (double v : col) w.add(v);
        const MeanVarIntervals ci = bootstrap_mean_var(col, seed, boot);
        FreeEnergyStats st;
        st.beta = betas[k];
        st.trials = trials;
        st.f_hat = w.mean();
        st.f_ci = ci.mean;
        st.var_hat = w.variance();
        st.var_ci = ci.variance;
        curve.stats.push_back(st);
        curve.sigma_tilde.push_back(curve.sigma_tilde_supplied ? sigma_tilde[k]
                                                               : 1.2 * std::sqrt(st.var_hat));
    }
    return curve;
}

// Soft maximum over a subset of indices; the empty set has no mass, so its
// free energy is -infinity.
inline double free_energy_over(const FieldSample& fs, std::span<const std::uint64_t> indices,
                               double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("free_energy_over: beta must be positive");
    if (indices.empty()) return -std::numeric_limits<double>::infinity();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::uint64_t i : indices) peak = std::max(peak, fs.value_of(i));
    CompensatedSum acc;
    for (std::uint64_t i : indices) acc.add(std::exp(beta * (fs.value_of(i) - peak)));
    return peak + std::log(std::max(acc.value(), 1.0)) / beta;
}

struct FeContributionReport {
    double delta = 0.0;
    double beta = 0.0;
    double m_hat = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t left_failures = 0;   // F(X) < F(X restricted); must stay zero
    std::uint64_t right_failures = 0;  // F(X restricted) < F(X) - 1/beta, empty sets included
    std::uint64_t empty_sets = 0;      // trials whose near-peak set was empty
    double fail_freq = 0.0;            // right failures / trials
    double se = 0.0;
    Interval ci;
    double fitted_c = 0.0;             // fail_freq * delta^2 m_hat^2
};

// Sandwich check for the free energy restricted to the near-peak set of an
// independent copy: with X = alpha X' + sqrt(1-alpha^2) X'', alpha = 1-delta/4,
// and U' = {i : X'_i >= (1-delta) m_hat}, the restriction can only lose
// (monotonicity), and should rarely lose more than 1/beta.
inline FeContributionReport check_fe_contribution(const GaussianField& field, double delta,
                                                  double beta, std::uint64_t trials,
                                                  std::uint64_t seed, unsigned workers = 1,
                                                  double hyp_c = 1.0,
                                                  std::uint64_t pilot_trials = 10'000,
                                                  std::size_t cap = default_level_set_cap,
                                                  std::uint64_t enum_cap = default_enum_cap) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("check_fe_contribution: delta must be in (0,1]");
    if (!(beta > 0.0)) throw std::invalid_argument("check_fe_contribution: beta must be positive");

    FeContributionReport rep;
    rep.delta = delta;
    rep.beta = beta;
    rep.trials = trials;
    const SupremumStats pilot =
        estimate_sup_stats(field, pilot_trials, seed, workers, {}, streams::pilot);
    rep.m_hat = pilot.m_hat;
    const double logn = std::log(static_cast<double>(field.size()));
    if (logn > 0.0) {
        if (!(rep.m_hat > 0.0))
            throw std::invalid_argument(
                "check_fe_contribution: the hypothesis needs a positive estimated mean");
        const double floor_beta = hyp_c * logn / (delta * rep.m_hat);
        if (!(beta > floor_beta))
            throw std::invalid_argument(
                "check_fe_contribution: beta must exceed hyp_c*log(N)/(delta*m_hat)");
    }

    const double alpha = 1.0 - delta / 4.0;
    const double thr = (1.0 - delta) * rep.m_hat;
    std::vector<std::array<std::uint8_t, 3>> flags =
        map_trials<std::array<std::uint8_t, 3>>(trials, workers, [&](std::uint64_t t) {
            const CoupledTriple c = couple_decompose(field, alpha, seed, streams::trial(t));
            const std::vector<std::uint64_t> restricted = level_set(c.x_prime, thr, cap);
            std::array<std::uint8_t, 3> f{0, 0, 0}; // left fail, right fail, empty
            if (restricted.empty()) {
                f[1] = 1;
                f[2] = 1;
                return f;
            }
            const double f_full = free_energy(c.x, beta, enum_cap);
            const double f_sub = free_energy_over(c.x, restricted, beta);
            const double slack = 1e-9 * (1.0 + std::abs(f_full));
            if (f_sub > f_full + slack) f[0] = 1;
            if (f_sub < f_full - 1.0 / beta) f[1] = 1;
            return f;
        });
    for (const auto& f : flags) {
        rep.left_failures += f[0];
        rep.right_failures += f[1];
        rep.empty_sets += f[2];
    }
    rep.fail_freq = static_cast<double>(rep.right_failures) / static_cast<double>(trials);
    rep.se = binomial_stderr(rep.fail_freq, trials);
    rep.ci = detail::binomial_interval(rep.fail_freq, trials);
    rep.fitted_c = rep.fail_freq * delta * delta * rep.m_hat * rep.m_hat;
    return rep;
}

struct FePeakEventStats {
    PeakEventStats base;
    double beta = 0.0;
    double sigma_tilde = 0.0;
    double fitted_c2 = 0.0;   // probability-side constant of 1 - C2/(m^2 delta^2) - zeta
    double fitted_c3 = 0.0;   // cardinality-side constant
    double fe_bound = 0.0;    // exp(fitted_c3 * eps^2 delta zeta / sigma_tilde^2)
};

struct BetaChoice {
    double beta = 0.0;
    double sigma_tilde = 0.0;
    double m_hat = 0.0;
    int iterations = 0;
};

namespace detail {

inline double fe_stddev_pilot(const GaussianField& field, double beta, std::uint64_t pilot_trials,
                              std::uint64_t seed, unsigned workers, std::uint64_t enum_cap) {
    std::vector<double> vals = map_trials<double>(pilot_trials, workers, [&](std::uint64_t t) {
        return free_energy(sample(field, seed, streams::pilot(t)), beta, enum_cap);
    });
    Welford w;
    for (double v : vals) w.add(v);
    return std::sqrt(w.variance());
}

struct BetaHypothesis {
    double branch_log = 0.0;      // log N / (delta m)
    double branch_inv = 0.0;      // 1 / sigma_tilde
    double branch_eps = 0.0;      // delta eps^2 / sigma_tilde^3
    double required(double mult) const {
        return mult * std::max({branch_log, branch_inv, branch_eps});
    }
    const char* binding() const {
        if (branch_log >= branch_inv && branch_log >= branch_eps) return "log N/(delta*m_hat)";
        if (branch_inv >= branch_eps) return "1/sigma_tilde";
        return "delta*eps^2/sigma_tilde^3";
    }
};

inline BetaHypothesis beta_hypothesis(const GaussianField& field, const PeakQuery& q, double m_hat,
                                      double sigma_tilde) {
    if (!(sigma_tilde > 0.0))
        throw std::invalid_argument("beta hypothesis: sigma_tilde must be positive");
    BetaHypothesis h;
    const double logn = std::log(static_cast<double>(field.size()));
    if (logn > 0.0) {
        if (!(m_hat > 0.0))
            throw std::invalid_argument("beta hypothesis: needs a positive estimated mean");
        h.branch_log = logn / (q.delta * m_hat);
    }
    h.branch_inv = 1.0 / sigma_tilde;
    const double eps = q.eps_raw(field);
    h.branch_eps = q.delta * eps * eps / (sigma_tilde * sigma_tilde * sigma_tilde);
    return h;
}

} // namespace detail

// Resolve the self-referential requirement "beta large enough relative to
// sigma_tilde(beta)" by iterating on the empirical curve: start from the
// variance of the maximum (the large-beta limit) and re-estimate at each
// proposed beta until the proposal stabilizes.
inline BetaChoice choose_beta_fe(const GaussianField& field, const PeakQuery& query,
                                 std::uint64_t seed, unsigned workers = 1, double hyp_mult = 1.0,
                                 std::uint64_t pilot_trials = 2'000,
                                 std::uint64_t enum_cap = default_enum_cap) {
    query.validate();
    BetaChoice out;
    const SupremumStats pilot =
        estimate_sup_stats(field, pilot_trials, seed, workers, {}, streams::pilot);
    out.m_hat = pilot.m_hat;
    double sigma = 1.2 * pilot.sigma_hat();
    if (!(sigma > 0.0))
        throw std::invalid_argument("choose_beta_fe: degenerate field, Var M is zero");
    double beta = 0.0;
    for (int iter = 1; iter <= 10; ++iter) {
        out.iterations = iter;
        beta = detail::beta_hypothesis(field, query, out.m_hat, sigma).required(hyp_mult);
        beta = std::max(beta, 1e-6);
        const double fresh = 1.2 * detail::fe_stddev_pilot(field, beta, pilot_trials, seed,
                                                           workers, enum_cap);
        const bool settled = std::abs(fresh - sigma) <= 0.01 * sigma;
        sigma = fresh;
        if (settled) break;
    }
    // a margin over the requirement at the final sigma keeps the chosen
    // point valid under re-estimation noise
    out.beta = 1.05 * detail::beta_hypothesis(field, query, out.m_hat, sigma).required(hyp_mult);
    out.sigma_tilde = sigma;
    return out;
}

// The same near-orthogonal-peaks event as estimate_peak_event, run at an
// inverse temperature that satisfies the free-energy hypothesis, and logged
// against the sigma_tilde-scaled cardinality bound.
inline FePeakEventStats estimate_peak_event_fe(const GaussianField& field, PeakQuery query,
                                               std::uint64_t ell, double beta,
                                               std::uint64_t trials, std::uint64_t seed,
                                               unsigned workers = 1, double hyp_mult = 1.0,
                                               std::optional<double> sigma_tilde = {},
                                               std::uint64_t pilot_trials = 10'000,
                                               std::size_t cap = default_level_set_cap,
                                               std::uint64_t enum_cap = default_enum_cap) {
    query.validate();
    if (!(beta > 0.0))
        throw std::invalid_argument("estimate_peak_event_fe: beta must be positive");
    if (ell == 0) throw std::invalid_argument("estimate_peak_event_fe: ell must be positive");

    FePeakEventStats out;
    out.beta = beta;
    const SupremumStats pilot =
        estimate_sup_stats(field, pilot_trials, seed, workers, {}, streams::pilot);
    if (!query.m_ref) query.m_ref = pilot.m_hat;
    out.sigma_tilde = sigma_tilde
                          ? *sigma_tilde
                          : 1.2 * detail::fe_stddev_pilot(field, beta, pilot_trials, seed,
                                                          workers, enum_cap);
    const detail::BetaHypothesis hyp =
        detail::beta_hypothesis(field, query, pilot.m_hat, out.sigma_tilde);
    if (beta < hyp.required(hyp_mult))
        throw std::invalid_argument(
            std::string("estimate_peak_event_fe: beta below the hypothesis; binding branch is ") +
            hyp.binding());

    out.base = estimate_peak_event(field, query, ell, trials, seed, workers, pilot_trials, cap);
    const double m = pilot.m_hat;
    if (m != 0.0)
        out.fitted_c2 =
            std::max(0.0, 1.0 - out.base.freq - query.zeta) * m * m * query.delta * query.delta;
    const double eps = query.eps_raw(field);
    const double unit = eps * eps * query.delta * query.zeta / (out.sigma_tilde * out.sigma_tilde);
    if (out.base.successes > 0 && std::isfinite(unit) && unit > 0.0) {
        out.fitted_c3 = std::log(static_cast<double>(out.base.min_success_size)) / unit;
        out.fe_bound = std::exp(out.fitted_c3 * unit);
    } else {
        out.fe_bound = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

} // namespace gfe
