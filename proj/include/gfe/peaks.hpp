#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
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

struct PeakQuery {
    double delta = 0.5;               // relative depth in (0,1]
    double eps = 0.1;                 // pairwise covariance threshold
    std::optional<double> m_ref;      // reference mean; estimated by a pilot when absent
    double zeta = 0.05;               // probability slack recorded for bound comparison
    bool normalized = false;          // interpret eps as a fraction of the max variance

    void validate() const {
        if (!(delta > 0.0 && delta <= 1.0))
            throw std::invalid_argument("PeakQuery: delta must be in (0,1]");
        if (!(eps > 0.0)) throw std::invalid_argument("PeakQuery: eps must be positive");
        if (!(zeta > 0.0 && zeta <= 1.0))
            throw std::invalid_argument("PeakQuery: zeta must be in (0,1]");
        if (m_ref && !std::isfinite(*m_ref))
            throw std::invalid_argument("PeakQuery: m_ref must be finite");
    }
    double eps_raw(const GaussianField& field) const {
        return normalized ? eps * field.max_variance() : eps;
    }
    double threshold() const {
        if (!m_ref) throw std::invalid_argument("PeakQuery: m_ref is required; set it or estimate it");
        return (1.0 - delta) * *m_ref;
    }
};

struct PeakSet {
    std::vector<std::uint64_t> indices;              // admission order (descending value)
    std::vector<double> values;
    double max_abs_cov = 0.0;                        // over admitted pairs
    std::map<std::uint64_t, std::uint64_t> witness;  // rejected candidate -> blocking index
    std::size_t size() const { return indices.size(); }
};

// Greedy maximal near-orthogonal subset of the level set at (1-delta)*m_ref.
// Candidates are visited in descending value order (ties to the lower index)
// and admitted iff their |covariance| with every admitted index stays at or
// below eps; each rejection records the first blocking index.
inline PeakSet extract_peaks(const FieldSample& fs, const PeakQuery& q,
                             std::size_t cap = default_level_set_cap) {
    q.validate();
    const GaussianField& field = fs.field;
    const double eps = q.eps_raw(field);
    const std::vector<std::uint64_t> cands = level_set(fs, q.threshold(), cap);
    std::vector<double> vals(cands.size());
    for (std::size_t k = 0; k < cands.size(); ++k) vals[k] = fs.value_of(cands[k]);

    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (vals[a] != vals[b]) return vals[a] > vals[b];
        return cands[a] < cands[b];
    });

    PeakSet out;
    for (std::size_t k : order) {
        const std::uint64_t i = cands[k];
        double worst = 0.0;
        std::optional<std::uint64_t> blocker;
        for (std::uint64_t a : out.indices) {
            const double c = std::abs(field.covariance(i, a));
            if (c > eps) {
                blocker = a;
                break;
            }
            worst = std::max(worst, c);
        }
        if (blocker) {
            out.witness.emplace(i, *blocker);
        } else {
            out.indices.push_back(i);
            out.values.push_back(vals[k]);
            out.max_abs_cov = std::max(out.max_abs_cov, worst);
        }
    }
    return out;
}

// Independent re-scan of the three PeakSet invariants: value threshold,
// pairwise covariance cap, and inclusion-maximality within the level set.
inline bool verify_peak_set(const FieldSample& fs, const PeakQuery& q, const PeakSet& ps,
                            std::size_t cap = default_level_set_cap) {
    const GaussianField& field = fs.field;
    const double eps = q.eps_raw(field);
    const double thr = q.threshold();
    for (std::size_t k = 0; k < ps.indices.size(); ++k) {
        if (!(fs.value_of(ps.indices[k]) >= thr)) return false;
        if (fs.value_of(ps.indices[k]) != ps.values[k]) return false;
    }
    for (std::size_t a = 0; a < ps.indices.size(); ++a)
        for (std::size_t b = a + 1; b < ps.indices.size(); ++b)
            if (std::abs(field.covariance(ps.indices[a], ps.indices[b])) > eps) return false;
    std::vector<std::uint64_t> in_a = ps.indices;
    std::sort(in_a.begin(), in_a.end());
    for (std::uint64_t c : level_set(fs, thr, cap)) {
        if (std::binary_search(in_a.begin(), in_a.end(), c)) continue;
        bool blocked = false;
        for (std::uint64_t a : ps.indices)
            if (std::abs(field.covariance(c, a)) > eps) {
                blocked = true;
                break;
            }
        if (!blocked) return false;
    }
    return true;
}

struct PeakEventStats {
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;   // trials with |extract_peaks| >= ell
    double freq = 0.0;
    double se = 0.0;
    Interval ci;                   // normal-approximation binomial interval
    double m_ref = 0.0;            // reference mean actually used
    double sigma_hat = 0.0;        // pilot stddev of the maximum
    std::uint64_t min_success_size = 0;
    double fitted_c1 = 0.0;        // probability-side constant of the event bound
    double fitted_c2 = 0.0;        // size-side constant of the cardinality bound
    double bound = 0.0;            // exp(fitted_c2 * eps^2 delta zeta / (m sigma_hat^2 sigma^2))
};

namespace detail {

inline Interval binomial_interval(double freq, std::uint64_t trials, double confidence = 0.95) {
    const double z = normal_upper_quantile((1.0 - confidence) / 2.0);
    const double half = z * binomial_stderr(freq, trials);
    return {std::max(0.0, freq - half), std::min(1.0, freq + half)};
}

inline void fit_peak_constants(PeakEventStats& st, const PeakQuery& q, double max_variance) {
    const double m = st.m_ref;
    const double var = st.sigma_hat * st.sigma_hat;
    if (m > 0.0 && var > 0.0)
        st.fitted_c1 = std::max(0.0, 1.0 - st.freq - q.zeta) * m * m * q.delta * q.delta / var;
    const double unit = q.eps * q.eps * q.delta * q.zeta / (m * var * max_variance);
    if (st.successes > 0 && std::isfinite(unit) && unit > 0.0) {
        st.fitted_c2 = std::log(static_cast<double>(st.min_success_size)) / unit;
        st.bound = std::exp(st.fitted_c2 * unit);
    } else {
        st.bound = std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace detail

// Monte Carlo frequency of {|extract_peaks| >= ell}.  When the query does
// not pin m_ref, a pilot run on the pilot streams estimates it once; the
// pilot also supplies sigma_hat for the reported fitted constants.
inline PeakEventStats estimate_peak_event(const GaussianField& field, PeakQuery query,
                                          std::uint64_t ell, std::uint64_t trials,
                                          std::uint64_t seed, unsigned workers = 1,
                                          std::uint64_t pilot_trials = 10'000,
                                          std::size_t cap = default_level_set_cap) {
    query.validate();
    if (ell == 0) throw std::invalid_argument("estimate_peak_event: ell must be positive");
    PeakEventStats st;
    {
        const SupremumStats pilot =
            estimate_sup_stats(field, pilot_trials, seed, workers, {}, streams::pilot);
        if (!query.m_ref) query.m_ref = pilot.m_hat;
        st.m_ref = *query.m_ref;
        st.sigma_hat = pilot.sigma_hat();
    }
    std::vector<std::uint64_t> sizes =
        map_trials<std::uint64_t>(trials, workers, [&](std::uint64_t t) {
            return extract_peaks(sample(field, seed, streams::trial(t)), query, cap).size();
        });
    st.trials = trials;
    std::uint64_t min_size = std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t s : sizes) {
        if (s >= ell) {
            ++st.successes;
            min_size = std::min(min_size, s);
        }
    }
    st.freq = static_cast<double>(st.successes) / static_cast<double>(trials);
    st.se = binomial_stderr(st.freq, trials);
    st.ci = detail::binomial_interval(st.freq, trials);
    if (st.successes > 0) st.min_success_size = min_size;
    detail::fit_peak_constants(st, query, field.max_variance());
    return st;
}

struct NearOrthogonalSetReport {
    bool applicable = true;
    std::string reason;        // set when not applicable
    double out_fraction = 0.0; // empirical P(M outside [r,s]) over the batch
    double eps = 0.0;
    double r = 0.0;
    double s = 0.0;
    std::size_t set_size = 0;  // maximal pairwise-|cov|<=eps subset of all indices
    double bound = 0.0;        // exp(eps^2 / (32 (s-r)^2))
    bool pass = false;
};

// Cardinality bound for a maximal pairwise near-orthogonal index set, valid
// when the maximum concentrates in a short interval: if the batch puts M in
// [r,s] at least 3/4 of the time and s-r <= eps/8, the maximal set must
// have at least exp(eps^2/(32(s-r)^2)) elements.  The set itself depends
// only on the covariance structure; the batch only gates applicability.
inline NearOrthogonalSetReport check_lemma22_bound(const GaussianField& field,
                                                   std::span<const FieldSample> batch,
                                                   double eps, double r, double s) {
    if (!(eps > 0.0)) throw std::invalid_argument("check_lemma22_bound: eps must be positive");
    if (!(s > r)) throw std::invalid_argument("check_lemma22_bound: need r < s");
    if (batch.empty()) throw std::invalid_argument("check_lemma22_bound: empty sample batch");
    if (field.size() > default_enum_cap)
        throw std::invalid_argument("check_lemma22_bound: index set too large to scan");

    NearOrthogonalSetReport rep;
    rep.eps = eps;
    rep.r = r;
    rep.s = s;
    std::uint64_t out = 0;
    for (const FieldSample& fs : batch) {
        const double m = supremum(fs).value;
        if (m < r || m > s) ++out;
    }
    rep.out_fraction = static_cast<double>(out) / static_cast<double>(batch.size());
    if (rep.out_fraction >= 0.25) {
        rep.applicable = false;
        rep.reason = "not applicable: empirical P(M outside [r,s]) is not below 1/4";
        return rep;
    }
    if (s - r > eps / 8.0) {
        rep.applicable = false;
        rep.reason = "not applicable: interval longer than eps/8";
        return rep;
    }

    // Greedy over the full index set in index order; the outcome depends
    // only on covariances, so any sample-value ordering is unnecessary.
    std::vector<std::uint64_t> admitted;
    for (std::uint64_t i = 0; i < field.size(); ++i) {
        bool ok = true;
        for (std::uint64_t a : admitted)
            if (std::abs(field.covariance(i, a)) > eps) {
                ok = false;
                break;
            }
        if (ok) admitted.push_back(i);
    }
    rep.set_size = admitted.size();
    const double gap = s - r;
    rep.bound = std::exp(eps * eps / (32.0 * gap * gap));
    rep.pass = static_cast<double>(rep.set_size) >= rep.bound;
    return rep;
}

struct ArgmaxStabilityReport {
    double delta = 0.0;
    double alpha = 0.0;      // coupling weight 1 - delta/4
    std::uint64_t trials = 0;
    double m_hat = 0.0;
    double var_hat = 0.0;
    double freq = 0.0;       // P(X' at argmax of X >= (1-delta) m_hat)
    double se = 0.0;
    Interval ci;
    double fitted_c = 0.0;   // (1-freq) m_hat^2 delta^2 / var_hat
    double defect = 0.0;     // fitted_c * var_hat / (m_hat^2 delta^2) = 1 - freq
};

// Under the coupling X = alpha X' + sqrt(1-alpha^2) X'' with alpha = 1-delta/4,
// the first copy evaluated at the argmax of the mixture should still be a
// near-peak: estimate P(X'_{i(X)} >= (1-delta) m_hat).
inline ArgmaxStabilityReport check_corollary25(const GaussianField& field, double delta,
                                               std::uint64_t trials, std::uint64_t seed,
                                               unsigned workers = 1,
                                               std::uint64_t pilot_trials = 10'000) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("check_corollary25: delta must be in (0,1]");
    ArgmaxStabilityReport rep;
    rep.delta = delta;
    rep.alpha = 1.0 - delta / 4.0;
    rep.trials = trials;
    const SupremumStats pilot =
        estimate_sup_stats(field, pilot_trials, seed, workers, {}, streams::pilot);
    rep.m_hat = pilot.m_hat;
    rep.var_hat = pilot.var_hat;
    const double thr = (1.0 - delta) * rep.m_hat;

    std::vector<char> hit = map_trials<char>(trials, workers, [&](std::uint64_t t) {
        const CoupledTriple c = couple_decompose(field, rep.alpha, seed, streams::trial(t));
        const Extreme e = supremum(c.x);
        return static_cast<char>(c.x_prime.value_of(e.index) >= thr);
    });
    std::uint64_t successes = 0;
    for (char h : hit) successes += h;
    rep.freq = static_cast<double>(successes) / static_cast<double>(trials);
    rep.se = binomial_stderr(rep.freq, trials);
    rep.ci = detail::binomial_interval(rep.freq, trials);
    if (rep.m_hat != 0.0 && rep.var_hat > 0.0) {
        rep.fitted_c = (1.0 - rep.freq) * rep.m_hat * rep.m_hat * delta * delta / rep.var_hat;
        rep.defect = rep.fitted_c * rep.var_hat / (rep.m_hat * rep.m_hat * delta * delta);
    } else {
        rep.defect = 1.0 - rep.freq;
    }
    return rep;
}

} // namespace gfe
