#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mathutil.hpp"
#include "rng.hpp"

namespace gfe {

// Streaming mean/variance with an associative merge, so partial results
// from different workers combine without revisiting the data.
class Welford {
  public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    void merge(const Welford& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
        const double d = o.mean_ - mean_;
        const double nt = na + nb;
        mean_ += d * nb / nt;
        m2_ += o.m2_ + d * d * na * nb / nt;
        n_ += o.n_;
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const {
        if (n_ < 2) throw std::runtime_error("Welford: variance needs at least two samples");
        return m2_ / static_cast<double>(n_ - 1);
    }
    double stddev() const { return std::sqrt(variance()); }
    double stderr_mean() const { return std::sqrt(variance() / static_cast<double>(n_)); }

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
    double width() const { return hi - lo; }
};

// Linear-interpolation quantile of an already sorted vector.
inline double sorted_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("sorted_quantile: empty input");
    if (sorted.size() == 1) return sorted[0];
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline Interval percentile_interval(std::vector<double> stats, double confidence) {
    std::sort(stats.begin(), stats.end());
    const double a = 0.5 * (1.0 - confidence);
    return {sorted_quantile(stats, a), sorted_quantile(stats, 1.0 - a)};
}

// Visits one bootstrap resample as a nondecreasing index walk.  The k-th
// sorted order statistic of n iid uniforms is built from exponential
// spacings, so the resampled multiset is exactly the classical bootstrap
// draw while memory access stays sequential.
class ResampleWalker {
  public:
    template <class Visit>
    void walk(Rng& rng, std::size_t n, Visit&& visit) {
        spacings_.resize(n + 1);
        CompensatedSum total;
        for (std::size_t k = 0; k <= n; ++k) {
            spacings_[k] = rng.exponential();
            total.add(spacings_[k]);
        }
        const double scale = static_cast<double>(n) / total.value();
        double running = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            running += spacings_[k];
            auto idx = static_cast<std::size_t>(running * scale);
            if (idx >= n) idx = n - 1;
            visit(idx);
        }
    }

  private:
    std::vector<double> spacings_;
};

struct BootstrapOptions {
    std::size_t resamples = 1000;
    double confidence = 0.95;
};

// Percentile-bootstrap interval for an arbitrary statistic of the sample
// multiset.  `statistic` receives a walker-visited resample via a functor
// that it calls once per resample.
template <class Statistic>
Interval bootstrap_interval(std::size_t n, std::uint64_t seed, const BootstrapOptions& opt,
                            Statistic&& statistic) {
    if (n == 0) throw std::invalid_argument("bootstrap_interval: empty sample");
    std::vector<double> stats(opt.resamples);
    ResampleWalker walker;
    for (std::size_t b = 0; b < opt.resamples; ++b) {
        Rng rng(seed, streams::bootstrap(b));
        stats[b] = statistic(
            [&](auto&& visit) { walker.walk(rng, n, std::forward<decltype(visit)>(visit)); });
    }
    return percentile_interval(std::move(stats), opt.confidence);
}

struct MeanVarIntervals {
    Interval mean;
    Interval variance;
};

// Joint bootstrap of mean and variance from the same resamples.  Sums are
// taken around the full-sample mean to keep the variance update stable.
inline MeanVarIntervals bootstrap_mean_var(std::span<const double> x, std::uint64_t seed,
                                           const BootstrapOptions& opt = {}) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("bootstrap_mean_var: need at least two samples");
    double pivot = 0.0;
    for (double v : x) pivot += v;
    pivot /= static_cast<double>(n);

    std::vector<double> mean_stats(opt.resamples), var_stats(opt.resamples);
    ResampleWalker walker;
    for (std::size_t b = 0; b < opt.resamples; ++b) {
        Rng rng(seed, streams::bootstrap(b));
        double s = 0.0, s2 = 0.0;
        walker.walk(rng, n, [&](std::size_t idx) {
            const double d = x[idx] - pivot;
            s += d;
            s2 += d * d;
        });
        const double nd = static_cast<double>(n);
        mean_stats[b] = pivot + s / nd;
        var_stats[b] = (s2 - s * s / nd) / (nd - 1.0);
    }
    return {percentile_interval(std::move(mean_stats), opt.confidence),
            percentile_interval(std::move(var_stats), opt.confidence)};
}

// Standard error of an empirical frequency p_hat over n trials.
inline double binomial_stderr(double p_hat, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("binomial_stderr: zero trials");
    const double p = std::clamp(p_hat, 0.0, 1.0);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

} // namespace gfe
