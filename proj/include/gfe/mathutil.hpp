#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

namespace gfe {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779;
inline constexpr double sqrt2 = std::numbers::sqrt2;

inline double normal_pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / sqrt2); }

// P(Z >= x), accurate far into the tail.
inline double normal_tail(double x) { return 0.5 * std::erfc(x / sqrt2); }

// log P(Z >= x) without underflow for large x (asymptotic series past the
// range where erfc is representable).
inline double log_normal_tail(double x) {
    if (x < 30.0) {
        const double t = normal_tail(x);
        if (t > 0.0) return std::log(t);
    }
    const double x2 = x * x;
    // phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6)
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

// z such that P(Z >= z) = q, for q in (0,1).  Hastings seed plus three
// Newton corrections lands within a few ulp over the whole range.
inline double normal_upper_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("normal_upper_quantile: q outside (0,1)");
    if (q > 0.5) return -normal_upper_quantile(1.0 - q);
    const double t = std::sqrt(-2.0 * std::log(q));
    double z = t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                       (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
    for (int i = 0; i < 3; ++i) {
        const double err = normal_tail(z) - q;
        z += err / normal_pdf(z);
    }
    return z;
}

inline double normal_quantile(double p) { return normal_upper_quantile(1.0 - p); }

// Sampled max of n iid standard normals via the quantile of a single
// uniform: F_max(x) = Phi(x)^n, so x = Qbar(-expm1(log(u)/n)) for u~U(0,1].
// Exact in distribution, O(1) regardless of n.
inline double max_of_iid_normals_quantile(double u, double n) {
    // tail mass q solves (1-q)^n = u
    const double q = -std::expm1(std::log(u) / n);
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    return normal_upper_quantile(q);
}

inline double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs)
        if (x > m) m = x;
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

// Neumaier variant of Kahan summation: order-insensitive to ~1 ulp.
class CompensatedSum {
  public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    void merge(const CompensatedSum& other) {
        add(other.sum_);
        comp_ += other.comp_;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

namespace detail {

template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) throw std::runtime_error("adaptive_simpson: tolerance not reached at max depth");
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Adaptive Simpson quadrature with absolute tolerance; throws if the
// requested tolerance is unreachable within the recursion budget.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol, int max_depth = 48) {
    if (!(b > a)) throw std::invalid_argument("adaptive_simpson: empty interval");
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

// E[max of n iid standard normals], by quadrature of x n phi(x) Phi(x)^{n-1}.
// The truncation range carries less mass than the quadrature tolerance.
inline double exact_mean_max_iid_normals(double n) {
    if (!(n >= 1.0)) throw std::invalid_argument("exact_mean_max_iid_normals: n must be at least 1");
    auto integrand = [n](double x) {
        // far left the tail rounds to 1 and log1p(-1) is -inf; with n = 1 the
        // zero weight must win over that infinity
        const double shape = n == 1.0 ? 0.0 : (n - 1.0) * std::log1p(-normal_tail(x));
        const double log_density =
            std::log(n) - 0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + shape;
        return x * std::exp(log_density);
    };
    const double hi = std::sqrt(2.0 * std::log(std::max(n, 2.0))) + 9.0;
    return adaptive_simpson(integrand, -9.0, hi, 1e-11);
}

} // namespace gfe
