#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace gfe {

// Quadratic spin form on n sites: the value at sigma in {-1,+1}^n is
// (1/sqrt(2n)) * sum over all ordered pairs (i,j) of sigma_i sigma_j w[i*n+j].
// Configurations are indexed by bitmask (bit i set means sigma_i = +1), so
// index 0 is all-minus.  Covariance of two configurations under iid normal
// weights is (sigma.tau)^2 / (2n).
class SpinForm {
  public:
    explicit SpinForm(int n) : n_(n) {
        if (n < 1 || n > 62) throw std::invalid_argument("SpinForm: n must be in [1, 62]");
    }

    int n() const { return n_; }
    std::size_t driver_size() const { return static_cast<std::size_t>(n_) * n_; }
    std::uint64_t config_count() const { return 1ull << n_; }

    double energy(std::span<const double> w, std::uint64_t mask) const {
        check_driver(w);
        double acc = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double si = spin(mask, i);
            double row = 0.0;
            for (int j = 0; j < n_; ++j) row += spin(mask, j) * w[idx(i, j)];
            acc += si * row;
        }
        return acc / std::sqrt(2.0 * n_);
    }

    // Overlap sigma.tau via the number of disagreeing sites.
    double overlap(std::uint64_t mask_a, std::uint64_t mask_b) const {
        const int diff = std::popcount((mask_a ^ mask_b) & mask_all());
        return static_cast<double>(n_ - 2 * diff);
    }

    double covariance(std::uint64_t mask_a, std::uint64_t mask_b) const {
        const double q = overlap(mask_a, mask_b);
        return q * q / (2.0 * n_);
    }

    // Visits every configuration once in Gray-code order, maintaining the
    // value with an O(n) update per spin flip.  The visitor receives
    // (mask, value).  Use for n up to the enumeration budget only.
    template <class Visitor>
    void sweep(std::span<const double> w, Visitor&& visit) const {
        check_driver(w);
        if (n_ > 30) throw std::invalid_argument("SpinForm::sweep: n too large to enumerate");
        const double norm = 1.0 / std::sqrt(2.0 * n_);
        std::uint64_t mask = 0; // all spins -1
        // field[b] = sum_{j != b} sigma_j (w[b][j] + w[j][b])
        std::vector<double> field(n_, 0.0);
        double raw = 0.0; // sum_ij sigma_i sigma_j w[i][j]
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) raw += spin(mask, i) * spin(mask, j) * w[idx(i, j)];
        for (int b = 0; b < n_; ++b) {
            double h = 0.0;
            for (int j = 0; j < n_; ++j)
                if (j != b) h += spin(mask, j) * (w[idx(b, j)] + w[idx(j, b)]);
            field[b] = h;
        }
        visit(mask, raw * norm);
        const std::uint64_t total = config_count();
        for (std::uint64_t k = 1; k < total; ++k) {
            const int b = std::countr_zero(k);
            const double sb = spin(mask, b);
            raw -= 2.0 * sb * field[b];
            for (int a = 0; a < n_; ++a)
                if (a != b) field[a] -= 2.0 * sb * (w[idx(a, b)] + w[idx(b, a)]);
            mask ^= (1ull << b);
            visit(mask, raw * norm);
        }
    }

    struct Best {
        double value;
        std::uint64_t mask;
    };

    // The winner is located with the running sweep value and then recomputed
    // exactly, so the result matches energy() at the returned mask bit for bit.
    Best supremum(std::span<const double> w) const {
        Best best{-std::numeric_limits<double>::infinity(), 0};
        sweep(w, [&](std::uint64_t mask, double v) {
            if (v > best.value || (v == best.value && mask < best.mask)) best = {v, mask};
        });
        best.value = energy(w, best.mask);
        return best;
    }

    // Masks with energy >= threshold, ascending.  The sweep's running value
    // carries accumulated rounding, so candidates pass through an exact
    // recomputation before they are kept.
    std::vector<std::uint64_t> level_set(std::span<const double> w, double threshold,
                                         std::size_t cap) const {
        const double slack = 1e-8 * (1.0 + std::abs(threshold));
        std::vector<std::uint64_t> out;
        sweep(w, [&](std::uint64_t mask, double v) {
            if (v >= threshold - slack && energy(w, mask) >= threshold) {
                if (out.size() >= cap)
                    throw std::runtime_error(
                        "level_set: result exceeds cap; raise the cap or the threshold");
                out.push_back(mask);
            }
        });
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    static double spin(std::uint64_t mask, int i) { return (mask >> i) & 1 ? 1.0 : -1.0; }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
    std::uint64_t mask_all() const { return (n_ == 62) ? ((1ull << 62) - 1) : ((1ull << n_) - 1); }
    void check_driver(std::span<const double> w) const {
        if (w.size() != driver_size())
            throw std::invalid_argument("SpinForm: driver size must equal n*n");
    }

    int n_;
};

} // namespace gfe
