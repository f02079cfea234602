#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace gfe {

// Up-right lattice paths from (0,0) to (n,n).  A path is 2n steps, n Right
// and n Up; paths are ranked lexicographically with R before U, so rank 0
// is R...RU...U.  Edge weights live in a flat driver vector: right edges
// first (index y*n + x for the edge (x,y)->(x+1,y)), then up edges at
// offset n*(n+1) (index x*n + y for the edge (x,y)->(x,y+1)).
class PolymerLattice {
  public:
    explicit PolymerLattice(int n) : n_(n) {
        if (n < 1 || n > 33)
            throw std::invalid_argument("PolymerLattice: n must be in [1, 33] (path count must fit 64 bits)");
        const int m = 2 * n + 1;
        binom_.assign(static_cast<std::size_t>(m) * m, 0);
        for (int i = 0; i < m; ++i) {
            bin(i, 0) = 1;
            for (int j = 1; j <= i; ++j)
                bin(i, j) = bin(i - 1, j - 1) + (j <= i - 1 ? bin(i - 1, j) : 0);
        }
    }

    int n() const { return n_; }
    std::uint64_t path_count() const { return bin(2 * n_, n_); }
    std::size_t edge_count() const { return 2 * static_cast<std::size_t>(n_) * (n_ + 1); }

    std::size_t right_edge(int x, int y) const {
        return static_cast<std::size_t>(y) * n_ + x;
    }
    std::size_t up_edge(int x, int y) const {
        return static_cast<std::size_t>(n_) * (n_ + 1) + static_cast<std::size_t>(x) * n_ + y;
    }

    // Edges of a path in step order.
    std::vector<std::uint32_t> path_edges(std::uint64_t rank) const {
        check_rank(rank);
        std::vector<std::uint32_t> edges;
        edges.reserve(2 * n_);
        int x = 0, y = 0, r = n_, u = n_;
        while (r + u > 0) {
            const std::uint64_t with_r = r > 0 ? bin(r + u - 1, u) : 0;
            if (r > 0 && rank < with_r) {
                edges.push_back(static_cast<std::uint32_t>(right_edge(x, y)));
                ++x;
                --r;
            } else {
                rank -= with_r;
                edges.push_back(static_cast<std::uint32_t>(up_edge(x, y)));
                ++y;
                --u;
            }
        }
        return edges;
    }

    std::uint64_t rank_of(std::span<const std::uint32_t> edges) const {
        if (edges.size() != 2 * static_cast<std::size_t>(n_))
            throw std::invalid_argument("rank_of: wrong path length");
        std::uint64_t rank = 0;
        int r = n_, u = n_;
        const std::size_t up_base = static_cast<std::size_t>(n_) * (n_ + 1);
        for (std::uint32_t e : edges) {
            if (e >= up_base) {
                if (r > 0) rank += bin(r + u - 1, u);
                --u;
            } else {
                --r;
            }
        }
        return rank;
    }

    // Sum of edge weights in step order.
    double path_value(std::span<const double> driver, std::uint64_t rank) const {
        check_driver(driver);
        double v = 0.0;
        int x = 0, y = 0, r = n_, u = n_;
        while (r + u > 0) {
            const std::uint64_t with_r = r > 0 ? bin(r + u - 1, u) : 0;
            if (r > 0 && rank < with_r) {
                v += driver[right_edge(x, y)];
                ++x;
                --r;
            } else {
                rank -= with_r;
                v += driver[up_edge(x, y)];
                ++y;
                --u;
            }
        }
        return v;
    }

    struct Best {
        double value;
        std::uint64_t rank;
    };

    // Maximum path weight and the lowest-rank maximizer.  The value comes
    // from a forward pass whose additions happen in step order, so it is
    // bit-identical to folding the winning path's weights left to right.
    Best supremum(std::span<const double> driver) const {
        check_driver(driver);
        const int m = n_ + 1;
        std::vector<double> fwd(static_cast<std::size_t>(m) * m);
        for (int y = 0; y <= n_; ++y) {
            for (int x = 0; x <= n_; ++x) {
                if (x == 0 && y == 0) {
                    fwd[vid(x, y)] = 0.0;
                    continue;
                }
                double best = -std::numeric_limits<double>::infinity();
                if (x > 0) best = fwd[vid(x - 1, y)] + driver[right_edge(x - 1, y)];
                if (y > 0) best = std::max(best, fwd[vid(x, y - 1)] + driver[up_edge(x, y - 1)]);
                fwd[vid(x, y)] = best;
            }
        }
        // Suffix values for the forward greedy walk: taking Right whenever
        // it preserves suffix optimality yields the lexicographically
        // smallest (= lowest rank) maximizer.
        std::vector<double> suf(static_cast<std::size_t>(m) * m);
        for (int y = n_; y >= 0; --y) {
            for (int x = n_; x >= 0; --x) {
                if (x == n_ && y == n_) {
                    suf[vid(x, y)] = 0.0;
                    continue;
                }
                double best = -std::numeric_limits<double>::infinity();
                if (x < n_) best = driver[right_edge(x, y)] + suf[vid(x + 1, y)];
                if (y < n_) best = std::max(best, driver[up_edge(x, y)] + suf[vid(x, y + 1)]);
                suf[vid(x, y)] = best;
            }
        }
        std::uint64_t rank = 0;
        int x = 0, y = 0, r = n_, u = n_;
        while (r + u > 0) {
            const bool take_r =
                x < n_ && suf[vid(x, y)] == driver[right_edge(x, y)] + suf[vid(x + 1, y)];
            if (take_r) {
                ++x;
                --r;
            } else {
                if (r > 0) rank += bin(r + u - 1, u);
                ++y;
                --u;
            }
        }
        return {fwd[vid(n_, n_)], rank};
    }

    // Ranks of all paths with weight >= threshold, ascending.  Depth-first
    // in lexicographic order with suffix-bound pruning; the bound carries a
    // small slack so rounding in the suffix table can never drop a path,
    // and emitted paths are re-checked against the exact step-order sum.
    std::vector<std::uint64_t> level_set(std::span<const double> driver, double threshold,
                                         std::size_t cap) const {
        check_driver(driver);
        const int m = n_ + 1;
        std::vector<double> suf(static_cast<std::size_t>(m) * m);
        for (int y = n_; y >= 0; --y) {
            for (int x = n_; x >= 0; --x) {
                if (x == n_ && y == n_) {
                    suf[vid(x, y)] = 0.0;
                    continue;
                }
                double best = -std::numeric_limits<double>::infinity();
                if (x < n_) best = driver[right_edge(x, y)] + suf[vid(x + 1, y)];
                if (y < n_) best = std::max(best, driver[up_edge(x, y)] + suf[vid(x, y + 1)]);
                suf[vid(x, y)] = best;
            }
        }
        const double slack = 1e-9 * (1.0 + std::abs(threshold));
        std::vector<std::uint64_t> out;
        struct Frame {
            int x, y, r, u;
            double partial;
            std::uint64_t rank;
            int stage; // 0: try R, 1: try U, 2: done
        };
        std::vector<Frame> stack;
        stack.push_back({0, 0, n_, n_, 0.0, 0, 0});
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.r == 0 && f.u == 0) {
                if (f.partial >= threshold) {
                    if (out.size() >= cap)
                        throw std::runtime_error(
                            "level_set: result exceeds cap; raise the cap or the threshold");
                    out.push_back(f.rank);
                }
                stack.pop_back();
                continue;
            }
            if (f.stage == 0) {
                f.stage = 1;
                if (f.r > 0) {
                    const double v = f.partial + driver[right_edge(f.x, f.y)];
                    if (v + suf[vid(f.x + 1, f.y)] >= threshold - slack)
                        stack.push_back({f.x + 1, f.y, f.r - 1, f.u, v, f.rank, 0});
                    continue;
                }
            }
            if (f.stage == 1) {
                f.stage = 2;
                if (f.u > 0) {
                    const double v = f.partial + driver[up_edge(f.x, f.y)];
                    const std::uint64_t rank =
                        f.rank + (f.r > 0 ? bin(f.r + f.u - 1, f.u) : 0);
                    if (v + suf[vid(f.x, f.y + 1)] >= threshold - slack)
                        stack.push_back({f.x, f.y + 1, f.r, f.u - 1, v, rank, 0});
                    continue;
                }
            }
            stack.pop_back();
        }
        return out;
    }

    // Visits every path in rank order with its step-order weight sum.
    template <class Visitor>
    void enumerate_paths(std::span<const double> driver, Visitor&& visit) const {
        check_driver(driver);
        enumerate_rec(driver, 0, 0, n_, n_, 0.0, 0, visit);
    }

    // Number of edges two paths share; the covariance of their weights
    // under iid standard normal edge weights.
    int shared_edges(std::uint64_t rank_p, std::uint64_t rank_q) const {
        auto a = path_edges(rank_p);
        auto b = path_edges(rank_q);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<std::uint32_t> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        return static_cast<int>(common.size());
    }

  private:
    template <class Visitor>
    void enumerate_rec(std::span<const double> driver, int x, int y, int r, int u, double partial,
                       std::uint64_t rank, Visitor& visit) const {
        if (r == 0 && u == 0) {
            visit(rank, partial);
            return;
        }
        if (r > 0)
            enumerate_rec(driver, x + 1, y, r - 1, u, partial + driver[right_edge(x, y)], rank,
                          visit);
        if (u > 0) {
            const std::uint64_t urank = rank + (r > 0 ? bin(r + u - 1, u) : 0);
            enumerate_rec(driver, x, y + 1, r, u - 1, partial + driver[up_edge(x, y)], urank,
                          visit);
        }
    }

    std::uint64_t& bin(int i, int j) { return binom_[static_cast<std::size_t>(i) * (2 * n_ + 1) + j]; }
    std::uint64_t bin(int i, int j) const {
        if (j < 0 || j > i) return 0;
        return binom_[static_cast<std::size_t>(i) * (2 * n_ + 1) + j];
    }
    std::size_t vid(int x, int y) const { return static_cast<std::size_t>(y) * (n_ + 1) + x; }
    void check_rank(std::uint64_t rank) const {
        if (rank >= path_count()) throw std::invalid_argument("PolymerLattice: path rank out of range");
    }
    void check_driver(std::span<const double> driver) const {
        if (driver.size() != edge_count())
            throw std::invalid_argument("PolymerLattice: driver size must equal edge count");
    }

    int n_;
    std::vector<std::uint64_t> binom_;
};

} // namespace gfe
