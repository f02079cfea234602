#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "extremes.hpp"
#include "field.hpp"
#include "mathutil.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace gfe {

// The split estimator is the production choice (exactly unbiased); the
// naive squared-norm form is kept so its O(1/M) upward bias can be
// demonstrated against the split form in tests.
enum class VEstimator { split, naive };

// Grid on [0, 1-eta] refined toward both ends, where the conditional
// variance moves fastest for high-expectation fields.
inline std::vector<double> doob_grid(std::size_t nodes = 64, double eta = 1e-3) {
    if (nodes < 2) throw std::invalid_argument("doob_grid: need at least two nodes");
    if (!(eta > 0.0 && eta <= 0.1))
        throw std::invalid_argument("doob_grid: eta must be in (0, 0.1]");
    std::vector<double> grid(nodes);
    const double span = 1.0 - eta;
    for (std::size_t k = 0; k < nodes; ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(nodes - 1);
        grid[k] = span * 0.5 * (1.0 + std::sin(std::numbers::pi * (u - 0.5)));
    }
    grid.front() = 0.0;
    grid.back() = span;
    return grid;
}

struct DoobNode {
    double t = 0.0;
    std::vector<double> b;          // driver position B_t
    double f_at_b = 0.0;            // f(B_t)
    double s_hat = 0.0;             // inner-MC estimate of E[f(B_1) | F_t]
    double v_hat = 0.0;             // split estimate of |E[Y g_t(Y)]|^2
    double v_stderr = 0.0;          // batch-based standard error of v_hat
    std::uint64_t inner_samples = 0;
};

struct MartingalePath {
    std::vector<DoobNode> nodes;
    double eta = 1e-3;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
};

namespace detail {

// Scores s*(<v_i, x> + mu_i) for an explicit factor; the shifted form
// max_i(base_i + c*<v_i, y>) is the hot path of the inner loop.
struct ExplicitScorer {
    const ExplicitData* e;
    double scale;
    std::uint64_t n;

    explicit ExplicitScorer(const GaussianField& f)
        : e(&f.explicit_data()), scale(f.value_scale()), n(f.size()) {}

    void base_scores(std::span<const double> x, std::vector<double>& out) const {
        out.resize(n);
        if (!e->axes.empty()) {
            for (std::uint64_t i = 0; i < n; ++i) out[i] = scale * x[e->axes[i]];
        } else {
            for (std::uint64_t i = 0; i < n; ++i) {
                const double* row = e->rows.data() + i * e->dim;
                double acc = 0.0;
                for (std::size_t k = 0; k < e->dim; ++k) acc += row[k] * x[k];
                out[i] = scale * acc;
            }
        }
        if (!e->means.empty())
            for (std::uint64_t i = 0; i < n; ++i) out[i] += scale * e->means[i];
    }

    double max_shifted(std::span<const double> base, std::span<const double> y, double c) const {
        double best = -std::numeric_limits<double>::infinity();
        if (!e->axes.empty()) {
            for (std::uint64_t i = 0; i < n; ++i)
                best = std::max(best, base[i] + c * scale * y[e->axes[i]]);
        } else {
            for (std::uint64_t i = 0; i < n; ++i) {
                const double* row = e->rows.data() + i * e->dim;
                double acc = 0.0;
                for (std::size_t k = 0; k < e->dim; ++k) acc += row[k] * y[k];
                best = std::max(best, base[i] + c * scale * acc);
            }
        }
        return best;
    }
};

} // namespace detail

// One Brownian path on the grid with per-node inner Monte Carlo for the
// conditional mean S_t and the variance density V_t.  The inner draws for
// node k of path p come from stream inner(p*grid_size + k), so nodes and
// paths never share randomness.
inline MartingalePath simulate_doob_path(const GaussianField& field, std::span<const double> grid,
                                         std::uint64_t inner_samples, std::uint64_t seed,
                                         std::uint64_t path_index = 0, double eta = 1e-3,
                                         VEstimator estimator = VEstimator::split) {
    if (field.kind() != FieldKind::explicit_factor)
        throw std::invalid_argument("simulate_doob_path: field must have an explicit factor");
    if (field.max_variance() > 1.0 + 1e-9)
        throw std::invalid_argument("simulate_doob_path: factor rows must have norm at most 1");
    if (!(eta > 0.0 && eta <= 0.1))
        throw std::invalid_argument("simulate_doob_path: eta must be in (0, 0.1]");
    if (grid.empty() || grid.front() != 0.0)
        throw std::invalid_argument("simulate_doob_path: grid must start at 0");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1]))
            throw std::invalid_argument("simulate_doob_path: grid must be strictly ascending");
    if (grid.back() > 1.0 - eta + 1e-12)
        throw std::invalid_argument("simulate_doob_path: grid must stay at or below 1 - eta");
    if (inner_samples < 16 || inner_samples % 16 != 0)
        throw std::invalid_argument("simulate_doob_path: inner_samples must be a multiple of 16");

    const detail::ExplicitScorer scorer(field);
    const std::size_t d = field.explicit_data().dim;
    constexpr std::size_t n_batches = 8;
    const std::uint64_t half = inner_samples / 2;
    const std::uint64_t batch_sz = half / n_batches;

    Rng driver_rng(seed, streams::trial(path_index));
    MartingalePath path;
    path.eta = eta;
    path.seed = seed;
    path.path_index = path_index;
    path.nodes.reserve(grid.size());

    std::vector<double> b(d, 0.0);
    std::vector<double> base;
    std::vector<double> y(d);
    std::vector<double> acc(2 * n_batches * d);
    double prev_t = 0.0;

    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        if (t > prev_t) {
            const double r = std::sqrt(t - prev_t);
            for (std::size_t j = 0; j < d; ++j) b[j] += r * driver_rng.normal();
        }
        prev_t = t;
        const double root = std::sqrt(1.0 - t);
        scorer.base_scores(b, base);
        const double fb = *std::max_element(base.begin(), base.end());

        Rng inner_rng(seed, streams::inner(path_index * grid.size() + k));
        std::fill(acc.begin(), acc.end(), 0.0);
        CompensatedSum gsum;
        for (std::uint64_t m = 0; m < inner_samples; ++m) {
            for (std::size_t j = 0; j < d; ++j) y[j] = inner_rng.normal();
            const double g = (scorer.max_shifted(base, y, root) - fb) / root;
            gsum.add(g);
            const std::size_t slot =
                (m < half ? 0 : n_batches) + static_cast<std::size_t>((m % half) / batch_sz);
            double* a = acc.data() + slot * d;
            for (std::size_t j = 0; j < d; ++j) a[j] += y[j] * g;
        }

        std::vector<double> h1(d, 0.0), h2(d, 0.0);
        for (std::size_t bi = 0; bi < n_batches; ++bi)
            for (std::size_t j = 0; j < d; ++j) {
                h1[j] += acc[bi * d + j];
                h2[j] += acc[(n_batches + bi) * d + j];
            }
        double v_split = 0.0;
        for (std::size_t j = 0; j < d; ++j) v_split += h1[j] * h2[j];
        v_split /= static_cast<double>(half) * static_cast<double>(half);

        Welford batch_w;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            double p = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                p += acc[bi * d + j] * acc[(n_batches + bi) * d + j];
            batch_w.add(p / (static_cast<double>(batch_sz) * static_cast<double>(batch_sz)));
        }

        DoobNode node;
        node.t = t;
        node.b = b;
        node.f_at_b = fb;
        node.s_hat = fb + root * (gsum.value() / static_cast<double>(inner_samples));
        if (estimator == VEstimator::split) {
            node.v_hat = v_split;
        } else {
            double v_naive = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double mj = (h1[j] + h2[j]) / static_cast<double>(inner_samples);
                v_naive += mj * mj;
            }
            node.v_hat = v_naive;
        }
        node.v_stderr = std::sqrt(batch_w.variance() / static_cast<double>(n_batches));
        node.inner_samples = inner_samples;
        path.nodes.push_back(std::move(node));
    }
    return path;
}

struct QuadraticVariation {
    double qv = 0.0;
    double remainder_bound = 0.0; // length of the unintegrated tail; V <= 1 there
    double estimate() const { return qv + remainder_bound; }
};

inline QuadraticVariation quadratic_variation(const MartingalePath& path) {
    if (path.nodes.size() < 2)
        throw std::invalid_argument("quadratic_variation: need at least two nodes");
    double acc = 0.0;
    for (std::size_t k = 1; k < path.nodes.size(); ++k)
        acc += 0.5 * (path.nodes[k].v_hat + path.nodes[k - 1].v_hat) *
               (path.nodes[k].t - path.nodes[k - 1].t);
    // the integral is nonnegative; an unbiased node estimate can dip below
    // zero by noise, so the estimate is floored rather than propagated
    return {std::max(0.0, acc), 1.0 - path.nodes.back().t};
}

struct EventReport {
    std::uint64_t paths = 0;
    double eps = 0.0;
    double delta = 0.0;
    double alpha = 0.0;
    std::size_t nodes_used = 0;     // grid nodes with t <= delta
    double freq_e1 = 0.0;           // V_hat <= 1 - eps on [0, delta]
    double freq_e2 = 0.0;           // f(B_t) <= (alpha/2) sqrt(log N) on [0, delta]
    double freq_e2_not_e1 = 0.0;
    double reference = 0.0;         // N^{-alpha^2/32}
    double fitted_c = 0.0;          // freq(E2 \ E1) / reference
};

// Frequencies of the variance-stays-low event E1 and the path-stays-low
// event E2 over a batch of simulated paths, against the N^{-alpha^2/32}
// reference shape.
inline EventReport check_events(std::span<const MartingalePath> paths, const GaussianField& field,
                                double eps, double delta, double alpha, double m_hat) {
    if (paths.empty()) throw std::invalid_argument("check_events: empty path batch");
    if (!(eps > 0.0)) throw std::invalid_argument("check_events: eps must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("check_events: delta must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("check_events: alpha must be positive");
    const double logn = std::log(static_cast<double>(field.size()));
    if (!(m_hat >= alpha * std::sqrt(logn)))
        throw std::invalid_argument("check_events: m_hat must be at least alpha*sqrt(log N)");

    EventReport rep;
    rep.paths = paths.size();
    rep.eps = eps;
    rep.delta = delta;
    rep.alpha = alpha;
    const double f_cap = 0.5 * alpha * std::sqrt(logn);
    std::uint64_t c1 = 0, c2 = 0, c21 = 0;
    for (const MartingalePath& p : paths) {
        bool e1 = true, e2 = true;
        std::size_t used = 0;
        for (const DoobNode& node : p.nodes) {
            if (node.t > delta) break;
            ++used;
            if (node.v_hat > 1.0 - eps) e1 = false;
            if (node.f_at_b > f_cap) e2 = false;
        }
        if (used == 0)
            throw std::invalid_argument("check_events: no grid nodes at or below delta");
        rep.nodes_used = used;
        c1 += e1;
        c2 += e2;
        c21 += (e2 && !e1);
    }
    const double n_paths = static_cast<double>(paths.size());
    rep.freq_e1 = static_cast<double>(c1) / n_paths;
    rep.freq_e2 = static_cast<double>(c2) / n_paths;
    rep.freq_e2_not_e1 = static_cast<double>(c21) / n_paths;
    rep.reference =
        std::pow(static_cast<double>(field.size()), -alpha * alpha / 32.0);
    rep.fitted_c = rep.freq_e2_not_e1 / rep.reference;
    return rep;
}

// P(max_i (Z + Z_i) >= x) for the shifted family, by conditioning on the
// shared part and integrating the max-of-iid tail against its density.
inline double exact_tail_shifted(std::uint64_t n_indices, double alpha, double x) {
    if (n_indices == 0) throw std::invalid_argument("exact_tail_shifted: N must be positive");
    if (!(alpha > 0.0 && alpha * alpha < 2.0))
        throw std::invalid_argument("exact_tail_shifted: alpha must be in (0, sqrt(2))");
    const double sz = std::sqrt(1.0 - 0.5 * alpha * alpha);
    const double si = alpha / std::numbers::sqrt2;
    const double nn = static_cast<double>(n_indices);
    auto integrand = [&](double z) {
        const double log_cdf_pow = nn * std::log1p(-normal_tail((x - z) / si));
        return -std::expm1(log_cdf_pow) * normal_pdf(z / sz) / sz;
    };
    // the cut tails carry Gaussian mass below 1e-16, well under the target
    const double range = 8.5 * sz;
    return adaptive_simpson(integrand, -range, range, 1e-10);
}

struct TailPoint {
    double beta = 0.0;
    double x = 0.0;                     // threshold m + beta*sqrt(log N)
    double prob = 0.0;
    double se = 0.0;                    // zero in exact mode
    double exponent = 0.0;              // -log(prob)/log(N)
    bool exponent_is_lower_bound = false;
    double ref_borell = 0.0;            // beta^2/2
    double ref_alpha = 0.0;             // beta^2/(2-alpha^2), shifted fields only
    bool improves_borell = false;
};

struct TailReport {
    std::uint64_t n_indices = 0;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    bool exact = false;
    std::uint64_t trials = 0;
    double m = 0.0;
    std::vector<TailPoint> points;
};

// Exceedance probabilities of the maximum at thresholds m + beta*sqrt(log N)
// and the implied tail exponents.  Shifted fields may use the quadrature
// oracle (exact = true); everything else is Monte Carlo.
inline TailReport tail_experiment(const GaussianField& field, std::span<const double> betas,
                                  std::uint64_t trials, std::uint64_t seed, bool exact = false,
                                  unsigned workers = 1, std::optional<double> m_override = {},
                                  std::uint64_t pilot_trials = 100'000) {
    if (field.size() < 2)
        throw std::invalid_argument("tail_experiment: need at least two indices");
    if (betas.empty()) throw std::invalid_argument("tail_experiment: empty beta grid");
    if (betas.size() > 32)
        throw std::invalid_argument("tail_experiment: at most 32 beta points per run");
    for (double b : betas)
        if (!(b >= 0.0)) throw std::invalid_argument("tail_experiment: betas must be nonnegative");
    if (exact && field.kind() != FieldKind::shifted)
        throw std::invalid_argument("tail_experiment: exact mode needs a shifted field");

    TailReport rep;
    rep.n_indices = field.size();
    rep.exact = exact;
    if (field.kind() == FieldKind::shifted) rep.alpha = field.alpha();
    const double logn = std::log(static_cast<double>(field.size()));

    if (exact) {
        rep.m = m_override ? *m_override
                           : field.value_scale() * (field.alpha() / std::numbers::sqrt2) *
                                 exact_mean_max_iid_normals(field.size());
        for (double beta : betas) {
            TailPoint p;
            p.beta = beta;
            p.x = rep.m + beta * std::sqrt(logn);
            p.prob = exact_tail_shifted(field.size(), field.alpha(), p.x / field.value_scale());
            p.exponent = -std::log(p.prob) / logn;
            p.ref_borell = 0.5 * beta * beta;
            p.ref_alpha = beta * beta / (2.0 - field.alpha() * field.alpha());
            p.improves_borell = p.exponent >= p.ref_borell;
            rep.points.push_back(p);
        }
        return rep;
    }

    rep.trials = trials;
    if (m_override) {
        rep.m = *m_override;
    } else {
        std::vector<double> pilot = map_trials<double>(pilot_trials, workers, [&](std::uint64_t t) {
            return detail::sup_draw(field, seed, streams::pilot(t));
        });
        Welford w;
        for (double v : pilot) w.add(v);
        rep.m = w.mean();
    }
    std::vector<double> xs;
    for (double beta : betas) xs.push_back(rep.m + beta * std::sqrt(logn));
    std::vector<std::uint32_t> masks =
        map_trials<std::uint32_t>(trials, workers, [&](std::uint64_t t) {
            const double v = detail::sup_draw(field, seed, streams::trial(t));
            std::uint32_t mask = 0;
            for (std::size_t k = 0; k < xs.size(); ++k)
                if (v >= xs[k]) mask |= (1u << k);
            return mask;
        });
    for (std::size_t k = 0; k < betas.size(); ++k) {
        std::uint64_t hits = 0;
        for (std::uint32_t m : masks) hits += (m >> k) & 1u;
        TailPoint p;
        p.beta = betas[k];
        p.x = xs[k];
        p.prob = static_cast<double>(hits) / static_cast<double>(trials);
        p.se = binomial_stderr(p.prob, trials);
        if (hits == 0) {
            p.exponent = std::log(static_cast<double>(trials)) / logn;
            p.exponent_is_lower_bound = true;
        } else {
            p.exponent = -std::log(p.prob) / logn;
        }
        p.ref_borell = 0.5 * p.beta * p.beta;
        if (field.kind() == FieldKind::shifted)
            p.ref_alpha = p.beta * p.beta / (2.0 - field.alpha() * field.alpha());
        p.improves_borell = p.exponent >= p.ref_borell;
        rep.points.push_back(p);
    }
    return rep;
}

} // namespace gfe
