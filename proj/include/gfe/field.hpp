#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lattice_paths.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "spin_glass.hpp"

namespace gfe {

enum class FieldKind { explicit_factor, directed_polymer, spin_glass, block, shifted };

inline const char* kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::explicit_factor: return "explicit";
        case FieldKind::directed_polymer: return "directed-polymer";
        case FieldKind::spin_glass: return "spin-glass";
        case FieldKind::block: return "block";
        case FieldKind::shifted: return "shifted";
    }
    return "?";
}

// Factor representation of an explicitly given centered part: value_i =
// <row_i, g> + mean_i with g iid standard normal.  Rows are either dense
// (N x dim) or unit axes (row i = e_axes[i]), which keeps the common
// "independent coordinates, possibly duplicated" case O(N) to sample.
struct ExplicitData {
    std::size_t dim = 0;
    std::vector<double> rows;        // dense N*dim, empty when axes is used
    std::vector<std::uint32_t> axes; // unit rows, empty when rows is used
    std::vector<double> means;       // empty means centered
    double max_row_sq = 0.0;
};

// A finite centered-or-shifted Gaussian vector presented through a
// covariance oracle, with a driver of iid standard normals behind it.
// Copies share the immutable payload, so passing fields by value is cheap
// and thread-safe.
class GaussianField {
  public:
    static GaussianField directed_polymer(int n) {
        GaussianField f;
        f.kind_ = FieldKind::directed_polymer;
        f.lattice_ = std::make_shared<const PolymerLattice>(n);
        f.n_indices_ = f.lattice_->path_count();
        return f;
    }

    static GaussianField spin_glass(int n) {
        GaussianField f;
        f.kind_ = FieldKind::spin_glass;
        f.spins_ = std::make_shared<const SpinForm>(n);
        f.n_indices_ = f.spins_->config_count();
        return f;
    }

    // K independent standard normals, each repeated N/K times.
    static GaussianField block(std::uint64_t blocks, std::uint64_t n_indices) {
        if (blocks == 0 || n_indices == 0 || n_indices % blocks != 0)
            throw std::invalid_argument("block field: K must divide N and both must be positive");
        GaussianField f;
        f.kind_ = FieldKind::block;
        f.n_indices_ = n_indices;
        f.blocks_ = blocks;
        return f;
    }

    static GaussianField independent(std::uint64_t n_indices) {
        return block(n_indices, n_indices);
    }

    // X_i = Z + Z_i with Var Z = 1 - alpha^2/2 and Var Z_i = alpha^2/2:
    // unit variances, constant off-diagonal covariance 1 - alpha^2/2.
    static GaussianField shifted(std::uint64_t n_indices, double alpha) {
        if (n_indices == 0) throw std::invalid_argument("shifted field: N must be positive");
        if (!(alpha > 0.0 && alpha * alpha < 2.0))
            throw std::invalid_argument("shifted field: alpha must be in (0, sqrt(2))");
        GaussianField f;
        f.kind_ = FieldKind::shifted;
        f.n_indices_ = n_indices;
        f.alpha_ = alpha;
        return f;
    }

    static GaussianField explicit_dense(Matrix rows, std::vector<double> means = {}) {
        if (rows.rows == 0 || rows.cols == 0)
            throw std::invalid_argument("explicit field: factor must be nonempty");
        if (!means.empty() && means.size() != rows.rows)
            throw std::invalid_argument("explicit field: mean vector length must equal N");
        auto data = std::make_shared<ExplicitData>();
        data->dim = rows.cols;
        data->rows = std::move(rows.data);
        data->means = std::move(means);
        for (std::size_t i = 0; i < rows.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < rows.cols; ++j) {
                const double v = data->rows[i * rows.cols + j];
                s += v * v;
            }
            if (s > 1.0 + 1e-12)
                throw std::invalid_argument("explicit field: factor row " + std::to_string(i) +
                                            " has norm above 1");
            data->max_row_sq = std::max(data->max_row_sq, s);
        }
        if (data->max_row_sq == 0.0)
            throw std::invalid_argument("explicit field: all factor rows are zero");
        GaussianField f;
        f.kind_ = FieldKind::explicit_factor;
        f.n_indices_ = rows.rows;
        f.explicit_ = std::move(data);
        return f;
    }

    static GaussianField explicit_axes(std::vector<std::uint32_t> axes, std::size_t dim,
                                       std::vector<double> means = {}) {
        if (axes.empty()) throw std::invalid_argument("explicit field: empty axis list");
        if (!means.empty() && means.size() != axes.size())
            throw std::invalid_argument("explicit field: mean vector length must equal N");
        for (auto a : axes)
            if (a >= dim) throw std::invalid_argument("explicit field: axis out of range");
        auto data = std::make_shared<ExplicitData>();
        data->dim = dim;
        data->axes = std::move(axes);
        data->means = std::move(means);
        data->max_row_sq = 1.0;
        GaussianField f;
        f.kind_ = FieldKind::explicit_factor;
        f.n_indices_ = data->axes.size();
        f.explicit_ = std::move(data);
        return f;
    }

    // Factor a dense covariance matrix (tiny negative eigenvalues from
    // rounding are clipped; anything worse is rejected).  The clipped
    // eigenvalue mass is reported through `clipped_mass` when given.
    static GaussianField from_covariance(const Matrix& cov, std::vector<double> means = {},
                                         double* clipped_mass = nullptr) {
        FactorResult fr = covariance_factor(cov);
        if (clipped_mass) *clipped_mass = fr.clipped_mass;
        return explicit_dense(std::move(fr.factor), std::move(means));
    }

    // Same field rescaled so the largest individual variance is 1.
    GaussianField normalized() const {
        GaussianField f = *this;
        f.scale_ = scale_ / std::sqrt(max_variance());
        return f;
    }

    FieldKind kind() const { return kind_; }
    std::uint64_t size() const { return n_indices_; }
    double value_scale() const { return scale_; }

    std::size_t driver_size() const {
        switch (kind_) {
            case FieldKind::directed_polymer: return lattice_->edge_count();
            case FieldKind::spin_glass: return spins_->driver_size();
            case FieldKind::block: return blocks_;
            case FieldKind::shifted: return 1 + n_indices_;
            case FieldKind::explicit_factor: return explicit_->dim;
        }
        return 0;
    }

    double covariance(std::uint64_t i, std::uint64_t j) const {
        check_index(i);
        check_index(j);
        const double s2 = scale_ * scale_;
        switch (kind_) {
            case FieldKind::directed_polymer:
                return s2 * lattice_->shared_edges(i, j);
            case FieldKind::spin_glass:
                return s2 * spins_->covariance(i, j);
            case FieldKind::block:
                return s2 * (block_of(i) == block_of(j) ? 1.0 : 0.0);
            case FieldKind::shifted:
                return s2 * (i == j ? 1.0 : 1.0 - 0.5 * alpha_ * alpha_);
            case FieldKind::explicit_factor: {
                const auto& e = *explicit_;
                if (!e.axes.empty()) return s2 * (e.axes[i] == e.axes[j] ? 1.0 : 0.0);
                double dot = 0.0;
                const double* a = e.rows.data() + i * e.dim;
                const double* b = e.rows.data() + j * e.dim;
                for (std::size_t k = 0; k < e.dim; ++k) dot += a[k] * b[k];
                return s2 * dot;
            }
        }
        return 0.0;
    }

    double variance_of(std::uint64_t i) const { return covariance(i, i); }

    double max_variance() const {
        const double s2 = scale_ * scale_;
        switch (kind_) {
            case FieldKind::directed_polymer: return s2 * 2.0 * lattice_->n();
            case FieldKind::spin_glass: return s2 * 0.5 * spins_->n();
            case FieldKind::block:
            case FieldKind::shifted: return s2;
            case FieldKind::explicit_factor: return s2 * explicit_->max_row_sq;
        }
        return 0.0;
    }

    double mean_of(std::uint64_t i) const {
        check_index(i);
        if (kind_ == FieldKind::explicit_factor && !explicit_->means.empty())
            return scale_ * explicit_->means[i];
        return 0.0;
    }

    bool centered() const {
        return kind_ != FieldKind::explicit_factor || explicit_->means.empty();
    }

    const PolymerLattice& lattice() const {
        if (!lattice_) throw std::logic_error("field has no lattice");
        return *lattice_;
    }
    const SpinForm& spins() const {
        if (!spins_) throw std::logic_error("field has no spin form");
        return *spins_;
    }
    const ExplicitData& explicit_data() const {
        if (!explicit_) throw std::logic_error("field has no explicit factor");
        return *explicit_;
    }
    std::uint64_t block_count() const { return blocks_; }
    std::uint64_t block_of(std::uint64_t i) const { return i / (n_indices_ / blocks_); }
    double alpha() const { return alpha_; }

    std::string describe() const {
        std::string s = kind_name(kind_);
        s += " N=" + std::to_string(n_indices_);
        if (kind_ == FieldKind::block) s += " K=" + std::to_string(blocks_);
        if (kind_ == FieldKind::shifted) s += " alpha=" + std::to_string(alpha_);
        if (scale_ != 1.0) s += " scale=" + std::to_string(scale_);
        return s;
    }

  private:
    void check_index(std::uint64_t i) const {
        if (i >= n_indices_) throw std::invalid_argument("field index out of range");
    }

    FieldKind kind_ = FieldKind::block;
    std::uint64_t n_indices_ = 0;
    double scale_ = 1.0;
    double alpha_ = 0.0;
    std::uint64_t blocks_ = 0;
    std::shared_ptr<const PolymerLattice> lattice_;
    std::shared_ptr<const SpinForm> spins_;
    std::shared_ptr<const ExplicitData> explicit_;
};

// One realization of a field: the driver that generated it plus, for kinds
// whose index set is small, the materialized value vector.  Path and spin
// kinds stay implicit; their values are computed on demand from the driver.
struct FieldSample {
    GaussianField field;
    std::vector<double> driver;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<double> values;

    bool materialized() const { return !values.empty(); }

    double value_of(std::uint64_t i) const {
        if (materialized()) return values[i];
        const double s = field.value_scale();
        switch (field.kind()) {
            case FieldKind::directed_polymer:
                return s * field.lattice().path_value(driver, i);
            case FieldKind::spin_glass:
                return s * field.spins().energy(driver, i);
            default:
                throw std::logic_error("FieldSample: values not materialized");
        }
    }
};

namespace detail {

inline void materialize_values(FieldSample& fs) {
    const GaussianField& f = fs.field;
    const double s = f.value_scale();
    switch (f.kind()) {
        case FieldKind::block: {
            fs.values.resize(f.size());
            const std::uint64_t reps = f.size() / f.block_count();
            for (std::uint64_t i = 0; i < f.size(); ++i) fs.values[i] = s * fs.driver[i / reps];
            break;
        }
        case FieldKind::shifted: {
            fs.values.resize(f.size());
            const double a = std::sqrt(1.0 - 0.5 * f.alpha() * f.alpha());
            const double b = f.alpha() / std::numbers::sqrt2;
            for (std::uint64_t i = 0; i < f.size(); ++i)
                fs.values[i] = s * (a * fs.driver[0] + b * fs.driver[1 + i]);
            break;
        }
        case FieldKind::explicit_factor: {
            const auto& e = f.explicit_data();
            fs.values.resize(f.size());
            if (!e.axes.empty()) {
                for (std::uint64_t i = 0; i < f.size(); ++i) fs.values[i] = s * fs.driver[e.axes[i]];
            } else {
                for (std::uint64_t i = 0; i < f.size(); ++i) {
                    const double* row = e.rows.data() + i * e.dim;
                    double acc = 0.0;
                    for (std::size_t k = 0; k < e.dim; ++k) acc += row[k] * fs.driver[k];
                    fs.values[i] = s * acc;
                }
            }
            if (!e.means.empty())
                for (std::uint64_t i = 0; i < f.size(); ++i) fs.values[i] += s * e.means[i];
            break;
        }
        default:
            break; // path/spin kinds stay implicit
    }
}

} // namespace detail

// Realize the field from the iid normal driver drawn out of (seed, stream).
inline FieldSample sample(const GaussianField& field, std::uint64_t seed, std::uint64_t stream) {
    FieldSample fs;
    fs.field = field;
    fs.seed = seed;
    fs.stream = stream;
    Rng rng(seed, stream);
    fs.driver.resize(field.driver_size());
    for (double& d : fs.driver) d = rng.normal();
    detail::materialize_values(fs);
    return fs;
}

// Realize the field from a caller-supplied driver (deterministic tests,
// coupling constructions).
inline FieldSample with_driver(const GaussianField& field, std::vector<double> driver) {
    if (driver.size() != field.driver_size())
        throw std::invalid_argument("with_driver: driver size must match the field");
    FieldSample fs;
    fs.field = field;
    fs.driver = std::move(driver);
    detail::materialize_values(fs);
    return fs;
}

} // namespace gfe
