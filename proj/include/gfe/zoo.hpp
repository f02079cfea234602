#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "linalg.hpp"

namespace gfe {

struct ZooEntry {
    std::string name;
    GaussianField field;
};

// Two orthonormal factor rows: the smallest field whose maximum has a
// closed-form law (max of two iid standard normals).
inline GaussianField two_orthonormal() {
    return GaussianField::explicit_axes({0, 1}, 2);
}

inline GaussianField equicorrelated(std::uint64_t n, double rho) {
    Matrix cov(n, n);
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < n; ++j) cov.at(i, j) = i == j ? 1.0 : rho;
    return GaussianField::from_covariance(cov);
}

// Fixed roster of small unit-variance fields, one per construction, used by
// property tests that must hold across every covariance structure we model.
inline std::vector<ZooEntry> standard_zoo() {
    std::vector<ZooEntry> zoo;
    zoo.push_back({"independent8", GaussianField::independent(8)});
    zoo.push_back({"block4x16", GaussianField::block(4, 16)});
    zoo.push_back({"shifted16_a1.0", GaussianField::shifted(16, 1.0)});
    zoo.push_back({"shifted8_a0.5", GaussianField::shifted(8, 0.5)});
    zoo.push_back({"polymer3", GaussianField::directed_polymer(3).normalized()});
    zoo.push_back({"spin4", GaussianField::spin_glass(4).normalized()});
    zoo.push_back({"equicorr6_r0.3", equicorrelated(6, 0.3)});
    zoo.push_back({"two_orthonormal", two_orthonormal()});
    return zoo;
}

// Rewrite a field as an explicit factor over the same driver: given equal
// driver vectors the two fields produce identical values at every index.
// Requires max variance <= 1 so the factor rows satisfy the row-norm cap.
inline GaussianField explicit_factor_of(const GaussianField& field) {
    const double s = field.value_scale();
    switch (field.kind()) {
        case FieldKind::explicit_factor:
            return field;
        case FieldKind::block: {
            const std::uint64_t reps = field.size() / field.block_count();
            if (s == 1.0) {
                std::vector<std::uint32_t> axes(field.size());
                for (std::uint64_t i = 0; i < field.size(); ++i)
                    axes[i] = static_cast<std::uint32_t>(i / reps);
                return GaussianField::explicit_axes(std::move(axes), field.block_count());
            }
            Matrix rows(field.size(), field.block_count());
            for (std::uint64_t i = 0; i < field.size(); ++i) rows.at(i, i / reps) = s;
            return GaussianField::explicit_dense(std::move(rows));
        }
        case FieldKind::shifted: {
            const double a = std::sqrt(1.0 - 0.5 * field.alpha() * field.alpha());
            const double b = field.alpha() / std::numbers::sqrt2;
            Matrix rows(field.size(), field.size() + 1);
            for (std::uint64_t i = 0; i < field.size(); ++i) {
                rows.at(i, 0) = s * a;
                rows.at(i, 1 + i) = s * b;
            }
            return GaussianField::explicit_dense(std::move(rows));
        }
        case FieldKind::directed_polymer: {
            const PolymerLattice& lat = field.lattice();
            Matrix rows(lat.path_count(), lat.edge_count());
            for (std::uint64_t p = 0; p < lat.path_count(); ++p)
                for (std::uint32_t e : lat.path_edges(p)) rows.at(p, e) = s;
            return GaussianField::explicit_dense(std::move(rows));
        }
        case FieldKind::spin_glass: {
            const SpinForm& sp = field.spins();
            const int n = sp.n();
            const double w = s / std::sqrt(2.0 * n);
            Matrix rows(sp.config_count(), sp.driver_size());
            for (std::uint64_t mask = 0; mask < sp.config_count(); ++mask)
                for (int i = 0; i < n; ++i) {
                    const double si = (mask >> i) & 1 ? 1.0 : -1.0;
                    for (int j = 0; j < n; ++j) {
                        const double sj = (mask >> j) & 1 ? 1.0 : -1.0;
                        rows.at(mask, static_cast<std::uint64_t>(i) * n + j) = w * si * sj;
                    }
                }
            return GaussianField::explicit_dense(std::move(rows));
        }
    }
    throw std::logic_error("explicit_factor_of: unhandled field kind");
}

} // namespace gfe
