#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfe {

// Dense row-major square matrix, just enough structure for covariance work.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct EigenSym {
    std::vector<double> values;  // ascending
    Matrix vectors;              // column j is the eigenvector for values[j]
};

// Cyclic Jacobi sweeps; fine for the dimensions covariance matrices reach
// here (a few hundred).  Input must be symmetric.
inline EigenSym jacobi_eigen(Matrix a, int max_sweeps = 64, double tol = 1e-13) {
    const std::size_t n = a.rows;
    if (n == 0 || a.cols != n) throw std::invalid_argument("jacobi_eigen: square matrix required");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a.at(i, j) - a.at(j, i)) > 1e-9 * (1.0 + std::abs(a.at(i, j))))
                throw std::invalid_argument("jacobi_eigen: matrix not symmetric");

    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a.at(i, i)));
    scale = std::max(scale, 1.0);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::abs(a.at(i, j)));
        if (off <= tol * scale) break;
        if (sweep == max_sweeps - 1)
            throw std::runtime_error("jacobi_eigen: no convergence within sweep budget");

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) <= tol * scale * 1e-3) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenSym out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a.at(i, i);
    out.vectors = Matrix(n, n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return out.values[x] < out.values[y]; });
    std::vector<double> sorted(n);
    for (std::size_t j = 0; j < n; ++j) {
        sorted[j] = out.values[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, order[j]);
    }
    out.values = std::move(sorted);
    return out;
}

struct FactorResult {
    Matrix factor;        // N x d rows, covariance = factor * factor^T
    double clipped_mass;  // total negative eigenvalue magnitude removed
};

// Square-root factor of a symmetric PSD matrix.  Slightly negative
// eigenvalues (rounding noise, each above -1e-10 * trace) are clipped to
// zero and their total mass reported; anything more negative means the
// input is not a covariance matrix.
inline FactorResult covariance_factor(const Matrix& cov, double eig_tol_rel = 1e-10) {
    const std::size_t n = cov.rows;
    EigenSym eig = jacobi_eigen(cov);
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += cov.at(i, i);
    const double floor = -eig_tol_rel * std::max(trace, 1e-300);
    double clipped = 0.0;
    for (double& lam : eig.values) {
        if (lam < floor)
            throw std::invalid_argument("covariance_factor: matrix is not positive semidefinite");
        if (lam < 0.0) {
            clipped += -lam;
            lam = 0.0;
        }
    }

    FactorResult out;
    out.clipped_mass = clipped;
    out.factor = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double s = std::sqrt(eig.values[j]);
        for (std::size_t i = 0; i < n; ++i) out.factor.at(i, j) = eig.vectors.at(i, j) * s;
    }
    return out;
}

// Header-free dense CSV, one matrix row per line.  All rows must have the
// same number of fields and every field must parse as a double.
inline Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_matrix_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw std::runtime_error("load_matrix_csv: " + path + " line " +
                                         std::to_string(lineno) + ": not a number: '" + cell + "'");
            }
            while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
            if (used != cell.size())
                throw std::runtime_error("load_matrix_csv: " + path + " line " +
                                         std::to_string(lineno) + ": trailing junk in '" + cell + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("load_matrix_csv: " + path + " line " +
                                     std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_matrix_csv: " + path + " is empty");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = rows[i][j];
    return m;
}

inline void save_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_matrix_csv: cannot open " + path);
    out.precision(17);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out << ',';
            out << m.at(i, j);
        }
        out << '\n';
    }
}

} // namespace gfe
