#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "mpcahash/error.hpp"
#include "mpcahash/tensor.hpp"

namespace mpcahash {

/// Eigenvalues sorted in non-increasing order.
struct Spectrum {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] double max() const noexcept { return values.empty() ? 0.0 : values.front(); }
    bool operator==(const Spectrum&) const = default;
};

struct EigenDecomposition {
    Spectrum spectrum;
    Matrix vectors; ///< column j is the unit eigenvector of spectrum.values[j]
};

struct JacobiOptions {
    double tolerance = 1e-12; ///< stop when off-diagonal norm <= tolerance * ||S||_F
    int max_sweeps = 100;
    double symmetry_tolerance = 1e-8;
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Flips column j so that its largest-magnitude entry (first one on ties) is positive.
inline void canonicalize_sign(Matrix& v, std::size_t j) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
        const double a = std::abs(v(i, j));
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    if (v(best, j) < 0.0)
        for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
}

} // namespace detail

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order (ties keep the solver's diagonal
/// order) and every eigenvector is sign-normalized so that its entry of largest
/// magnitude is positive, which makes the result reproducible byte for byte.
/// `name` only labels error messages.
inline EigenDecomposition sym_eig(const Matrix& s, const std::string& name = "S",
                                  const JacobiOptions& opt = {}) {
    if (s.rows() != s.cols())
        throw ShapeError("sym_eig(" + name + "): matrix is " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + ", expected square");
    const std::size_t n = s.rows();
    if (n == 0) throw ShapeError("sym_eig(" + name + "): empty matrix");

    double max_abs = 0.0;
    for (double v : s.data()) {
        if (!std::isfinite(v)) throw ArgumentError("sym_eig(" + name + "): non-finite entry");
        max_abs = std::max(max_abs, std::abs(v));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(s(i, j) - s(j, i)) > opt.symmetry_tolerance * max_abs)
                throw ArgumentError("sym_eig(" + name + "): matrix is not symmetric at (" + std::to_string(i) +
                                    "," + std::to_string(j) + ")");

    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));
    Matrix v = Matrix::identity(n);

    const double threshold = opt.tolerance * frobenius_norm(a);
    int sweep = 0;
    while (detail::off_diagonal_norm(a) > threshold) {
        if (sweep == opt.max_sweeps)
            throw NumericError("sym_eig(" + name + "): Jacobi iteration did not converge after " +
                               std::to_string(sweep) + " sweeps");
        ++sweep;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenDecomposition out{Spectrum{std::vector<double>(n)}, Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.spectrum.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
        detail::canonicalize_sign(out.vectors, j);
    }
    return out;
}

/// Keeps the first `count` columns of m.
inline Matrix leading_columns(const Matrix& m, std::size_t count) {
    if (count > m.cols())
        throw ShapeError("leading_columns: requested " + std::to_string(count) + " of " + std::to_string(m.cols()));
    Matrix out(m.rows(), count);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, j);
    return out;
}

} // namespace mpcahash
