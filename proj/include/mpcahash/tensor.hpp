#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpcahash/error.hpp"

namespace mpcahash {

using Vector = std::vector<double>;

/// Extents (I1, I2, I3) of a third-order tensor. Indices are zero-based.
using Dims = std::array<std::size_t, 3>;

inline std::size_t volume(const Dims& d) { return d[0] * d[1] * d[2]; }

inline std::string to_string(const Dims& d) {
    return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

inline void check_dims(const Dims& d) {
    if (d[0] == 0 || d[1] == 0 || d[2] == 0)
        throw ShapeError("tensor dims must be positive, got " + to_string(d));
}

/// Tensor mode, 1-based as in the usual mode-k notation.
enum class Mode : int { One = 1, Two = 2, Three = 3 };

inline constexpr std::array<Mode, 3> all_modes{Mode::One, Mode::Two, Mode::Three};

inline constexpr std::size_t axis(Mode m) { return static_cast<std::size_t>(m) - 1; }

inline Mode mode_from_int(int k) {
    if (k < 1 || k > 3) throw ArgumentError("mode must be 1, 2 or 3, got " + std::to_string(k));
    return static_cast<Mode>(k);
}

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                             std::to_string(rows_) + "*" + std::to_string(cols_));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::span<const double> data() const& noexcept { return data_; }
    [[nodiscard]] std::span<double> data() & noexcept { return data_; }
    std::span<const double> data() const&& = delete; // would dangle
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matrix product: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

/// Third-order tensor stored row-major with i3 varying fastest, then i2, then i1.
/// `T` is the storage type; every reduction in this library accumulates in double.
template <typename T>
class Tensor3 {
public:
    using value_type = T;

    Tensor3() = default;

    explicit Tensor3(const Dims& dims) : dims_(dims) {
        check_dims(dims_);
        data_.assign(volume(dims_), T{0});
    }

    Tensor3(const Dims& dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
        check_dims(dims_);
        if (data_.size() != volume(dims_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match dims " + to_string(dims_));
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v)))
                throw ArgumentError("tensor values must be finite");
    }

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t dim(Mode m) const noexcept { return dims_[axis(m)]; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::span<const T> data() const& noexcept { return data_; }
    [[nodiscard]] std::span<T> data() & noexcept { return data_; }
    std::span<const T> data() const&& = delete; // would dangle

    [[nodiscard]] std::size_t offset(std::size_t i1, std::size_t i2, std::size_t i3) const noexcept {
        return (i1 * dims_[1] + i2) * dims_[2] + i3;
    }
    T& operator()(std::size_t i1, std::size_t i2, std::size_t i3) noexcept { return data_[offset(i1, i2, i3)]; }
    T operator()(std::size_t i1, std::size_t i2, std::size_t i3) const noexcept {
        return data_[offset(i1, i2, i3)];
    }

    bool operator==(const Tensor3&) const = default;

private:
    Dims dims_{0, 0, 0};
    std::vector<T> data_;
};

using FeatureTensor = Tensor3<float>;

template <typename T>
double frobenius_norm_sq(const Tensor3<T>& x) {
    double s = 0.0;
    for (T v : x.data()) s += static_cast<double>(v) * static_cast<double>(v);
    return s;
}

template <typename T>
double frobenius_norm(const Tensor3<T>& x) {
    return std::sqrt(frobenius_norm_sq(x));
}

namespace detail {

/// Column of entry (i1, i2, i3) in the mode-k unfolding: the two remaining
/// indices (a, b), in increasing mode order, map to c = i_a + I_a * i_b.
inline std::size_t unfold_column(const Dims& d, Mode mode, std::size_t i1, std::size_t i2, std::size_t i3) {
    switch (mode) {
    case Mode::One: return i2 + d[1] * i3;
    case Mode::Two: return i1 + d[0] * i3;
    case Mode::Three: return i1 + d[0] * i2;
    }
    return 0;
}

inline std::size_t unfold_row(Mode mode, std::size_t i1, std::size_t i2, std::size_t i3) {
    switch (mode) {
    case Mode::One: return i1;
    case Mode::Two: return i2;
    case Mode::Three: return i3;
    }
    return 0;
}

} // namespace detail

/// Mode-k unfolding: I_k rows, (I1*I2*I3 / I_k) columns.
template <typename T>
Matrix unfold(const Tensor3<T>& x, Mode mode) {
    const Dims& d = x.dims();
    check_dims(d);
    const std::size_t rows = d[axis(mode)];
    Matrix m(rows, volume(d) / rows);
    const auto data = x.data();
    std::size_t flat = 0;
    for (std::size_t i1 = 0; i1 < d[0]; ++i1)
        for (std::size_t i2 = 0; i2 < d[1]; ++i2)
            for (std::size_t i3 = 0; i3 < d[2]; ++i3, ++flat)
                m(detail::unfold_row(mode, i1, i2, i3), detail::unfold_column(d, mode, i1, i2, i3)) =
                    static_cast<double>(data[flat]);
    return m;
}

/// Inverse of unfold.
template <typename T = double>
Tensor3<T> fold(const Matrix& m, Mode mode, const Dims& dims) {
    check_dims(dims);
    const std::size_t rows = dims[axis(mode)];
    if (m.rows() != rows || m.cols() != volume(dims) / rows)
        throw ShapeError("fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         " does not unfold dims " + to_string(dims) + " along mode " +
                         std::to_string(static_cast<int>(mode)));
    std::vector<T> data(volume(dims));
    std::size_t flat = 0;
    for (std::size_t i1 = 0; i1 < dims[0]; ++i1)
        for (std::size_t i2 = 0; i2 < dims[1]; ++i2)
            for (std::size_t i3 = 0; i3 < dims[2]; ++i3, ++flat)
                data[flat] = static_cast<T>(
                    m(detail::unfold_row(mode, i1, i2, i3), detail::unfold_column(dims, mode, i1, i2, i3)));
    return Tensor3<T>(dims, std::move(data));
}

/// x ×_k v, i.e. fold(v · unfold(x, k)). Multiplying by V^T is mode_product(x, transpose(V), k).
template <typename T>
Tensor3<T> mode_product(const Tensor3<T>& x, const Matrix& v, Mode mode) {
    if (v.cols() != x.dim(mode))
        throw ShapeError("mode_product: matrix has " + std::to_string(v.cols()) + " columns but mode " +
                         std::to_string(static_cast<int>(mode)) + " extent is " + std::to_string(x.dim(mode)));
    Dims out = x.dims();
    out[axis(mode)] = v.rows();
    return fold<T>(multiply(v, unfold(x, mode)), mode, out);
}

namespace detail {

template <typename T>
void check_samples(std::span<const Tensor3<T>> samples, const char* what) {
    if (samples.empty()) throw ArgumentError(std::string(what) + ": sample list is empty");
    const Dims& d = samples.front().dims();
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].dims() != d)
            throw ShapeError(std::string(what) + ": sample " + std::to_string(i) + " has dims " +
                             to_string(samples[i].dims()) + ", expected " + to_string(d));
}

template <typename T>
std::vector<double> mean_values(std::span<const Tensor3<T>> samples) {
    check_samples(samples, "mean_tensor");
    std::vector<double> acc(samples.front().size(), 0.0);
    for (const auto& s : samples) {
        const auto v = s.data();
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += static_cast<double>(v[j]);
    }
    const double n = static_cast<double>(samples.size());
    for (double& a : acc) a /= n;
    return acc;
}

} // namespace detail

/// Entrywise sample mean.
template <typename T>
Tensor3<T> mean_tensor(std::span<const Tensor3<T>> samples) {
    auto acc = detail::mean_values(samples);
    std::vector<T> out(acc.begin(), acc.end());
    return Tensor3<T>(samples.front().dims(), std::move(out));
}

template <typename T>
Tensor3<T> mean_tensor(const std::vector<Tensor3<T>>& samples) {
    return mean_tensor(std::span<const Tensor3<T>>(samples));
}

/// Returns the centered samples X_i - mean together with the mean.
template <typename T>
std::pair<std::vector<Tensor3<T>>, Tensor3<T>> center(std::span<const Tensor3<T>> samples) {
    const auto mean = detail::mean_values(samples);
    std::vector<Tensor3<T>> centered;
    centered.reserve(samples.size());
    for (const auto& s : samples) {
        std::vector<T> v(mean.size());
        const auto src = s.data();
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = static_cast<T>(static_cast<double>(src[j]) - mean[j]);
        centered.emplace_back(s.dims(), std::move(v));
    }
    return {std::move(centered), Tensor3<T>(samples.front().dims(), std::vector<T>(mean.begin(), mean.end()))};
}

template <typename T>
std::pair<std::vector<Tensor3<T>>, Tensor3<T>> center(const std::vector<Tensor3<T>>& samples) {
    return center(std::span<const Tensor3<T>>(samples));
}

/// Flattens x by concatenating the rows of its mode-3 unfolding:
/// v[i3 * (I1*I2) + i1 + I1*i2] = x(i1, i2, i3).
template <typename T>
Vector vectorize(const Tensor3<T>& x) {
    const Dims& d = x.dims();
    const std::size_t cols = d[0] * d[1];
    Vector v(x.size());
    std::size_t flat = 0;
    const auto data = x.data();
    for (std::size_t i1 = 0; i1 < d[0]; ++i1)
        for (std::size_t i2 = 0; i2 < d[1]; ++i2)
            for (std::size_t i3 = 0; i3 < d[2]; ++i3, ++flat)
                v[i3 * cols + i1 + d[0] * i2] = static_cast<double>(data[flat]);
    return v;
}

/// Converts the storage type of a tensor.
template <typename To, typename From>
Tensor3<To> tensor_cast(const Tensor3<From>& x) {
    const auto src = x.data();
    return Tensor3<To>(x.dims(), std::vector<To>(src.begin(), src.end()));
}

} // namespace mpcahash
