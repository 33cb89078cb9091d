#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mpcahash/error.hpp"
#include "mpcahash/parallel.hpp"
#include "mpcahash/symmetric_eigen.hpp"
#include "mpcahash/tensor.hpp"

namespace mpcahash {

/// Fitted single-pass multilinear PCA model.
struct MpcaModel {
    Dims in_dims{};
    Dims out_dims{};
    Tensor3<double> mean;
    std::array<Matrix, 3> projections; ///< V_k, I_k x d_k, orthonormal columns
    std::array<Spectrum, 3> spectra;   ///< full eigenvalue spectrum of S^(k)

    bool operator==(const MpcaModel&) const = default;
};

struct ReductionOptions {
    unsigned threads = 1;
    std::size_t chunk_size = 64; ///< samples per partial sum; fixes the summation order
};

namespace detail {

// Adds the upper triangles of U U^T for the three unfoldings of one centered
// sample `x` (row-major, i3 fastest).
inline void add_mode_scatter(std::span<const double> x, const Dims& d, std::array<Matrix, 3>& s,
                             const std::array<bool, 3>& wanted) {
    const std::size_t n1 = d[0], n2 = d[1], n3 = d[2];
    if (wanted[0]) {
        const std::size_t len = n2 * n3;
        for (std::size_t a = 0; a < n1; ++a) {
            const double* ra = x.data() + a * len;
            for (std::size_t b = a; b < n1; ++b) {
                const double* rb = x.data() + b * len;
                double acc = 0.0;
                for (std::size_t j = 0; j < len; ++j) acc += ra[j] * rb[j];
                s[0](a, b) += acc;
            }
        }
    }
    if (wanted[1]) {
        for (std::size_t a = 0; a < n2; ++a) {
            for (std::size_t b = a; b < n2; ++b) {
                double acc = 0.0;
                for (std::size_t i1 = 0; i1 < n1; ++i1) {
                    const double* ra = x.data() + (i1 * n2 + a) * n3;
                    const double* rb = x.data() + (i1 * n2 + b) * n3;
                    for (std::size_t i3 = 0; i3 < n3; ++i3) acc += ra[i3] * rb[i3];
                }
                s[1](a, b) += acc;
            }
        }
    }
    if (wanted[2]) {
        Matrix& s3 = s[2];
        for (std::size_t r = 0; r < n1 * n2; ++r) {
            const double* row = x.data() + r * n3;
            for (std::size_t a = 0; a < n3; ++a) {
                const double xa = row[a];
                if (xa == 0.0) continue;
                double* out = &s3(a, 0);
                for (std::size_t b = a; b < n3; ++b) out[b] += xa * row[b];
            }
        }
    }
}

inline void mirror_upper(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
}

// Scatter matrices of (samples - mean) for the requested modes, reduced over
// fixed-size chunks combined in chunk order so the thread count never changes
// the result.
template <typename T>
std::array<Matrix, 3> scatter_matrices(std::span<const Tensor3<T>> samples, std::span<const double> mean,
                                       const std::array<bool, 3>& wanted, const ReductionOptions& opt) {
    const Dims d = samples.front().dims();
    const std::size_t chunk = std::max<std::size_t>(1, opt.chunk_size);
    const std::size_t chunks = chunk_count(samples.size(), chunk);
    auto zero = [&] {
        std::array<Matrix, 3> s;
        for (std::size_t k = 0; k < 3; ++k) s[k] = wanted[k] ? Matrix(d[k], d[k]) : Matrix();
        return s;
    };
    std::vector<std::array<Matrix, 3>> partial(chunks);
    for_each_chunk(chunks, opt.threads, [&](std::size_t c) {
        auto s = zero();
        std::vector<double> buf(volume(d));
        const std::size_t end = std::min(samples.size(), (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) {
            const auto src = samples[i].data();
            for (std::size_t j = 0; j < buf.size(); ++j)
                buf[j] = static_cast<double>(src[j]) - (mean.empty() ? 0.0 : mean[j]);
            add_mode_scatter(buf, d, s, wanted);
        }
        partial[c] = std::move(s);
    });
    auto total = zero();
    for (const auto& p : partial)
        for (std::size_t k = 0; k < 3; ++k) {
            if (!wanted[k]) continue;
            auto dst = total[k].data();
            auto src = p[k].data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    for (std::size_t k = 0; k < 3; ++k)
        if (wanted[k]) mirror_upper(total[k]);
    return total;
}

inline void check_psd(const Spectrum& s, const std::string& name) {
    const double floor = -1e-8 * std::max(0.0, s.max());
    for (double v : s.values)
        if (v < floor)
            throw NumericError(name + " has eigenvalue " + std::to_string(v) +
                               " below the positive-semidefinite tolerance");
}

} // namespace detail

/// Total scatter S^(k) = sum_i U_i U_i^T with U_i the mode-k unfolding of the
/// already-centered sample i.
template <typename T>
Matrix scatter_matrix(std::span<const Tensor3<T>> centered, Mode mode, const ReductionOptions& opt = {}) {
    detail::check_samples(centered, "scatter_matrix");
    std::array<bool, 3> wanted{};
    wanted[axis(mode)] = true;
    return std::move(detail::scatter_matrices(centered, {}, wanted, opt)[axis(mode)]);
}

template <typename T>
Matrix scatter_matrix(const std::vector<Tensor3<T>>& centered, Mode mode, const ReductionOptions& opt = {}) {
    return scatter_matrix(std::span<const Tensor3<T>>(centered), mode, opt);
}

/// Fraction of eigenvalue mass in the leading `d` eigenvalues. Eigenvalues
/// below 1e-10 * max count as zero; negatives below -1e-8 * max are an error.
inline double ccr(const Spectrum& spectrum, std::size_t d) {
    if (d < 1 || d > spectrum.size())
        throw ArgumentError("ccr: d = " + std::to_string(d) + " outside [1, " + std::to_string(spectrum.size()) + "]");
    detail::check_psd(spectrum, "ccr spectrum");
    const double zero = 1e-10 * spectrum.max();
    double head = 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < spectrum.size(); ++j) {
        const double v = spectrum.values[j] <= zero ? 0.0 : spectrum.values[j];
        total += v;
        if (j + 1 == d) head = total;
    }
    if (!(total > 0.0)) throw ArgumentError("ccr: spectrum has no positive mass");
    return head / total;
}

/// Per-mode CCRs combined with weights I_k / (I1 + I2 + I3).
inline double weighted_ccr(const std::array<double, 3>& ccrs, const Dims& in_dims) {
    check_dims(in_dims);
    for (double r : ccrs)
        if (!(r >= 0.0 && r <= 1.0)) throw ArgumentError("weighted_ccr: ratio outside [0, 1]");
    const double sum = static_cast<double>(in_dims[0] + in_dims[1] + in_dims[2]);
    double out = 0.0;
    for (std::size_t k = 0; k < 3; ++k) out += ccrs[k] * static_cast<double>(in_dims[k]) / sum;
    return out;
}

/// Same compression rate on every mode: d_k = round(cr * I_k), clamped to [1, I_k].
inline Dims select_dims_by_cr(const Dims& in_dims, double cr) {
    check_dims(in_dims);
    if (!(cr > 0.0 && cr <= 1.0)) throw ArgumentError("compression rate must be in (0, 1]");
    Dims out{};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto d = static_cast<std::size_t>(std::round(cr * static_cast<double>(in_dims[k])));
        out[k] = std::clamp<std::size_t>(d, 1, in_dims[k]);
    }
    return out;
}

/// Smallest d whose CCR reaches `target`.
inline std::size_t select_dim_for_ccr(const Spectrum& spectrum, double target) {
    if (!(target > 0.0 && target <= 1.0)) throw ArgumentError("target CCR must be in (0, 1]");
    for (std::size_t d = 1; d < spectrum.size(); ++d)
        if (ccr(spectrum, d) >= target) return d;
    return spectrum.size();
}

inline void check_out_dims(const Dims& in_dims, const Dims& out_dims) {
    for (std::size_t k = 0; k < 3; ++k)
        if (out_dims[k] < 1 || out_dims[k] > in_dims[k])
            throw ArgumentError("output dims " + to_string(out_dims) + " must satisfy 1 <= d_k <= I_k for input " +
                                to_string(in_dims));
}

/// Single-pass MPCA: center, one scatter matrix per mode, eigendecompose,
/// keep the leading d_k eigenvectors.
template <typename T>
MpcaModel fit(std::span<const Tensor3<T>> samples, const Dims& out_dims, const ReductionOptions& opt = {}) {
    detail::check_samples(samples, "mpca fit");
    if (samples.size() < 2) throw ArgumentError("mpca fit needs at least 2 samples");
    const Dims in = samples.front().dims();
    check_out_dims(in, out_dims);

    const auto mean = detail::mean_values(samples);
    auto scatter = detail::scatter_matrices(samples, std::span<const double>(mean), {true, true, true}, opt);

    MpcaModel model;
    model.in_dims = in;
    model.out_dims = out_dims;
    model.mean = Tensor3<double>(in, mean);
    for (Mode m : all_modes) {
        const std::size_t k = axis(m);
        const std::string name = "S^(" + std::to_string(k + 1) + ")";
        auto eig = sym_eig(scatter[k], name);
        detail::check_psd(eig.spectrum, name);
        model.projections[k] = leading_columns(eig.vectors, out_dims[k]);
        model.spectra[k] = std::move(eig.spectrum);
    }
    return model;
}

template <typename T>
MpcaModel fit(const std::vector<Tensor3<T>>& samples, const Dims& out_dims, const ReductionOptions& opt = {}) {
    return fit(std::span<const Tensor3<T>>(samples), out_dims, opt);
}

/// Y = (x - mean) x1 V1^T x2 V2^T x3 V3^T.
template <typename T>
Tensor3<double> project(const MpcaModel& model, const Tensor3<T>& x) {
    if (x.dims() != model.in_dims)
        throw ShapeError("mpca project: input dims " + to_string(x.dims()) + " != model dims " +
                         to_string(model.in_dims));
    std::vector<double> centered(x.size());
    const auto src = x.data();
    const auto mean = model.mean.data();
    for (std::size_t j = 0; j < centered.size(); ++j) centered[j] = static_cast<double>(src[j]) - mean[j];
    Tensor3<double> y(x.dims(), std::move(centered));
    for (Mode m : all_modes) y = mode_product(y, transpose(model.projections[axis(m)]), m);
    return y;
}

/// Same fit with fewer retained components per mode.
inline MpcaModel truncate(const MpcaModel& model, const Dims& out_dims) {
    check_out_dims(model.in_dims, out_dims);
    MpcaModel out = model;
    out.out_dims = out_dims;
    for (std::size_t k = 0; k < 3; ++k) {
        if (out_dims[k] > model.projections[k].cols())
            throw ArgumentError("truncate: model keeps only " + std::to_string(model.projections[k].cols()) +
                                " components in mode " + std::to_string(k + 1));
        out.projections[k] = leading_columns(model.projections[k], out_dims[k]);
    }
    return out;
}

/// Per-mode CCR of the model's selected dims.
inline std::array<double, 3> mode_ccrs(const MpcaModel& model) {
    return {ccr(model.spectra[0], model.out_dims[0]), ccr(model.spectra[1], model.out_dims[1]),
            ccr(model.spectra[2], model.out_dims[2])};
}

} // namespace mpcahash
