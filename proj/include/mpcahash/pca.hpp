#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mpcahash/error.hpp"
#include "mpcahash/mpca.hpp"
#include "mpcahash/parallel.hpp"
#include "mpcahash/symmetric_eigen.hpp"
#include "mpcahash/tensor.hpp"

namespace mpcahash {

/// Vector PCA baseline.
struct PcaModel {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Vector mean;
    Matrix components; ///< in_dim x out_dim, orthonormal columns
    Spectrum spectrum; ///< full length in_dim

    bool operator==(const PcaModel&) const = default;
};

/// How many components to keep: a fixed count, or the fewest reaching a CCR.
struct PcaSelection {
    std::size_t out_dim = 0;
    double target_ccr = 0.0;

    static PcaSelection dims(std::size_t n) { return {n, 0.0}; }
    static PcaSelection ccr(double target) { return {0, target}; }
    [[nodiscard]] bool by_ccr() const noexcept { return out_dim == 0; }
};

inline constexpr std::size_t max_pca_dim = 4096;

/// Fits PCA on the scatter matrix sum_i (v_i - mean)(v_i - mean)^T.
inline PcaModel fit_pca(std::span<const Vector> vectors, const PcaSelection& selection,
                        const ReductionOptions& opt = {}) {
    if (vectors.size() < 2) throw ArgumentError("fit_pca needs at least 2 vectors");
    const std::size_t n = vectors.front().size();
    if (n == 0) throw ShapeError("fit_pca: zero-length vectors");
    if (n > max_pca_dim)
        throw CapacityError("fit_pca: input dimension " + std::to_string(n) + " exceeds the limit of " +
                            std::to_string(max_pca_dim));
    for (std::size_t i = 0; i < vectors.size(); ++i)
        if (vectors[i].size() != n)
            throw ShapeError("fit_pca: vector " + std::to_string(i) + " has length " +
                             std::to_string(vectors[i].size()) + ", expected " + std::to_string(n));
    if (selection.by_ccr()) {
        if (!(selection.target_ccr > 0.0 && selection.target_ccr <= 1.0))
            throw ArgumentError("fit_pca: target CCR must be in (0, 1]");
    } else if (selection.out_dim > n) {
        throw ArgumentError("fit_pca: out_dim " + std::to_string(selection.out_dim) + " exceeds input dimension " +
                            std::to_string(n));
    }

    Vector mean(n, 0.0);
    for (const auto& v : vectors)
        for (std::size_t j = 0; j < n; ++j) mean[j] += v[j];
    for (double& m : mean) m /= static_cast<double>(vectors.size());

    const std::size_t chunk = std::max<std::size_t>(1, opt.chunk_size);
    const std::size_t chunks = chunk_count(vectors.size(), chunk);
    std::vector<Matrix> partial(chunks);
    for_each_chunk(chunks, opt.threads, [&](std::size_t c) {
        Matrix s(n, n);
        Vector x(n);
        const std::size_t end = std::min(vectors.size(), (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) {
            for (std::size_t j = 0; j < n; ++j) x[j] = vectors[i][j] - mean[j];
            for (std::size_t a = 0; a < n; ++a) {
                if (x[a] == 0.0) continue;
                for (std::size_t b = a; b < n; ++b) s(a, b) += x[a] * x[b];
            }
        }
        partial[c] = std::move(s);
    });
    Matrix scatter(n, n);
    for (const auto& p : partial)
        for (std::size_t j = 0; j < n * n; ++j) scatter.data()[j] += p.data()[j];
    detail::mirror_upper(scatter);

    auto eig = sym_eig(scatter, "PCA scatter");
    detail::check_psd(eig.spectrum, "PCA scatter");
    const std::size_t keep =
        selection.by_ccr() ? select_dim_for_ccr(eig.spectrum, selection.target_ccr) : selection.out_dim;
    if (keep < 1) throw ArgumentError("fit_pca: out_dim must be at least 1");

    PcaModel model;
    model.in_dim = n;
    model.out_dim = keep;
    model.mean = std::move(mean);
    model.components = leading_columns(eig.vectors, keep);
    model.spectrum = std::move(eig.spectrum);
    return model;
}

inline PcaModel fit_pca(const std::vector<Vector>& vectors, const PcaSelection& selection,
                        const ReductionOptions& opt = {}) {
    return fit_pca(std::span<const Vector>(vectors), selection, opt);
}

/// components^T (v - mean).
inline Vector project_pca(const PcaModel& model, std::span<const double> v) {
    if (v.size() != model.in_dim)
        throw ShapeError("project_pca: vector length " + std::to_string(v.size()) + " != " +
                         std::to_string(model.in_dim));
    Vector out(model.out_dim, 0.0);
    for (std::size_t i = 0; i < model.in_dim; ++i) {
        const double x = v[i] - model.mean[i];
        if (x == 0.0) continue;
        const auto row = model.components.row(i);
        for (std::size_t j = 0; j < model.out_dim; ++j) out[j] += x * row[j];
    }
    return out;
}

} // namespace mpcahash
