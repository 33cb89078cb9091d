#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpcahash/error.hpp"
#include "mpcahash/random.hpp"
#include "mpcahash/tensor.hpp"

namespace mpcahash {

struct FeatureItem {
    std::uint64_t id = 0;
    std::uint32_t label = 0;
    FeatureTensor tensor;

    bool operator==(const FeatureItem&) const = default;
};

/// Feature tensors with ids and class labels, all of one shape.
struct FeatureDataset {
    Dims dims{};
    std::vector<FeatureItem> items;

    [[nodiscard]] std::vector<FeatureTensor> tensors() const {
        std::vector<FeatureTensor> out;
        out.reserve(items.size());
        for (const auto& it : items) out.push_back(it.tensor);
        return out;
    }

    bool operator==(const FeatureDataset&) const = default;
};

inline void validate(const FeatureDataset& ds) {
    check_dims(ds.dims);
    std::unordered_set<std::uint64_t> seen;
    for (const auto& it : ds.items) {
        if (it.tensor.dims() != ds.dims)
            throw ShapeError("dataset item " + std::to_string(it.id) + " has dims " + to_string(it.tensor.dims()) +
                             ", dataset dims are " + to_string(ds.dims));
        if (!seen.insert(it.id).second) throw ArgumentError("dataset has duplicate id " + std::to_string(it.id));
    }
}

struct SyntheticSpec {
    std::size_t num_classes = 5;
    std::size_t per_class = 200;
    Dims dims{6, 6, 16};
    double noise = 0.3;
    std::uint64_t seed = 1;
};

/// Gaussian clusters standing in for real feature maps.
///
/// One Xoshiro256pp(seed) normal stream is consumed in this order: every class
/// center (class 0 first, tensor order), then every item in id order. Item
/// id = class * per_class + j with label = class.
inline FeatureDataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2) throw ArgumentError("gen_synthetic: need at least 2 classes");
    if (spec.per_class < 1) throw ArgumentError("gen_synthetic: need at least 1 item per class");
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw ArgumentError("gen_synthetic: noise must be >= 0");
    check_dims(spec.dims);

    Xoshiro256pp rng(spec.seed);
    const std::size_t n = volume(spec.dims);
    std::vector<std::vector<double>> centers(spec.num_classes, std::vector<double>(n));
    for (auto& c : centers)
        for (double& v : c) v = rng.normal();

    FeatureDataset ds;
    ds.dims = spec.dims;
    ds.items.reserve(spec.num_classes * spec.per_class);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t j = 0; j < spec.per_class; ++j) {
            std::vector<float> data(n);
            for (std::size_t e = 0; e < n; ++e) data[e] = static_cast<float>(centers[c][e] + spec.noise * rng.normal());
            ds.items.push_back({static_cast<std::uint64_t>(c * spec.per_class + j), static_cast<std::uint32_t>(c),
                                FeatureTensor(spec.dims, std::move(data))});
        }
    }
    return ds;
}

} // namespace mpcahash
