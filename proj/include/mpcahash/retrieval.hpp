#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "mpcahash/error.hpp"
#include "mpcahash/hashing.hpp"
#include "mpcahash/parallel.hpp"

namespace mpcahash {

struct IndexEntry {
    std::uint64_t id = 0;
    std::uint32_t label = 0;
    BinaryCode code;

    bool operator==(const IndexEntry&) const = default;
};

/// Immutable binary-code database sorted by ascending id. Codes are stored
/// contiguously so a query is one linear pass over `words`.
class RetrievalIndex {
public:
    RetrievalIndex() = default;

    [[nodiscard]] std::size_t bits() const noexcept { return bits_; }
    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] std::size_t words_per_code() const noexcept { return stride_; }
    [[nodiscard]] std::uint64_t id(std::size_t i) const noexcept { return ids_[i]; }
    [[nodiscard]] std::uint32_t label(std::size_t i) const noexcept { return labels_[i]; }
    [[nodiscard]] const std::uint64_t* code_words(std::size_t i) const noexcept { return words_.data() + i * stride_; }

    [[nodiscard]] IndexEntry entry(std::size_t i) const {
        return {ids_[i], labels_[i],
                BinaryCode(bits_, std::vector<std::uint64_t>(code_words(i), code_words(i) + stride_))};
    }

    bool operator==(const RetrievalIndex&) const = default;

    friend RetrievalIndex build_index(std::vector<IndexEntry> items);

private:
    std::size_t bits_ = 0;
    std::size_t stride_ = 0;
    std::vector<std::uint64_t> ids_;
    std::vector<std::uint32_t> labels_;
    std::vector<std::uint64_t> words_;
};

/// Sorts items by id into a canonical index. Duplicate ids and mixed code
/// lengths are rejected.
inline RetrievalIndex build_index(std::vector<IndexEntry> items) {
    if (items.empty()) throw ArgumentError("build_index: no items");
    const std::size_t bits = items.front().code.bits;
    for (const auto& it : items)
        if (it.code.bits != bits || it.code.words.size() != BinaryCode::word_count(bits))
            throw ShapeError("build_index: item " + std::to_string(it.id) + " has a " + std::to_string(it.code.bits) +
                             "-bit code, expected " + std::to_string(bits));
    std::sort(items.begin(), items.end(), [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < items.size(); ++i)
        if (items[i].id == items[i - 1].id)
            throw ArgumentError("build_index: duplicate id " + std::to_string(items[i].id));

    RetrievalIndex index;
    index.bits_ = bits;
    index.stride_ = BinaryCode::word_count(bits);
    index.ids_.reserve(items.size());
    index.labels_.reserve(items.size());
    index.words_.reserve(items.size() * index.stride_);
    for (const auto& it : items) {
        index.ids_.push_back(it.id);
        index.labels_.push_back(it.label);
        index.words_.insert(index.words_.end(), it.code.words.begin(), it.code.words.end());
    }
    return index;
}

struct RankedItem {
    std::uint64_t id = 0;
    std::uint32_t label = 0;
    std::uint32_t distance = 0;

    bool operator==(const RankedItem&) const = default;
};

/// Ordered by (distance, id) ascending.
using RankedResult = std::vector<RankedItem>;

struct QueryOptions {
    std::optional<std::size_t> topk; ///< unset means the full ranking
    unsigned threads = 1;
    std::size_t shard_size = 16384;
};

/// Hamming distance from `code` to every entry, in index order. Shards are
/// independent so the thread count does not affect the output.
inline std::vector<std::uint32_t> scan_distances(const RetrievalIndex& index, const BinaryCode& code,
                                                 unsigned threads = 1, std::size_t shard_size = 16384) {
    if (code.bits != index.bits())
        throw ShapeError("query: code has " + std::to_string(code.bits) + " bits, index has " +
                         std::to_string(index.bits()));
    std::vector<std::uint32_t> dist(index.size());
    const std::size_t stride = index.words_per_code();
    const std::uint64_t* q = code.words.data();
    const std::size_t shard = std::max<std::size_t>(1, shard_size);
    for_each_chunk(chunk_count(index.size(), shard), threads, [&](std::size_t s) {
        const std::size_t end = std::min(index.size(), (s + 1) * shard);
        if (stride == 2) {
            for (std::size_t i = s * shard; i < end; ++i) {
                const std::uint64_t* w = index.code_words(i);
                dist[i] = static_cast<std::uint32_t>(std::popcount(w[0] ^ q[0]) + std::popcount(w[1] ^ q[1]));
            }
        } else {
            for (std::size_t i = s * shard; i < end; ++i)
                dist[i] = static_cast<std::uint32_t>(hamming_words(index.code_words(i), q, stride));
        }
    });
    return dist;
}

/// Exhaustive Hamming ranking. Distances are bounded by the code length, so
/// the (distance, id) order is produced by a stable counting sort over the
/// id-sorted index.
inline RankedResult query(const RetrievalIndex& index, const BinaryCode& code, const QueryOptions& opt = {}) {
    const auto dist = scan_distances(index, code, opt.threads, opt.shard_size);
    std::vector<std::size_t> start(index.bits() + 2, 0);
    for (auto d : dist) ++start[d + 1];
    std::partial_sum(start.begin(), start.end(), start.begin());
    std::vector<std::uint32_t> order(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) order[start[dist[i]]++] = static_cast<std::uint32_t>(i);

    const std::size_t k = std::min(index.size(), opt.topk.value_or(index.size()));
    RankedResult out;
    out.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = order[r];
        out.push_back({index.id(i), index.label(i), dist[i]});
    }
    return out;
}

struct AveragePrecision {
    double value = 0.0;
    bool no_relevant = false; ///< set when the ranking held no relevant item; value is then 0
};

/// AP = (1/R) * sum over relevant positions p of precision@p.
template <std::ranges::input_range Flags>
AveragePrecision average_precision(const Flags& relevant) {
    std::size_t hits = 0;
    std::size_t position = 0;
    long double sum = 0.0L; // extended accumulator: small cases round to the nearest double exactly
    for (const auto& flag : relevant) {
        ++position;
        if (!flag) continue;
        ++hits;
        sum += static_cast<long double>(hits) / static_cast<long double>(position);
    }
    if (hits == 0) return {0.0, true};
    return {static_cast<double>(sum / static_cast<long double>(hits)), false};
}

inline AveragePrecision average_precision(std::initializer_list<bool> relevant) {
    return average_precision(std::span<const bool>(relevant.begin(), relevant.size()));
}

struct MapResult {
    double map = 0.0;
    std::size_t queries = 0;
    std::size_t queries_without_relevant = 0;
};

struct EvalOptions {
    std::optional<std::size_t> topk; ///< truncate each ranking (after self-exclusion); unset = full ranking
    unsigned threads = 1;
};

/// Mean AP over `queries`. Each query ranks the whole index, drops the entry
/// with its own id, and counts same-label entries as relevant.
inline MapResult mean_average_precision(const RetrievalIndex& index, std::span<const IndexEntry> queries,
                                        const EvalOptions& opt = {}) {
    if (queries.empty()) throw ArgumentError("mean_average_precision: no queries");
    for (const auto& q : queries)
        if (q.code.bits != index.bits())
            throw ShapeError("mean_average_precision: query " + std::to_string(q.id) + " has " +
                             std::to_string(q.code.bits) + " bits, index has " + std::to_string(index.bits()));

    std::vector<AveragePrecision> ap(queries.size());
    constexpr std::size_t per_chunk = 16;
    for_each_chunk(chunk_count(queries.size(), per_chunk), opt.threads, [&](std::size_t c) {
        const std::size_t end = std::min(queries.size(), (c + 1) * per_chunk);
        for (std::size_t qi = c * per_chunk; qi < end; ++qi) {
            const auto& q = queries[qi];
            const auto ranking = query(index, q.code);
            const std::size_t limit = opt.topk.value_or(std::numeric_limits<std::size_t>::max());
            std::vector<char> rel;
            rel.reserve(ranking.size());
            for (const auto& r : ranking) {
                if (r.id == q.id) continue;
                if (rel.size() == limit) break;
                rel.push_back(r.label == q.label);
            }
            ap[qi] = average_precision(rel);
        }
    });

    MapResult out;
    out.queries = queries.size();
    double sum = 0.0;
    for (const auto& a : ap) {
        sum += a.value;
        if (a.no_relevant) ++out.queries_without_relevant;
    }
    out.map = sum / static_cast<double>(queries.size());
    return out;
}

inline MapResult mean_average_precision(const RetrievalIndex& index, const std::vector<IndexEntry>& queries,
                                        const EvalOptions& opt = {}) {
    return mean_average_precision(index, std::span<const IndexEntry>(queries), opt);
}

} // namespace mpcahash
