#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <numeric>

#include "mpcahash/retrieval.hpp"
#include "test_util.hpp"

namespace mpcahash {
namespace {

BinaryCode code_of(std::size_t bits, std::uint64_t w) { return BinaryCode(bits, {w}); }

BinaryCode random_code(Xoshiro256pp& rng, std::size_t bits) {
    std::vector<std::uint64_t> w(BinaryCode::word_count(bits));
    for (auto& x : w) x = rng.next();
    if (bits % 64) w.back() &= (std::uint64_t{1} << (bits % 64)) - 1;
    return BinaryCode(bits, std::move(w));
}

std::vector<IndexEntry> random_entries(Xoshiro256pp& rng, std::size_t n, std::size_t bits, std::uint32_t labels) {
    std::vector<IndexEntry> items;
    for (std::size_t i = 0; i < n; ++i)
        items.push_back({rng.next() >> 16, static_cast<std::uint32_t>(rng.next() % labels), random_code(rng, bits)});
    return items;
}

RankedResult oracle_ranking(const std::vector<IndexEntry>& items, const BinaryCode& q) {
    RankedResult out;
    for (const auto& it : items) {
        std::uint32_t d = 0;
        for (std::size_t b = 0; b < q.bits; ++b) d += it.code.test(b) != q.test(b);
        out.push_back({it.id, it.label, d});
    }
    std::sort(out.begin(), out.end(), [](const RankedItem& a, const RankedItem& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
    return out;
}

TEST(BuildIndex, SortsById) {
    const auto idx = build_index({{9, 0, code_of(4, 1)}, {2, 1, code_of(4, 2)}, {5, 0, code_of(4, 3)}});
    ASSERT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx.id(0), 2u);
    EXPECT_EQ(idx.id(1), 5u);
    EXPECT_EQ(idx.id(2), 9u);
    EXPECT_EQ(idx.entry(0).code, code_of(4, 2));
}

TEST(BuildIndex, Errors) {
    try {
        build_index({{7, 0, code_of(4, 1)}, {7, 1, code_of(4, 2)}});
        FAIL();
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
    }
    EXPECT_THROW(build_index({{1, 0, code_of(4, 1)}, {2, 0, code_of(5, 1)}}), ShapeError);
    EXPECT_THROW(build_index({}), ArgumentError);
}

TEST(Query, PresentCodeRanksFirst) {
    Xoshiro256pp rng(1);
    auto items = random_entries(rng, 50, 64, 3);
    const auto idx = build_index(items);
    const auto r = query(idx, items[17].code);
    EXPECT_EQ(r.front().distance, 0u);
    // Any other entry at distance 0 must have a smaller id.
    for (const auto& x : r) {
        if (x.id == items[17].id) break;
        EXPECT_EQ(x.distance, 0u);
    }
}

TEST(Query, TiesBreakById) {
    const auto idx = build_index({{2, 0, code_of(2, 0b11)}, {1, 0, code_of(2, 0b00)}});
    const auto r = query(idx, code_of(2, 0b01));
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0], (RankedItem{1, 0, 1}));
    EXPECT_EQ(r[1], (RankedItem{2, 0, 1}));
}

TEST(Query, MatchesSortOracle) {
    Xoshiro256pp rng(2);
    for (std::size_t bits : {8u, 64u, 100u, 128u, 200u}) {
        const auto items = random_entries(rng, 400, bits, 5);
        const auto idx = build_index(items);
        for (int q = 0; q < 5; ++q) {
            const auto code = random_code(rng, bits);
            const auto oracle = oracle_ranking(items, code);
            EXPECT_EQ(query(idx, code), oracle);
            EXPECT_EQ(query(idx, code, {10}), RankedResult(oracle.begin(), oracle.begin() + 10));
        }
    }
}

TEST(Query, ShardedScanIsIdentical) {
    Xoshiro256pp rng(3);
    const auto idx = build_index(random_entries(rng, 5000, 128, 4));
    const auto code = random_code(rng, 128);
    EXPECT_EQ(query(idx, code, {std::nullopt, 1, 16384}), query(idx, code, {std::nullopt, 4, 333}));
}

TEST(Query, ComplementInvariance) {
    Xoshiro256pp rng(4);
    auto items = random_entries(rng, 300, 100, 4);
    const auto code = random_code(rng, 100);
    auto flip = [](BinaryCode c) {
        for (auto& w : c.words) w = ~w;
        c.words.back() &= (std::uint64_t{1} << 36) - 1;
        return c;
    };
    auto flipped = items;
    for (auto& it : flipped) it.code = flip(it.code);
    EXPECT_EQ(query(build_index(items), code), query(build_index(flipped), flip(code)));
}

TEST(Query, BitLengthMismatch) {
    const auto idx = build_index({{1, 0, code_of(4, 1)}});
    EXPECT_THROW(query(idx, code_of(5, 1)), ShapeError);
}

TEST(AveragePrecision, Examples) {
    EXPECT_EQ(average_precision({true, false, true}).value, 5.0 / 6.0);
    EXPECT_EQ(average_precision({true, true, true}).value, 1.0);
    for (std::size_t r = 1; r <= 6; ++r) {
        std::vector<char> flags(6, 0);
        flags[r - 1] = 1;
        EXPECT_DOUBLE_EQ(average_precision(flags).value, 1.0 / double(r));
    }
    const auto none = average_precision({false, false});
    EXPECT_EQ(none.value, 0.0);
    EXPECT_TRUE(none.no_relevant);
}

TEST(MeanAveragePrecision, SingleClassIsPerfect) {
    Xoshiro256pp rng(5);
    std::vector<IndexEntry> items;
    for (std::uint64_t i = 0; i < 20; ++i) items.push_back({i, 3, random_code(rng, 64)});
    EXPECT_EQ(mean_average_precision(build_index(items), items).map, 1.0);
}

TEST(MeanAveragePrecision, SeparatedClasses) {
    const std::vector<IndexEntry> items{
        {0, 0, code_of(2, 0b00)}, {1, 0, code_of(2, 0b00)}, {2, 1, code_of(2, 0b11)}, {3, 1, code_of(2, 0b11)}};
    const std::vector<IndexEntry> queries{items[0], items[2]};
    EXPECT_EQ(mean_average_precision(build_index(items), queries).map, 1.0);
    EXPECT_THROW(mean_average_precision(build_index(items), std::vector<IndexEntry>{}), ArgumentError);
}

TEST(MeanAveragePrecision, FlagsQueriesWithoutRelevantItems) {
    const std::vector<IndexEntry> items{{0, 0, code_of(2, 0)}, {1, 1, code_of(2, 3)}};
    const auto r = mean_average_precision(build_index(items), items);
    EXPECT_EQ(r.map, 0.0);
    EXPECT_EQ(r.queries_without_relevant, 2u);
}

TEST(MeanAveragePrecision, ThreadCountAndTopk) {
    Xoshiro256pp rng(6);
    const auto items = random_entries(rng, 600, 64, 5);
    const auto idx = build_index(items);
    const auto a = mean_average_precision(idx, items, {std::nullopt, 1});
    const auto b = mean_average_precision(idx, items, {std::nullopt, 4});
    EXPECT_EQ(a.map, b.map);
    EXPECT_GE(a.map, 0.0);
    EXPECT_LE(a.map, 1.0);
    const auto top = mean_average_precision(idx, items, {std::size_t{10}, 1});
    EXPECT_GE(top.map, 0.0);
    EXPECT_LE(top.map, 1.0);
}

TEST(Query, ScanOf100kIsFast) {
    Xoshiro256pp rng(7);
    std::vector<IndexEntry> items;
    for (std::uint64_t i = 0; i < 100000; ++i) items.push_back({i, 0, random_code(rng, 128)});
    const auto idx = build_index(std::move(items));
    const auto code = random_code(rng, 128);
    auto best = std::chrono::duration<double, std::milli>::max();
    for (int rep = 0; rep < 3; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = query(idx, code);
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0));
        ASSERT_EQ(r.size(), 100000u);
    }
    EXPECT_LT(best.count(), 50.0);
}

} // namespace
} // namespace mpcahash
