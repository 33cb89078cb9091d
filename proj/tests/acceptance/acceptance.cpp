// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "mpcahash/mpcahash.hpp"
#include "../test_util.hpp"

using namespace mpcahash;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Weighted CCR of the reference per-mode CCR rows.
Outcome weighted_ccr_rows() {
    struct Row {
        std::array<double, 3> ccrs;
        double expected;
    };
    const Row rows[] = {{{0.852, 0.854, 0.914}, 0.911}, {{0.906, 0.909, 0.951}, 0.949}, {{0.925, 0.927, 0.975}, 0.972}};
    bool ok = true;
    std::string detail;
    for (const auto& r : rows) {
        const double w = weighted_ccr(r.ccrs, {6, 6, 256});
        const bool row_ok = std::abs(w - r.expected) <= 0.0005;
        ok &= row_ok;
        detail += fmt("%.6f vs %.3f %s; ", w, r.expected, row_ok ? "ok" : "OUT OF TOLERANCE");
    }
    return {ok, detail};
}

// 2. Dimension selection by compression rate, and the explicit-dims override.
Outcome dims_by_cr() {
    const Dims in{6, 6, 256};
    bool ok = select_dims_by_cr(in, 1.0 / 3.0) == Dims{2, 2, 85} && select_dims_by_cr(in, 0.5) == Dims{3, 3, 128} &&
              select_dims_by_cr(in, 2.0 / 3.0) == Dims{4, 4, 171};
    const auto ds = gen_synthetic({2, 3, in, 0.3, 1});
    PipelineConfig cfg;
    cfg.dims = Dims{4, 4, 170};
    cfg.bits = 64;
    const auto rep = run_pipeline(cfg, ds);
    ok &= rep.dims == std::vector<std::size_t>{4, 4, 170};
    const auto f = select_dims_by_cr(in, 2.0 / 3.0);
    return {ok, fmt("cr=2/3 formula (%zu,%zu,%zu), override (%zu,%zu,%zu)", f[0], f[1], f[2], rep.dims[0], rep.dims[1],
                    rep.dims[2])};
}

// 3. Scatter matrices vs brute force, traces vs total scatter, lossless full projection.
Outcome mpca_suite() {
    double worst_scatter = 0.0, worst_trace = 0.0, worst_proj = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Xoshiro256pp rng(1000 + seed);
        const Dims d{1 + rng.next() % 4, 1 + rng.next() % 4, 1 + rng.next() % 5};
        const std::size_t n = 2 + rng.next() % 19;
        std::vector<FeatureTensor> xs;
        for (std::size_t i = 0; i < n; ++i) xs.push_back(test::random_tensor(rng, d, 1.0 + seed % 3));
        const auto [centered, mean] = center(xs);

        double total = 0.0;
        for (const auto& x : centered) total += frobenius_norm_sq(x);
        for (int k = 1; k <= 3; ++k) {
            const Matrix s = scatter_matrix(centered, mode_from_int(k));
            worst_scatter = std::max(worst_scatter, test::rel_max_diff(s, test::scatter_oracle(centered, k)));
            double tr = 0.0;
            for (std::size_t i = 0; i < s.rows(); ++i) tr += s(i, i);
            worst_trace = std::max(worst_trace, test::rel_diff(tr, total));
        }

        const auto model = fit(xs, d);
        double projected = 0.0;
        for (const auto& x : xs) {
            auto y = project(model, x);
            projected += frobenius_norm_sq(y);
        }
        worst_proj = std::max(worst_proj, test::rel_diff(projected, total));
    }
    return {worst_scatter <= 1e-9 && worst_trace <= 1e-9 && worst_proj <= 1e-4,
            fmt("scatter %.2e, trace %.2e, projection %.2e", worst_scatter, worst_trace, worst_proj)};
}

// 4. On (1,1,m) data the mode-3 MPCA spectrum is the PCA spectrum.
Outcome pca_equivalence() {
    Xoshiro256pp rng(4);
    std::vector<FeatureTensor> xs;
    std::vector<Vector> vs;
    for (int i = 0; i < 100; ++i) {
        xs.push_back(test::random_tensor(rng, {1, 1, 16}, 1.0 + i % 5));
        vs.push_back(vectorize(xs.back()));
    }
    const auto m = fit(xs, {1, 1, 16});
    const auto p = fit_pca(vs, PcaSelection::dims(16));
    double worst = 0.0;
    for (std::size_t i = 0; i < 16; ++i)
        worst = std::max(worst, std::abs(m.spectra[2].values[i] - p.spectrum.values[i]) / p.spectrum.max());
    return {worst <= 1e-8, fmt("max relative spectrum difference %.2e", worst)};
}

// 5. Jacobi eigensolver.
Outcome eigensolver() {
    Xoshiro256pp rng(5);
    double worst = 0.0;
    bool ordered = true, signs = true;
    const auto t0 = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t size = trial < 90 ? 1 + rng.next() % 64 : 256 - 16 * (99 - trial);
        Matrix s(size, size);
        for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = i; j < size; ++j) s(i, j) = s(j, i) = rng.normal();
        const auto e = sym_eig(s);
        double err = 0.0;
        for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = 0; j < size; ++j) {
                double r = 0.0;
                for (std::size_t k = 0; k < size; ++k) r += e.vectors(i, k) * e.spectrum.values[k] * e.vectors(j, k);
                err += (r - s(i, j)) * (r - s(i, j));
            }
        worst = std::max(worst, std::sqrt(err) / frobenius_norm(s));
        for (std::size_t k = 1; k < size; ++k) ordered &= e.spectrum.values[k - 1] >= e.spectrum.values[k];
        for (std::size_t k = 0; k < size; ++k) {
            std::size_t arg = 0;
            for (std::size_t i = 1; i < size; ++i)
                if (std::abs(e.vectors(i, k)) > std::abs(e.vectors(arg, k))) arg = i;
            signs &= e.vectors(arg, k) > 0.0;
        }
    }
    return {worst <= 1e-8 && ordered && signs,
            fmt("max reconstruction %.2e*|S|, descending %s, canonical signs %s, %.1f s", worst, ordered ? "yes" : "no",
                signs ? "yes" : "no", seconds_since(t0))};
}

// 6. Hamming distance / code length estimates angle / pi.
Outcome angle_law() {
    constexpr std::size_t dim = 32, bits = 128, pairs = 10000;
    Xoshiro256pp rng(6);
    bool ok = true;
    std::string detail;
    for (const double theta : {std::numbers::pi / 6, std::numbers::pi / 3, std::numbers::pi / 2}) {
        double sum = 0.0;
        for (std::size_t p = 0; p < pairs; ++p) {
            // Orthonormal (u, w) by Gram-Schmidt, then v = cos(theta) u + sin(theta) w.
            Vector u(dim), w(dim), v(dim);
            for (auto& x : u) x = rng.normal();
            for (auto& x : w) x = rng.normal();
            double uu = 0.0;
            for (double x : u) uu += x * x;
            for (auto& x : u) x /= std::sqrt(uu);
            double uw = 0.0;
            for (std::size_t i = 0; i < dim; ++i) uw += u[i] * w[i];
            double ww = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                w[i] -= uw * u[i];
                ww += w[i] * w[i];
            }
            for (std::size_t i = 0; i < dim; ++i) v[i] = std::cos(theta) * u[i] + std::sin(theta) * w[i] / std::sqrt(ww);
            const auto h = fit_hash(dim, bits, 7000 + p);
            sum += static_cast<double>(hamming(encode(h, u), encode(h, v))) / bits;
        }
        const double mean = sum / pairs;
        ok &= std::abs(mean - theta / std::numbers::pi) < 0.03;
        detail += fmt("%.4f vs %.4f; ", mean, theta / std::numbers::pi);
    }
    return {ok, detail};
}

// 7. AP definition, query order, and MAP against an independent oracle.
Outcome retrieval_definitions() {
    const bool ap_ok = average_precision({true, false, true}).value == 5.0 / 6.0;

    Xoshiro256pp rng(7);
    std::vector<IndexEntry> items;
    for (std::uint64_t i = 0; i < 1000; ++i)
        items.push_back({(i * 7919) % 1000, std::uint32_t(i % 5), BinaryCode(64, {rng.next() & rng.next()})});
    const auto idx = build_index(items);
    bool order_ok = true;
    for (int q = 0; q < 20; ++q) {
        const BinaryCode code(64, {rng.next()});
        std::vector<std::pair<std::size_t, std::uint64_t>> oracle;
        for (const auto& it : items) oracle.push_back({std::popcount(it.code.words[0] ^ code.words[0]), it.id});
        std::sort(oracle.begin(), oracle.end());
        const auto got = query(idx, code);
        for (std::size_t r = 0; r < got.size(); ++r) order_ok &= got[r].distance == oracle[r].first && got[r].id == oracle[r].second;
    }

    const auto ds = gen_synthetic({5, 20, {2, 2, 3}, 1.5, 7});
    const auto h = fit_hash(12, 16, 3);
    std::vector<IndexEntry> coded;
    for (const auto& it : ds.items) coded.push_back({it.id, it.label, encode(h, vectorize(it.tensor))});
    const auto map = mean_average_precision(build_index(coded), coded).map;
    // Oracle: full pairwise distances, sort by (distance, id), AP by definition.
    double oracle_sum = 0.0;
    for (const auto& q : coded) {
        std::vector<std::tuple<std::size_t, std::uint64_t, bool>> rows;
        for (const auto& o : coded)
            if (o.id != q.id) rows.push_back({hamming(q.code, o.code), o.id, o.label == q.label});
        std::sort(rows.begin(), rows.end());
        double hits = 0.0, ap = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (std::get<2>(rows[r])) ap += ++hits / double(r + 1);
        oracle_sum += hits > 0 ? ap / hits : 0.0;
    }
    const double oracle = oracle_sum / coded.size();
    const double diff = std::abs(map - oracle);
    return {ap_ok && order_ok && diff <= 1e-12,
            fmt("AP([1,0,1]) exact %s, ordering %s, MAP %.6f vs oracle %.6f (diff %.1e)", ap_ok ? "yes" : "no",
                order_ok ? "matches" : "DIFFERS", map, oracle, diff)};
}

// 8. Longer codes do not hurt, and MPCA at cr 0.5 retrieves the clusters.
Outcome synthetic_trend() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto ds = gen_synthetic({5, 200, {6, 6, 16}, 0.3, seed});
        PipelineConfig cfg;
        cfg.cr = 0.5;
        cfg.seed = seed;
        cfg.bits = 64;
        const double m64 = run_pipeline(cfg, ds).map;
        cfg.bits = 128;
        const double m128 = run_pipeline(cfg, ds).map;
        ok &= m128 >= m64 - 0.01 && m128 >= 0.90;
        detail += fmt("seed %llu: MAP64 %.4f MAP128 %.4f; ", static_cast<unsigned long long>(seed), m64, m128);
    }
    return {ok, detail};
}

// 9. Formats round-trip byte-for-byte; reports repeat across runs and thread counts.
Outcome determinism() {
    const auto ds = gen_synthetic({3, 30, {4, 3, 5}, 0.5, 9});
    const auto model = fit(ds.tensors(), {2, 2, 3});
    std::vector<Vector> vs;
    for (const auto& it : ds.items) vs.push_back(vectorize(it.tensor));
    const auto pca = fit_pca(vs, PcaSelection::dims(6));
    const auto hash = fit_hash(60, 100, 9);
    std::vector<IndexEntry> coded;
    for (const auto& it : ds.items) coded.push_back({it.id, it.label, encode(hash, vectorize(it.tensor))});
    const auto idx = build_index(coded);

    bool formats = encode_features(decode_features(encode_features(ds))) == encode_features(ds) &&
                   decode_features(encode_features(ds)) == ds;
    formats &= decode_mpca_model(encode_model(model)) == model && encode_model(decode_mpca_model(encode_model(model))) == encode_model(model);
    formats &= decode_pca_model(encode_model(pca)) == pca && encode_model(decode_pca_model(encode_model(pca))) == encode_model(pca);
    formats &= decode_hash_model(encode_model(hash)) == hash && encode_model(decode_hash_model(encode_model(hash))) == encode_model(hash);
    formats &= decode_index(encode_index(idx)) == idx && encode_index(decode_index(encode_index(idx))) == encode_index(idx);

    auto stable = [](const Report& r) {
        auto kv = parse_key_value(r.to_key_value());
        kv.erase("fit_ms");
        kv.erase("query_ms");
        return kv;
    };
    bool reports = true;
    for (const Method method : {Method::Mpca, Method::Pca}) {
        PipelineConfig cfg;
        cfg.method = method;
        cfg.cr = 0.5;
        cfg.bits = 64;
        cfg.seed = 3;
        const auto a = stable(run_pipeline(cfg, ds));
        const auto b = stable(run_pipeline(cfg, ds));
        cfg.threads = 8;
        const auto c = stable(run_pipeline(cfg, ds));
        reports &= a == b && a == c;
    }
    return {formats && reports, fmt("formats %s, reports %s", formats ? "identical" : "DIFFER", reports ? "identical" : "DIFFER")};
}

// 10. Single-threaded exhaustive 128-bit scan over 1e5 entries.
Outcome throughput() {
    Xoshiro256pp rng(10);
    std::vector<IndexEntry> items;
    items.reserve(100000);
    for (std::uint64_t i = 0; i < 100000; ++i) items.push_back({i, std::uint32_t(i % 10), BinaryCode(128, {rng.next(), rng.next()})});
    const auto idx = build_index(std::move(items));
    const BinaryCode q(128, {rng.next(), rng.next()});
    double best = 1e9;
    for (int rep = 0; rep < 5; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = query(idx, q, QueryOptions{std::nullopt, 1});
        const double ms = 1000.0 * seconds_since(t0);
        if (r.size() != 100000) return {false, "wrong result size"};
        best = std::min(best, ms);
    }
    return {best < 50.0, fmt("%.2f ms (best of 5)", best)};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"weighted CCR of reference per-mode rows", weighted_ccr_rows},
        {"dims by compression rate + explicit override", dims_by_cr},
        {"MPCA scatter/trace/projection suite", mpca_suite},
        {"PCA equals MPCA mode 3 on (1,1,16)", pca_equivalence},
        {"Jacobi eigensolver", eigensolver},
        {"LSH angle law", angle_law},
        {"retrieval definitions", retrieval_definitions},
        {"synthetic MAP trend", synthetic_trend},
        {"determinism and formats", determinism},
        {"128-bit scan throughput", throughput},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu  %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed ? 1 : 0;
}
