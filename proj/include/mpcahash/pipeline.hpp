#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mpcahash/dataset.hpp"
#include "mpcahash/error.hpp"
#include "mpcahash/hashing.hpp"
#include "mpcahash/mpca.hpp"
#include "mpcahash/pca.hpp"
#include "mpcahash/retrieval.hpp"
#include "mpcahash/tensor.hpp"

namespace mpcahash {

enum class Method { Mpca, Pca };

inline const char* to_string(Method m) { return m == Method::Mpca ? "mpca" : "pca"; }

/// Reduction selector plus hashing and evaluation settings. Exactly one of
/// cr / dims / target_ccr / out_dim is set; dims applies to MPCA and out_dim
/// to PCA.
struct PipelineConfig {
    Method method = Method::Mpca;
    std::optional<double> cr;
    std::optional<Dims> dims;
    std::optional<double> target_ccr;
    std::optional<std::size_t> out_dim;
    std::size_t bits = 128;
    std::uint64_t seed = 0;
    std::optional<std::size_t> topk;
    unsigned threads = 1;
};

inline void validate(const PipelineConfig& c) {
    const int set = int(c.cr.has_value()) + int(c.dims.has_value()) + int(c.target_ccr.has_value()) +
                    int(c.out_dim.has_value());
    if (set != 1) throw ArgumentError("exactly one of cr, dims, target_ccr, out_dim must be set");
    if (c.method == Method::Mpca && c.out_dim) throw ArgumentError("out_dim applies to the pca method only");
    if (c.method == Method::Pca && c.dims) throw ArgumentError("per-mode dims apply to the mpca method only");
    if (c.bits < 1) throw ArgumentError("bits must be at least 1");
    if (c.topk && *c.topk < 1) throw ArgumentError("topk must be at least 1");
}

/// Pipeline summary. Serialized as `key=value` lines with fixed key names.
struct Report {
    Method method = Method::Mpca;
    std::size_t items = 0;
    Dims in_dims{};
    std::vector<std::size_t> dims; ///< (d1, d2, d3) for MPCA, (out_dim) for PCA
    std::array<double, 3> ccrs{};  ///< per-mode CCR; PCA repeats its single CCR in all three
    double ccr_w = 0.0;
    std::size_t bits = 0;
    std::uint64_t seed = 0;
    double map = 0.0;
    std::size_t queries_without_relevant = 0;
    double fit_ms = 0.0;
    double query_ms = 0.0;

    /// Ordered (key, value) pairs. Reals use 17 significant digits.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> fields() const {
        auto real = [](double v) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        auto list = [](const auto& xs) {
            std::string s;
            for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
            return s;
        };
        return {{"method", to_string(method)},
                {"items", std::to_string(items)},
                {"in_dims", list(in_dims)},
                {"dims", list(dims)},
                {"ccr1", real(ccrs[0])},
                {"ccr2", real(ccrs[1])},
                {"ccr3", real(ccrs[2])},
                {"ccr_w", real(ccr_w)},
                {"bits", std::to_string(bits)},
                {"seed", std::to_string(seed)},
                {"map", real(map)},
                {"queries_without_relevant", std::to_string(queries_without_relevant)},
                {"fit_ms", real(fit_ms)},
                {"query_ms", real(query_ms)}};
    }

    [[nodiscard]] std::string to_key_value(const std::string& prefix = "") const {
        std::string out;
        for (const auto& [k, v] : fields()) out += prefix + k + "=" + v + "\n";
        return out;
    }

    [[nodiscard]] std::string to_text() const {
        std::ostringstream os;
        os.precision(4);
        os << "method          " << to_string(method) << "\n";
        os << "items           " << items << "\n";
        os << "reduced dims    ";
        for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? " x " : "") << dims[i];
        os << "\n";
        if (method == Method::Mpca)
            os << "mode CCRs       " << 100 * ccrs[0] << "% " << 100 * ccrs[1] << "% " << 100 * ccrs[2] << "%\n";
        os << "weighted CCR    " << 100 * ccr_w << "%\n";
        os << "code length     " << bits << " bits\n";
        os << "MAP             " << 100 * map << "%\n";
        os << "fit             " << fit_ms << " ms\n";
        os << "evaluation      " << query_ms << " ms\n";
        return os.str();
    }
};

/// Parses `key=value` lines; blank lines and lines starting with '#' are skipped.
inline std::map<std::string, std::string> parse_key_value(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ArgumentError("report line without '=': " + line);
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

/// An error tagged with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

namespace pipeline_detail {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

} // namespace pipeline_detail

/// Reduced feature vectors for every item plus the reduction summary.
struct Reduction {
    std::vector<Vector> vectors;
    std::vector<std::size_t> dims;
    std::array<double, 3> ccrs{};
    double ccr_w = 0.0;
};

inline Reduction reduce_mpca(const FeatureDataset& ds, const PipelineConfig& cfg) {
    using pipeline_detail::stage;
    const ReductionOptions ropt{cfg.threads};
    const auto samples = ds.tensors();
    MpcaModel model = stage("fit", [&] {
        if (cfg.target_ccr) {
            auto full = fit(samples, ds.dims, ropt);
            Dims d{};
            for (std::size_t k = 0; k < 3; ++k) d[k] = select_dim_for_ccr(full.spectra[k], *cfg.target_ccr);
            return truncate(full, d);
        }
        const Dims d = cfg.dims ? *cfg.dims : select_dims_by_cr(ds.dims, *cfg.cr);
        return fit(samples, d, ropt);
    });
    Reduction r;
    r.dims.assign(model.out_dims.begin(), model.out_dims.end());
    stage("fit", [&] {
        r.ccrs = mode_ccrs(model);
        r.ccr_w = weighted_ccr(r.ccrs, model.in_dims);
    });
    r.vectors.resize(samples.size());
    stage("project", [&] {
        for_each_chunk(samples.size(), cfg.threads,
                       [&](std::size_t i) { r.vectors[i] = vectorize(project(model, samples[i])); });
    });
    return r;
}

inline Reduction reduce_pca(const FeatureDataset& ds, const PipelineConfig& cfg) {
    using pipeline_detail::stage;
    std::vector<Vector> input;
    input.reserve(ds.items.size());
    for (const auto& it : ds.items) input.push_back(vectorize(it.tensor));
    const std::size_t in_dim = volume(ds.dims);
    PcaModel model = stage("fit", [&] {
        PcaSelection sel;
        if (cfg.target_ccr) sel = PcaSelection::ccr(*cfg.target_ccr);
        else if (cfg.out_dim) sel = PcaSelection::dims(*cfg.out_dim);
        else sel = PcaSelection::dims(select_dims_by_cr({1, 1, in_dim}, *cfg.cr)[2]);
        return fit_pca(input, sel, ReductionOptions{cfg.threads});
    });
    Reduction r;
    r.dims = {model.out_dim};
    const double c = stage("fit", [&] { return ccr(model.spectrum, model.out_dim); });
    r.ccrs = {c, c, c};
    r.ccr_w = c;
    r.vectors.resize(input.size());
    stage("project", [&] {
        for_each_chunk(input.size(), cfg.threads, [&](std::size_t i) { r.vectors[i] = project_pca(model, input[i]); });
    });
    return r;
}

/// Fit -> project -> hash -> index -> MAP with every item as a query.
inline Report run_pipeline(const PipelineConfig& cfg, const FeatureDataset& ds) {
    using pipeline_detail::elapsed_ms;
    using pipeline_detail::stage;
    stage("config", [&] {
        validate(cfg);
        validate(ds);
        if (ds.items.size() < 2) throw ArgumentError("dataset needs at least 2 items");
    });

    const auto t0 = std::chrono::steady_clock::now();
    Reduction red = cfg.method == Method::Mpca ? reduce_mpca(ds, cfg) : reduce_pca(ds, cfg);
    const double fit_ms = elapsed_ms(t0);

    const HashModel hash = stage("hash", [&] { return fit_hash(red.vectors.front().size(), cfg.bits, cfg.seed); });
    std::vector<IndexEntry> entries(ds.items.size());
    stage("encode", [&] {
        for_each_chunk(entries.size(), cfg.threads, [&](std::size_t i) {
            entries[i] = {ds.items[i].id, ds.items[i].label, encode(hash, red.vectors[i])};
        });
    });
    const RetrievalIndex index = stage("index", [&] { return build_index(entries); });

    const auto t1 = std::chrono::steady_clock::now();
    const MapResult map =
        stage("eval", [&] { return mean_average_precision(index, entries, EvalOptions{cfg.topk, cfg.threads}); });

    Report rep;
    rep.method = cfg.method;
    rep.items = ds.items.size();
    rep.in_dims = ds.dims;
    rep.dims = red.dims;
    rep.ccrs = red.ccrs;
    rep.ccr_w = red.ccr_w;
    rep.bits = cfg.bits;
    rep.seed = cfg.seed;
    rep.map = map.map;
    rep.queries_without_relevant = map.queries_without_relevant;
    rep.fit_ms = fit_ms;
    rep.query_ms = elapsed_ms(t1);
    return rep;
}

/// Runs the MPCA configuration, then PCA at the weighted CCR the MPCA run
/// reached, with the same hash length and seed.
inline std::pair<Report, Report> run_comparison(const PipelineConfig& mpca_cfg, const FeatureDataset& ds) {
    if (mpca_cfg.method != Method::Mpca) throw ArgumentError("run_comparison expects an mpca configuration");
    Report mpca = run_pipeline(mpca_cfg, ds);
    PipelineConfig pca_cfg = mpca_cfg;
    pca_cfg.method = Method::Pca;
    pca_cfg.cr.reset();
    pca_cfg.dims.reset();
    pca_cfg.target_ccr = std::min(1.0, mpca.ccr_w);
    Report pca = run_pipeline(pca_cfg, ds);
    return {std::move(mpca), std::move(pca)};
}

} // namespace mpcahash
