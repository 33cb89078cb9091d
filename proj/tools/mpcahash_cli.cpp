// Command-line front end: gen, fit, project, hash-fit, encode, index, query,
// eval and pipeline. Exit status 0 on success, 1 on usage errors, 2 when a
// file is malformed or a numerical step fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpcahash/mpcahash.hpp"

namespace {

using namespace mpcahash;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Dims parse_dims(const std::string& text) {
    Dims d{};
    std::stringstream in(text);
    std::string part;
    std::size_t k = 0;
    while (std::getline(in, part, ',')) {
        if (k == 3) throw UsageError("--dims takes three comma-separated values");
        try {
            const long v = std::stol(part);
            if (v < 1) throw UsageError("--dims values must be positive");
            d[k++] = static_cast<std::size_t>(v);
        } catch (const std::logic_error&) {
            throw UsageError("--dims: cannot parse '" + part + "'");
        }
    }
    if (k != 3) throw UsageError("--dims takes three comma-separated values");
    return d;
}

void write_text(const std::string& path, const std::string& text) {
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    write_file_atomic(path, bytes);
}

std::vector<Vector> vectorized(const FeatureDataset& ds) {
    std::vector<Vector> out;
    out.reserve(ds.items.size());
    for (const auto& it : ds.items) out.push_back(vectorize(it.tensor));
    return out;
}

std::vector<IndexEntry> entries_of(const RetrievalIndex& idx) {
    std::vector<IndexEntry> out;
    out.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out.push_back(idx.entry(i));
    return out;
}

struct Selection {
    std::optional<double> cr;
    std::string dims;
    std::optional<double> target_ccr;
    std::optional<std::size_t> out_dim;

    void add_to(CLI::App* cmd) {
        auto* a = cmd->add_option("--cr", cr, "compression rate applied to every mode, in (0, 1]");
        auto* b = cmd->add_option("--dims", dims, "explicit reduced dims d1,d2,d3 (mpca)");
        auto* c = cmd->add_option("--target-ccr", target_ccr, "smallest dims reaching this cumulative contribution rate");
        auto* d = cmd->add_option("--out-dim", out_dim, "number of principal components (pca)");
        a->excludes(b)->excludes(c)->excludes(d);
        b->excludes(c)->excludes(d);
        c->excludes(d);
    }

    void apply(PipelineConfig& cfg) const {
        if (cr) cfg.cr = *cr;
        if (!dims.empty()) cfg.dims = parse_dims(dims);
        if (target_ccr) cfg.target_ccr = *target_ccr;
        if (out_dim) cfg.out_dim = *out_dim;
        if (int(cfg.cr.has_value()) + int(cfg.dims.has_value()) + int(cfg.target_ccr.has_value()) +
                int(cfg.out_dim.has_value()) != 1)
            throw UsageError("give exactly one of --cr, --dims, --target-ccr, --out-dim");
        if (cfg.method == Method::Pca && cfg.dims) throw UsageError("--dims applies to --method mpca; use --out-dim");
        if (cfg.method == Method::Mpca && cfg.out_dim) throw UsageError("--out-dim applies to --method pca");
    }
};

Method parse_method(const std::string& m) {
    if (m == "mpca") return Method::Mpca;
    if (m == "pca") return Method::Pca;
    throw UsageError("--method must be mpca or pca");
}

int cmd_gen(const SyntheticSpec& spec, const std::string& out) {
    const auto ds = gen_synthetic(spec);
    write_features(ds, out);
    std::cout << "wrote " << ds.items.size() << " items of dims " << to_string(ds.dims) << " to " << out << "\n";
    return 0;
}

int cmd_fit(const std::string& features, const std::string& method, const Selection& sel, unsigned threads,
            const std::string& out) {
    PipelineConfig cfg;
    cfg.method = parse_method(method);
    sel.apply(cfg);
    const auto ds = read_features(features);
    validate(ds);
    const ReductionOptions opt{threads};
    if (cfg.method == Method::Mpca) {
        const auto samples = ds.tensors();
        MpcaModel model;
        if (cfg.target_ccr) {
            auto full = fit(samples, ds.dims, opt);
            Dims d{};
            for (std::size_t k = 0; k < 3; ++k) d[k] = select_dim_for_ccr(full.spectra[k], *cfg.target_ccr);
            model = truncate(full, d);
        } else {
            model = fit(samples, cfg.dims ? *cfg.dims : select_dims_by_cr(ds.dims, *cfg.cr), opt);
        }
        write_model(model, out);
        const auto ccrs = mode_ccrs(model);
        std::printf("dims=%zu,%zu,%zu\nccr1=%.6f\nccr2=%.6f\nccr3=%.6f\nccr_w=%.6f\n", model.out_dims[0],
                    model.out_dims[1], model.out_dims[2], ccrs[0], ccrs[1], ccrs[2], weighted_ccr(ccrs, model.in_dims));
    } else {
        const std::size_t in_dim = volume(ds.dims);
        PcaSelection s = cfg.target_ccr ? PcaSelection::ccr(*cfg.target_ccr)
                         : cfg.out_dim  ? PcaSelection::dims(*cfg.out_dim)
                                        : PcaSelection::dims(select_dims_by_cr({1, 1, in_dim}, *cfg.cr)[2]);
        const auto model = fit_pca(vectorized(ds), s, opt);
        write_model(model, out);
        std::printf("dims=%zu\nccr=%.6f\n", model.out_dim, ccr(model.spectrum, model.out_dim));
    }
    return 0;
}

int cmd_project(const std::string& model_path, const std::string& features, const std::string& out) {
    const Bytes model_bytes = read_file(model_path);
    const auto ds = read_features(features);
    FeatureDataset projected;
    if (sniff_magic(model_bytes) == "PCAM") {
        const auto model = decode_pca_model(model_bytes);
        projected.dims = {1, 1, model.out_dim};
        for (const auto& it : ds.items) {
            const auto y = project_pca(model, vectorize(it.tensor));
            projected.items.push_back({it.id, it.label, FeatureTensor(projected.dims, std::vector<float>(y.begin(), y.end()))});
        }
    } else {
        const auto model = decode_mpca_model(model_bytes);
        projected.dims = model.out_dims;
        for (const auto& it : ds.items)
            projected.items.push_back({it.id, it.label, tensor_cast<float>(project(model, it.tensor))});
    }
    write_features(projected, out);
    std::cout << "projected " << projected.items.size() << " items to dims " << to_string(projected.dims) << "\n";
    return 0;
}

int cmd_hash_fit(std::optional<std::size_t> dim, const std::string& features, std::size_t bits, std::uint64_t seed,
                 const std::string& out) {
    if (!dim && features.empty()) throw UsageError("hash-fit needs --dim or --features");
    const std::size_t d = dim ? *dim : volume(read_features(features).dims);
    const auto model = fit_hash(d, bits, seed);
    write_model(model, out);
    std::printf("dim=%zu\nbits=%zu\nseed=%llu\nchecksum=%016llx\n", model.dim, model.bits,
                static_cast<unsigned long long>(seed), static_cast<unsigned long long>(hyperplane_checksum(model)));
    return 0;
}

int cmd_encode(const std::string& hash_path, const std::string& features, const std::string& out) {
    const auto model = read_hash_model(hash_path);
    const auto ds = read_features(features);
    std::vector<IndexEntry> entries;
    entries.reserve(ds.items.size());
    for (const auto& it : ds.items) entries.push_back({it.id, it.label, encode(model, vectorize(it.tensor))});
    write_index(build_index(std::move(entries)), out);
    std::cout << "encoded " << ds.items.size() << " items with " << model.bits << "-bit codes\n";
    return 0;
}

int cmd_index(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<IndexEntry> all;
    for (const auto& p : inputs) {
        const auto part = entries_of(read_index(p));
        all.insert(all.end(), part.begin(), part.end());
    }
    const auto idx = build_index(std::move(all));
    write_index(idx, out);
    std::cout << "index of " << idx.size() << " entries, " << idx.bits() << " bits\n";
    return 0;
}

int cmd_query(const std::string& index_path, const std::string& queries_path, std::optional<std::size_t> topk,
              unsigned threads) {
    const auto idx = read_index(index_path);
    const auto queries = read_index(queries_path);
    std::cout << "# query_id rank id label distance\n";
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto ranking = query(idx, queries.entry(q).code, QueryOptions{topk, threads});
        for (std::size_t r = 0; r < ranking.size(); ++r)
            std::cout << queries.id(q) << ' ' << r + 1 << ' ' << ranking[r].id << ' ' << ranking[r].label << ' '
                      << ranking[r].distance << '\n';
    }
    return 0;
}

int cmd_eval(const std::string& index_path, const std::string& queries_path, std::optional<std::size_t> topk,
             unsigned threads, const std::string& report) {
    const auto idx = read_index(index_path);
    const auto queries = entries_of(read_index(queries_path));
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = mean_average_precision(idx, queries, EvalOptions{topk, threads});
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    char buf[256];
    std::snprintf(buf, sizeof buf, "bits=%zu\nqueries=%zu\nmap=%.17g\nqueries_without_relevant=%zu\nquery_ms=%.17g\n",
                  idx.bits(), r.queries, r.map, r.queries_without_relevant, ms);
    std::cout << buf;
    if (!report.empty()) write_text(report, buf);
    return 0;
}

int cmd_pipeline(const std::string& features, const std::string& method, const Selection& sel, std::size_t bits,
                 std::uint64_t seed, std::optional<std::size_t> topk, unsigned threads, const std::string& report) {
    PipelineConfig cfg;
    cfg.method = method == "both" ? Method::Mpca : parse_method(method);
    cfg.bits = bits;
    cfg.seed = seed;
    cfg.topk = topk;
    cfg.threads = threads;
    sel.apply(cfg);
    const auto ds = read_features(features);
    std::string kv;
    if (method == "both") {
        const auto [mpca, pca] = run_comparison(cfg, ds);
        std::cout << mpca.to_text() << "\n" << pca.to_text();
        kv = mpca.to_key_value("mpca.") + pca.to_key_value("pca.");
    } else {
        const auto rep = run_pipeline(cfg, ds);
        std::cout << rep.to_text();
        kv = rep.to_key_value();
    }
    if (!report.empty()) write_text(report, kv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilinear PCA + LSH binary-code image retrieval"};
    app.require_subcommand(1);
    unsigned threads = 1;
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));

    SyntheticSpec spec;
    std::string gen_dims = "6,6,16", out;
    auto* gen = app.add_subcommand("gen", "generate a synthetic clustered feature dataset (MPFT)");
    gen->add_option("--classes", spec.num_classes)->capture_default_str();
    gen->add_option("--per-class", spec.per_class)->capture_default_str();
    gen->add_option("--dims", gen_dims, "tensor dims I1,I2,I3")->capture_default_str();
    gen->add_option("--noise", spec.noise)->capture_default_str();
    gen->add_option("--seed", spec.seed)->capture_default_str();
    gen->add_option("--out", out)->required();

    std::string features, method = "mpca", model_path;
    Selection fit_sel;
    auto* fitc = app.add_subcommand("fit", "fit an MPCA (MPCM) or PCA (PCAM) model");
    fitc->add_option("--features", features)->required();
    fitc->add_option("--method", method, "mpca or pca")->capture_default_str();
    fit_sel.add_to(fitc);
    fitc->add_option("--out", out)->required();

    auto* proj = app.add_subcommand("project", "reduce features with a fitted model (writes MPFT)");
    proj->add_option("--model", model_path)->required();
    proj->add_option("--features", features)->required();
    proj->add_option("--out", out)->required();

    std::optional<std::size_t> hash_dim;
    std::size_t bits = 128;
    std::uint64_t seed = 0;
    auto* hfit = app.add_subcommand("hash-fit", "create a random-hyperplane hash model (LSH1)");
    hfit->add_option("--dim", hash_dim, "input vector length");
    hfit->add_option("--features", features, "take the input length from a projected MPFT file");
    hfit->add_option("--bits", bits)->capture_default_str();
    hfit->add_option("--seed", seed)->capture_default_str();
    hfit->add_option("--out", out)->required();

    std::string hash_path;
    auto* enc = app.add_subcommand("encode", "hash projected features into binary codes (MPIX)");
    enc->add_option("--hash", hash_path)->required();
    enc->add_option("--features", features)->required();
    enc->add_option("--out", out)->required();

    std::vector<std::string> code_files;
    auto* idxc = app.add_subcommand("index", "merge code files into one canonical index (MPIX)");
    idxc->add_option("--codes", code_files)->required();
    idxc->add_option("--out", out)->required();

    std::string index_path, queries_path, report;
    std::optional<std::size_t> topk;
    auto* qry = app.add_subcommand("query", "rank the index by Hamming distance for each query code");
    qry->add_option("--index", index_path)->required();
    qry->add_option("--queries", queries_path)->required();
    qry->add_option("--topk", topk);

    auto* ev = app.add_subcommand("eval", "mean average precision of query codes against an index");
    ev->add_option("--index", index_path)->required();
    ev->add_option("--queries", queries_path)->required();
    ev->add_option("--topk", topk);
    ev->add_option("--report", report, "write key=value results here");

    Selection pipe_sel;
    std::string pipe_method = "mpca";
    auto* pipe = app.add_subcommand("pipeline", "fit, project, hash, index and evaluate in one run");
    pipe->add_option("--features", features)->required();
    pipe->add_option("--method", pipe_method, "mpca, pca, or both")->capture_default_str();
    pipe_sel.add_to(pipe);
    pipe->add_option("--bits", bits)->capture_default_str();
    pipe->add_option("--seed", seed)->capture_default_str();
    pipe->add_option("--topk", topk);
    pipe->add_option("--report", report, "write key=value results here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) {
            spec.dims = parse_dims(gen_dims);
            return cmd_gen(spec, out);
        }
        if (*fitc) return cmd_fit(features, method, fit_sel, threads, out);
        if (*proj) return cmd_project(model_path, features, out);
        if (*hfit) return cmd_hash_fit(hash_dim, features, bits, seed, out);
        if (*enc) return cmd_encode(hash_path, features, out);
        if (*idxc) return cmd_index(code_files, out);
        if (*qry) return cmd_query(index_path, queries_path, topk, threads);
        if (*ev) return cmd_eval(index_path, queries_path, topk, threads, report);
        if (*pipe) return cmd_pipeline(features, pipe_method, pipe_sel, bits, seed, topk, threads, report);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
