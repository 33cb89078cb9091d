#pragma once

// Binary file formats. Every file starts with a 4-byte magic and a u32 version
// (currently 1); all integers and floats are little-endian.
//
//   MPFT  features   u32 N, u32 I1, I2, I3, then N x { u64 id, u32 label, f32[I1*I2*I3] }
//   MPCM  MPCA model u32 I1, I2, I3, u32 d1, d2, d3, f64 mean[I1*I2*I3],
//                    f64 V1[I1*d1], V2[I2*d2], V3[I3*d3] (row-major), f64 spectra[I1], [I2], [I3]
//   PCAM  PCA model  u32 in_dim, u32 out_dim, f64 mean[in_dim], f64 components[in_dim*out_dim],
//                    f64 spectrum[in_dim]
//   LSH1  hash model u32 dim, u32 bits, u64 seed, u64 FNV-1a checksum of the regenerated hyperplanes
//   MPIX  index      u32 bits, u32 N, then N x { u64 id, u32 label, u64 words[ceil(bits/64)] }, ids ascending
//
// Readers report the offset of the first byte they could not accept.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpcahash/dataset.hpp"
#include "mpcahash/error.hpp"
#include "mpcahash/hashing.hpp"
#include "mpcahash/mpca.hpp"
#include "mpcahash/pca.hpp"
#include "mpcahash/retrieval.hpp"

namespace mpcahash {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint32_t format_version = 1;

namespace io_detail {

class Writer {
public:
    explicit Writer(const char (&magic)[5]) {
        bytes_.insert(bytes_.end(), magic, magic + 4);
        u32(format_version);
    }

    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void f64s(std::span<const double> vs) {
        for (double v : vs) f64(v);
    }
    void count(std::size_t v, const char* what) {
        if (v > 0xffffffffULL) throw CapacityError(std::string(what) + " does not fit in 32 bits");
        u32(static_cast<std::uint32_t>(v));
    }

    Bytes take() { return std::move(bytes_); }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, const char (&magic)[5], const char* format)
        : bytes_(bytes), format_(format) {
        if (bytes_.size() < 4 || std::memcmp(bytes_.data(), magic, 4) != 0)
            fail("bad magic, expected \"" + std::string(magic) + "\"", 0);
        pos_ = 4;
        const auto at = pos_;
        if (u32() != format_version) fail("unsupported version", at);
    }

    [[nodiscard]] std::uint64_t pos() const noexcept { return pos_; }

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    float f32() {
        const auto at = pos_;
        const float v = std::bit_cast<float>(static_cast<std::uint32_t>(le(4)));
        if (!std::isfinite(v)) fail("non-finite value", at);
        return v;
    }
    double f64() {
        const auto at = pos_;
        const double v = std::bit_cast<double>(le(8));
        if (!std::isfinite(v)) fail("non-finite value", at);
        return v;
    }
    std::vector<double> f64s(std::size_t n) {
        need(n * 8);
        std::vector<double> out(n);
        for (auto& v : out) v = f64();
        return out;
    }

    /// Reads a u32 that must lie in [lo, hi].
    std::uint32_t u32_in(std::uint32_t lo, std::uint32_t hi, const char* what) {
        const auto at = pos_;
        const auto v = u32();
        if (v < lo || v > hi)
            fail(std::string(what) + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]",
                 at);
        return v;
    }

    void need(unsigned __int128 n) {
        if (n > bytes_.size() - pos_) fail("truncated file", bytes_.size());
    }

    void finish() {
        if (pos_ != bytes_.size()) fail("trailing bytes", pos_);
    }

    [[noreturn]] void fail(const std::string& msg, std::uint64_t at) const {
        throw FormatError(std::string(format_) + ": " + msg, at);
    }

private:
    std::uint64_t le(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::uint64_t>(n);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    const char* format_;
    std::uint64_t pos_ = 0;
};

inline Dims read_dims(Reader& r) {
    Dims d{};
    for (auto& x : d) x = r.u32_in(1, 0xffffffffu, "dimension");
    return d;
}

// Element count of d without 64-bit overflow.
inline unsigned __int128 wide_volume(const Dims& d) {
    return static_cast<unsigned __int128>(d[0]) * d[1] * d[2];
}

} // namespace io_detail

/// Writes `bytes` to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---- MPFT ------------------------------------------------------------------

inline constexpr std::uint64_t feature_header_bytes = 24;

inline std::uint64_t feature_record_bytes(const Dims& d) { return 12 + 4 * volume(d); }

inline Bytes encode_features(const FeatureDataset& ds) {
    validate(ds);
    io_detail::Writer w("MPFT");
    w.count(ds.items.size(), "item count");
    for (auto x : ds.dims) w.count(x, "dimension");
    for (const auto& it : ds.items) {
        w.u64(it.id);
        w.u32(it.label);
        for (float v : it.tensor.data()) w.f32(v);
    }
    return w.take();
}

inline FeatureDataset decode_features(std::span<const std::uint8_t> bytes) {
    io_detail::Reader r(bytes, "MPFT", "MPFT");
    const auto n = r.u32();
    FeatureDataset ds;
    ds.dims = io_detail::read_dims(r);
    r.need(static_cast<unsigned __int128>(n) * (12 + 4 * io_detail::wide_volume(ds.dims)));
    ds.items.reserve(n);
    std::unordered_set<std::uint64_t> seen;
    const std::size_t vol = volume(ds.dims);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto at = r.pos();
        FeatureItem it;
        it.id = r.u64();
        if (!seen.insert(it.id).second) r.fail("duplicate id " + std::to_string(it.id), at);
        it.label = r.u32();
        std::vector<float> data(vol);
        for (auto& v : data) v = r.f32();
        it.tensor = FeatureTensor(ds.dims, std::move(data));
        ds.items.push_back(std::move(it));
    }
    r.finish();
    return ds;
}

inline void write_features(const FeatureDataset& ds, const std::filesystem::path& path) {
    write_file_atomic(path, encode_features(ds));
}
inline FeatureDataset read_features(const std::filesystem::path& path) { return decode_features(read_file(path)); }

// ---- MPCM ------------------------------------------------------------------

inline Bytes encode_model(const MpcaModel& m) {
    io_detail::Writer w("MPCM");
    for (auto x : m.in_dims) w.count(x, "dimension");
    for (auto x : m.out_dims) w.count(x, "dimension");
    w.f64s(m.mean.data());
    for (const auto& v : m.projections) w.f64s(v.data());
    for (const auto& s : m.spectra) w.f64s(s.values);
    return w.take();
}

inline MpcaModel decode_mpca_model(std::span<const std::uint8_t> bytes) {
    io_detail::Reader r(bytes, "MPCM", "MPCM");
    MpcaModel m;
    m.in_dims = io_detail::read_dims(r);
    for (std::size_t k = 0; k < 3; ++k)
        m.out_dims[k] = r.u32_in(1, static_cast<std::uint32_t>(m.in_dims[k]), "output dimension");
    unsigned __int128 payload = io_detail::wide_volume(m.in_dims);
    for (std::size_t k = 0; k < 3; ++k)
        payload += static_cast<unsigned __int128>(m.in_dims[k]) * m.out_dims[k] + m.in_dims[k];
    r.need(payload * 8);
    m.mean = Tensor3<double>(m.in_dims, r.f64s(volume(m.in_dims)));
    for (std::size_t k = 0; k < 3; ++k)
        m.projections[k] = Matrix(m.in_dims[k], m.out_dims[k], r.f64s(m.in_dims[k] * m.out_dims[k]));
    for (std::size_t k = 0; k < 3; ++k) m.spectra[k].values = r.f64s(m.in_dims[k]);
    r.finish();
    return m;
}

// ---- PCAM ------------------------------------------------------------------

inline Bytes encode_model(const PcaModel& m) {
    io_detail::Writer w("PCAM");
    w.count(m.in_dim, "input dimension");
    w.count(m.out_dim, "output dimension");
    w.f64s(m.mean);
    w.f64s(m.components.data());
    w.f64s(m.spectrum.values);
    return w.take();
}

inline PcaModel decode_pca_model(std::span<const std::uint8_t> bytes) {
    io_detail::Reader r(bytes, "PCAM", "PCAM");
    PcaModel m;
    m.in_dim = r.u32_in(1, 0xffffffffu, "input dimension");
    m.out_dim = r.u32_in(1, static_cast<std::uint32_t>(m.in_dim), "output dimension");
    r.need(static_cast<unsigned __int128>(m.in_dim) * (m.out_dim + 2) * 8);
    m.mean = r.f64s(m.in_dim);
    m.components = Matrix(m.in_dim, m.out_dim, r.f64s(m.in_dim * m.out_dim));
    m.spectrum.values = r.f64s(m.in_dim);
    r.finish();
    return m;
}

// ---- LSH1 ------------------------------------------------------------------

inline Bytes encode_model(const HashModel& m) {
    io_detail::Writer w("LSH1");
    w.count(m.dim, "hash dimension");
    w.count(m.bits, "hash bits");
    w.u64(m.seed);
    w.u64(hyperplane_checksum(m));
    return w.take();
}

/// Regenerates the hyperplanes from (dim, bits, seed) and checks them against
/// the stored checksum.
inline HashModel decode_hash_model(std::span<const std::uint8_t> bytes) {
    io_detail::Reader r(bytes, "LSH1", "LSH1");
    const auto dim = r.u32_in(1, 0xffffffffu, "hash dimension");
    const auto bits = r.u32_in(1, 0xffffffffu, "hash bits");
    if (dim > max_hash_entries / bits) r.fail("hash model exceeds the hyperplane size limit", 8);
    const auto seed = r.u64();
    const auto at = r.pos();
    const auto checksum = r.u64();
    r.finish();
    auto m = fit_hash(dim, bits, seed);
    if (hyperplane_checksum(m) != checksum) r.fail("hyperplane checksum mismatch", at);
    return m;
}

// ---- MPIX ------------------------------------------------------------------

inline std::uint64_t index_record_bytes(std::size_t bits) { return 12 + 8 * BinaryCode::word_count(bits); }

inline Bytes encode_index(const RetrievalIndex& index) {
    io_detail::Writer w("MPIX");
    w.count(index.bits(), "code bits");
    w.count(index.size(), "entry count");
    for (std::size_t i = 0; i < index.size(); ++i) {
        w.u64(index.id(i));
        w.u32(index.label(i));
        for (std::size_t j = 0; j < index.words_per_code(); ++j) w.u64(index.code_words(i)[j]);
    }
    return w.take();
}

inline RetrievalIndex decode_index(std::span<const std::uint8_t> bytes) {
    io_detail::Reader r(bytes, "MPIX", "MPIX");
    const auto bits = r.u32_in(1, 0xffffffffu, "code bits");
    const auto n = r.u32_in(1, 0xffffffffu, "entry count");
    r.need(static_cast<unsigned __int128>(n) * index_record_bytes(bits));
    const std::size_t words = BinaryCode::word_count(bits);
    std::vector<IndexEntry> items;
    items.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto at = r.pos();
        IndexEntry e;
        e.id = r.u64();
        if (!items.empty() && e.id <= items.back().id) r.fail("ids not strictly ascending", at);
        e.label = r.u32();
        std::vector<std::uint64_t> w(words);
        for (std::size_t j = 0; j < words; ++j) {
            const auto wat = r.pos();
            w[j] = r.u64();
            if (j + 1 == words && bits % 64 != 0 && (w[j] >> (bits % 64)) != 0)
                r.fail("code has bits set past its length", wat);
        }
        e.code = BinaryCode(bits, std::move(w));
        items.push_back(std::move(e));
    }
    r.finish();
    return build_index(std::move(items));
}

inline void write_model(const MpcaModel& m, const std::filesystem::path& p) { write_file_atomic(p, encode_model(m)); }
inline void write_model(const PcaModel& m, const std::filesystem::path& p) { write_file_atomic(p, encode_model(m)); }
inline void write_model(const HashModel& m, const std::filesystem::path& p) { write_file_atomic(p, encode_model(m)); }
inline void write_index(const RetrievalIndex& i, const std::filesystem::path& p) {
    write_file_atomic(p, encode_index(i));
}
inline MpcaModel read_mpca_model(const std::filesystem::path& p) { return decode_mpca_model(read_file(p)); }
inline PcaModel read_pca_model(const std::filesystem::path& p) { return decode_pca_model(read_file(p)); }
inline HashModel read_hash_model(const std::filesystem::path& p) { return decode_hash_model(read_file(p)); }
inline RetrievalIndex read_index(const std::filesystem::path& p) { return decode_index(read_file(p)); }

/// The 4-byte magic of a file's contents, or "" when shorter than 4 bytes.
inline std::string sniff_magic(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) return {};
    return std::string(reinterpret_cast<const char*>(bytes.data()), 4);
}

} // namespace mpcahash
