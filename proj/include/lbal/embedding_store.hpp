#ifndef LBAL_EMBEDDING_STORE_HPP
#define LBAL_EMBEDDING_STORE_HPP

// Embedding, label and selection files plus the two feature normalizations.
//
// EMB1 (little-endian):
//   0  "EMB1"   4  u32 version = 1   8  u64 n   16 u32 d
//   20 u8 dtype (1 = f32)   21 three zero bytes   24 n*d f32 row-major
// LBL1 (little-endian):
//   0  "LBL1"   4  u32 version = 1   8  u64 n   16 u32 C (0 = infer)   20 n*i32
// SEL1: JSON {"strategy", "seed", "budget_schedule", "round_boundaries", "indices"}

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace lbal {

/// n x d single-precision feature matrix, validated on construction and
/// immutable afterwards.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    EmbeddingMatrix(std::size_t n, std::size_t d, std::vector<float> data)
        : n_(n), d_(d), data_(std::move(data)) {
        if (n_ == 0 || d_ == 0) throw DataError("embedding matrix must have n >= 1 and d >= 1");
        if (data_.size() != n_ * d_) throw DataError("embedding payload size does not match n*d");
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < d_; ++j)
                if (!std::isfinite(data_[i * d_ + j])) throw DataError("non-finite value", i, j);
    }

    std::size_t rows() const { return n_; }
    std::size_t cols() const { return d_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
    float operator()(std::size_t i, std::size_t j) const { return data_[i * d_ + j]; }
    std::span<const float> values() const { return data_; }

    // Rows `indices` in the given order.
    EmbeddingMatrix subset(std::span<const std::size_t> indices) const {
        std::vector<float> out;
        out.reserve(indices.size() * d_);
        for (auto i : indices) {
            const auto r = row(i);
            out.insert(out.end(), r.begin(), r.end());
        }
        return {indices.size(), d_, std::move(out)};
    }

    friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
        if (a.n_ != b.n_ || a.d_ != b.d_) return false;
        return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
    }

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<float> data_;
};

/// Ground-truth class per pool row.
class LabelVector {
public:
    LabelVector() = default;

    // num_classes == 0 infers C = 1 + max(label).
    explicit LabelVector(std::vector<std::int32_t> labels, std::uint32_t num_classes = 0)
        : labels_(std::move(labels)) {
        std::int32_t max_label = -1;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] < 0) throw DataError("negative label at row " + std::to_string(i));
            max_label = std::max(max_label, labels_[i]);
        }
        if (num_classes == 0) {
            if (labels_.empty()) throw DataError("cannot infer class count from empty labels");
            classes_ = static_cast<std::size_t>(max_label) + 1;
        } else {
            if (static_cast<std::int64_t>(num_classes) <= max_label)
                throw DataError("declared class count " + std::to_string(num_classes) +
                                " <= max label " + std::to_string(max_label));
            classes_ = num_classes;
        }
    }

    std::size_t size() const { return labels_.size(); }
    std::size_t num_classes() const { return classes_; }
    std::int32_t operator[](std::size_t i) const { return labels_[i]; }
    std::span<const std::int32_t> values() const { return labels_; }

    LabelVector subset(std::span<const std::size_t> indices) const {
        std::vector<std::int32_t> out;
        out.reserve(indices.size());
        for (auto i : indices) out.push_back(labels_[i]);
        return LabelVector(std::move(out), static_cast<std::uint32_t>(classes_));
    }

    friend bool operator==(const LabelVector&, const LabelVector&) = default;

private:
    std::vector<std::int32_t> labels_;
    std::size_t classes_ = 0;
};

/// Indices chosen for annotation, in pick order, with the rounds that produced them.
struct SelectionResult {
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<std::size_t> budget_schedule;   // cumulative sizes
    std::vector<std::size_t> round_boundaries;  // end offset of each round in `indices`
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }

    std::span<const std::size_t> prefix(std::size_t count) const {
        return std::span<const std::size_t>(indices).first(std::min(count, indices.size()));
    }

    // Checks the structural invariants; pool_size = 0 skips the range check.
    void validate(std::size_t pool_size = 0) const {
        std::unordered_set<std::size_t> seen;
        for (auto i : indices) {
            if (pool_size != 0 && i >= pool_size)
                throw DataError("selection index " + std::to_string(i) + " out of range");
            if (!seen.insert(i).second) throw DataError("duplicate selection index " + std::to_string(i));
        }
        if (budget_schedule.empty() || budget_schedule.back() != indices.size())
            throw DataError("selection size does not match final budget");
        if (round_boundaries != budget_schedule)
            throw DataError("round boundaries do not match budget schedule");
        if (!std::is_sorted(round_boundaries.begin(), round_boundaries.end()))
            throw DataError("round boundaries must be nondecreasing");
    }

    friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint64_t get_le(std::string_view in, std::size_t off, int bytes) {
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
    return v;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

inline void check_magic(std::string_view bytes, std::string_view magic, std::size_t header_size) {
    if (bytes.size() < magic.size()) throw TruncationError("file shorter than magic");
    if (bytes.substr(0, magic.size()) != magic)
        throw FormatError("bad magic, expected " + std::string(magic));
    if (bytes.size() < header_size) throw TruncationError("truncated header");
    if (get_le(bytes, 4, 4) != 1)
        throw FormatError("unsupported version " + std::to_string(get_le(bytes, 4, 4)));
}

}  // namespace detail

constexpr std::size_t kEmbHeaderSize = 24;
constexpr std::size_t kLblHeaderSize = 20;

inline std::string encode_embeddings(const EmbeddingMatrix& m) {
    std::string out = "EMB1";
    detail::put_le(out, 1, 4);
    detail::put_le(out, m.rows(), 8);
    detail::put_le(out, m.cols(), 4);
    detail::put_le(out, 1, 1);
    detail::put_le(out, 0, 3);
    out.reserve(kEmbHeaderSize + m.values().size() * 4);
    for (float v : m.values()) detail::put_le(out, std::bit_cast<std::uint32_t>(v), 4);
    return out;
}

inline EmbeddingMatrix decode_embeddings(std::string_view bytes) {
    detail::check_magic(bytes, "EMB1", kEmbHeaderSize);
    const std::uint64_t n = detail::get_le(bytes, 8, 8);
    const std::uint64_t d = detail::get_le(bytes, 16, 4);
    if (const auto dtype = detail::get_le(bytes, 20, 1); dtype != 1)
        throw FormatError("unsupported dtype " + std::to_string(dtype));
    if (detail::get_le(bytes, 21, 3) != 0) throw FormatError("nonzero header padding");
    if (n == 0 || d == 0) throw DataError("embedding header declares n or d = 0");
    const std::uint64_t payload = bytes.size() - kEmbHeaderSize;
    if (n > payload / 4 / d) throw TruncationError("payload shorter than n*d floats");
    if (payload != n * d * 4) throw FormatError("trailing bytes after payload");
    std::vector<float> data(n * d);
    for (std::size_t k = 0; k < data.size(); ++k)
        data[k] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(bytes, kEmbHeaderSize + 4 * k, 4)));
    return EmbeddingMatrix(n, d, std::move(data));
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    return decode_embeddings(detail::read_file(path));
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    detail::write_file(path, encode_embeddings(m));
}

// When `explicit_classes` is false the header stores C = 0 and readers infer it.
inline std::string encode_labels(const LabelVector& labels, bool explicit_classes = true) {
    std::string out = "LBL1";
    detail::put_le(out, 1, 4);
    detail::put_le(out, labels.size(), 8);
    detail::put_le(out, explicit_classes ? labels.num_classes() : 0, 4);
    for (auto v : labels.values()) detail::put_le(out, static_cast<std::uint32_t>(v), 4);
    return out;
}

inline LabelVector decode_labels(std::string_view bytes) {
    detail::check_magic(bytes, "LBL1", kLblHeaderSize);
    const std::uint64_t n = detail::get_le(bytes, 8, 8);
    const auto classes = static_cast<std::uint32_t>(detail::get_le(bytes, 16, 4));
    const std::uint64_t payload = bytes.size() - kLblHeaderSize;
    if (n > payload / 4) throw TruncationError("payload shorter than n labels");
    if (payload != n * 4) throw FormatError("trailing bytes after labels");
    std::vector<std::int32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i)
        labels[i] = static_cast<std::int32_t>(static_cast<std::uint32_t>(detail::get_le(bytes, kLblHeaderSize + 4 * i, 4)));
    return LabelVector(std::move(labels), classes);
}

inline LabelVector load_labels(const std::filesystem::path& path) { return decode_labels(detail::read_file(path)); }

inline void save_labels(const LabelVector& labels, const std::filesystem::path& path, bool explicit_classes = true) {
    detail::write_file(path, encode_labels(labels, explicit_classes));
}

inline nlohmann::json to_json(const SelectionResult& s) {
    return {{"strategy", s.strategy},
            {"seed", s.seed},
            {"budget_schedule", s.budget_schedule},
            {"round_boundaries", s.round_boundaries},
            {"indices", s.indices}};
}

inline SelectionResult selection_from_json(const nlohmann::json& j) {
    SelectionResult s;
    try {
        s.strategy = j.at("strategy").get<std::string>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.budget_schedule = j.at("budget_schedule").get<std::vector<std::size_t>>();
        s.round_boundaries = j.at("round_boundaries").get<std::vector<std::size_t>>();
        s.indices = j.at("indices").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed selection document: ") + e.what());
    }
    s.validate();
    return s;
}

inline std::string encode_selection(const SelectionResult& s) { return to_json(s).dump(2) + "\n"; }

inline void save_selection(const SelectionResult& s, const std::filesystem::path& path) {
    detail::write_file(path, encode_selection(s));
}

inline SelectionResult load_selection(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return selection_from_json(j);
}

/// Per-dimension mean and population standard deviation.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

constexpr double kStandardizeEps = 1e-8;

inline NormStats compute_norm_stats(const EmbeddingMatrix& m) {
    const std::size_t n = m.rows(), d = m.cols();
    NormStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += m(i, j);
    for (auto& mu : s.mean) mu /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = m(i, j) - s.mean[j];
            s.stddev[j] += c * c;
        }
    for (auto& sd : s.stddev) sd = std::sqrt(sd / static_cast<double>(n));
    return s;
}

/// (x - mean) / (std + 1e-8) per dimension. Without `stats` they are computed
/// from `m`; pass training stats to transform a test set.
inline std::pair<EmbeddingMatrix, NormStats> standardize(const EmbeddingMatrix& m,
                                                         const std::optional<NormStats>& stats = std::nullopt) {
    NormStats s = stats ? *stats : compute_norm_stats(m);
    if (s.mean.size() != m.cols() || s.stddev.size() != m.cols())
        throw DataError("normalization stats have dimension " + std::to_string(s.mean.size()) +
                        ", matrix has " + std::to_string(m.cols()));
    std::vector<float> out(m.values().size());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out[i * m.cols() + j] = static_cast<float>((m(i, j) - s.mean[j]) / (s.stddev[j] + kStandardizeEps));
    return {EmbeddingMatrix(m.rows(), m.cols(), std::move(out)), std::move(s)};
}

// Unit-norm rows; all-zero rows stay zero.
inline EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
    std::vector<float> out(m.values().begin(), m.values().end());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sq = 0.0;
        for (float v : m.row(i)) sq += static_cast<double>(v) * v;
        if (sq == 0.0) continue;
        const double norm = std::sqrt(sq);
        for (std::size_t j = 0; j < m.cols(); ++j)
            out[i * m.cols() + j] = static_cast<float>(m(i, j) / norm);
    }
    return {m.rows(), m.cols(), std::move(out)};
}

}  // namespace lbal

#endif  // LBAL_EMBEDDING_STORE_HPP
