#ifndef LBAL_SYNTH_HPP
#define LBAL_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "embedding_store.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace lbal {

/// Isotropic Gaussian blobs, one per class.
struct BlobSpec {
    std::vector<std::size_t> per_class_counts;
    std::size_t dim = 16;
    double center_scale = 10.0;  // centers uniform in [-scale, scale]^dim
    double sigma = 0.1;
    std::uint64_t seed = 0;

    std::size_t classes() const { return per_class_counts.size(); }

    static BlobSpec balanced(std::size_t classes, std::size_t per_class, std::size_t dim, double scale, double sigma,
                             std::uint64_t seed) {
        return {std::vector<std::size_t>(classes, per_class), dim, scale, sigma, seed};
    }

    void validate() const {
        if (per_class_counts.empty()) throw ArgumentError("blob spec needs at least one class");
        for (auto c : per_class_counts)
            if (c == 0) throw ArgumentError("every class needs at least one example");
        if (dim == 0) throw ArgumentError("dimension must be positive");
        if (!(sigma > 0.0) || !(center_scale > 0.0)) throw ArgumentError("sigma and center_scale must be positive");
    }
};

struct LabeledSet {
    EmbeddingMatrix features;
    LabelVector labels;
};

inline std::vector<double> make_blob_centers(const BlobSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<double> centers(spec.classes() * spec.dim);
    for (auto& v : centers) v = (2.0 * rng.uniform01() - 1.0) * spec.center_scale;
    return centers;
}

/// Draws counts[c] points around center c, grouped by class, then shuffles
/// the rows with the same generator.
inline LabeledSet sample_blobs(std::span<const double> centers, std::span<const std::size_t> counts, std::size_t dim,
                               double sigma, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    std::vector<float> rows;
    rows.reserve(n * dim);
    std::vector<std::int32_t> labels;
    labels.reserve(n);
    for (std::size_t c = 0; c < counts.size(); ++c)
        for (std::size_t r = 0; r < counts[c]; ++r) {
            for (std::size_t j = 0; j < dim; ++j)
                rows.push_back(static_cast<float>(centers[c * dim + j] + sigma * rng.normal()));
            labels.push_back(static_cast<std::int32_t>(c));
        }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
    std::vector<float> shuffled(n * dim);
    std::vector<std::int32_t> shuffled_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(perm[i] * dim), dim,
                    shuffled.begin() + static_cast<std::ptrdiff_t>(i * dim));
        shuffled_labels[i] = labels[perm[i]];
    }
    return {EmbeddingMatrix(n, dim, std::move(shuffled)),
            LabelVector(std::move(shuffled_labels), static_cast<std::uint32_t>(counts.size()))};
}

inline LabeledSet make_blobs(const BlobSpec& spec) {
    const auto centers = make_blob_centers(spec);
    return sample_blobs(centers, spec.per_class_counts, spec.dim, spec.sigma, derive_seed(spec.seed, 1));
}

/// Train set from `spec` plus a held-out set drawn around the same centers.
inline std::pair<LabeledSet, LabeledSet> make_blob_split(const BlobSpec& spec, std::span<const std::size_t> test_counts) {
    if (test_counts.size() != spec.classes()) throw ArgumentError("test counts need one entry per class");
    const auto centers = make_blob_centers(spec);
    return {sample_blobs(centers, spec.per_class_counts, spec.dim, spec.sigma, derive_seed(spec.seed, 1)),
            sample_blobs(centers, test_counts, spec.dim, spec.sigma, derive_seed(spec.seed, 2))};
}

/// Long-tail class sizes: round(max * (min/max)^(t)) with t = (c/(C-1))^exponent,
/// so class 0 has max_count and class C-1 has min_count.
inline std::vector<std::size_t> make_longtail(std::size_t classes, std::size_t max_count, std::size_t min_count,
                                              double exponent = 1.0) {
    if (classes == 0 || min_count == 0 || max_count < min_count)
        throw ArgumentError("long-tail profile needs C >= 1 and max >= min >= 1");
    std::vector<std::size_t> counts(classes, max_count);
    const double ratio = static_cast<double>(min_count) / static_cast<double>(max_count);
    for (std::size_t c = 1; c < classes; ++c) {
        const double t = std::pow(static_cast<double>(c) / static_cast<double>(classes - 1), exponent);
        counts[c] = static_cast<std::size_t>(std::llround(static_cast<double>(max_count) * std::pow(ratio, t)));
    }
    return counts;
}

}  // namespace lbal

#endif  // LBAL_SYNTH_HPP
