#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <lbal/metrics.hpp>
#include <lbal/strategies.hpp>
#include <lbal/synth.hpp>

using namespace lbal;

TEST(LongTail, Profiles) {
    EXPECT_EQ(make_longtail(2, 50, 3), (std::vector<std::size_t>{50, 3}));
    EXPECT_EQ(make_longtail(3, 100, 4), (std::vector<std::size_t>{100, 20, 4}));
    EXPECT_EQ(make_longtail(4, 7, 7), (std::vector<std::size_t>(4, 7)));
    EXPECT_EQ(make_longtail(1, 9, 2), std::vector<std::size_t>{9});
    const auto lt = make_longtail(10, 128, 5);
    EXPECT_EQ(lt.front(), 128u);
    EXPECT_EQ(lt.back(), 5u);
    for (std::size_t c = 1; c < lt.size(); ++c) EXPECT_LE(lt[c], lt[c - 1]);
    EXPECT_THROW(make_longtail(3, 2, 5), ArgumentError);
}

TEST(Blobs, ShapeAndLabels) {
    const BlobSpec spec{{3, 1, 5}, 4, 10.0, 0.5, 7};
    const auto data = make_blobs(spec);
    EXPECT_EQ(data.features.rows(), 9u);
    EXPECT_EQ(data.features.cols(), 4u);
    EXPECT_EQ(data.labels.num_classes(), 3u);
    EXPECT_EQ(per_class_counts(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8}, data.labels),
              (std::vector<std::size_t>{3, 1, 5}));
}

TEST(Blobs, Deterministic) {
    const auto spec = BlobSpec::balanced(4, 10, 3, 5.0, 1.0, 11);
    const auto a = make_blobs(spec), b = make_blobs(spec);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    auto other = spec;
    other.seed = 12;
    EXPECT_FALSE(make_blobs(other).features == a.features);
}

TEST(Blobs, DegenerateSigmaGivesDistinctCenters) {
    const auto data = make_blobs(BlobSpec::balanced(6, 1, 3, 10.0, 1e-6, 2));
    std::set<std::vector<float>> rows;
    for (std::size_t i = 0; i < 6; ++i) rows.emplace(data.features.row(i).begin(), data.features.row(i).end());
    EXPECT_EQ(rows.size(), 6u);
}

TEST(Blobs, ClassMeansNearCenters) {
    const auto spec = BlobSpec::balanced(3, 400, 5, 10.0, 2.0, 5);
    const auto centers = make_blob_centers(spec);
    const auto data = make_blobs(spec);
    std::vector<double> mean(3 * 5, 0.0);
    for (std::size_t i = 0; i < data.features.rows(); ++i)
        for (std::size_t j = 0; j < 5; ++j) mean[data.labels[i] * 5 + j] += data.features(i, j) / 400.0;
    const double bound = 4.5 * 2.0 / std::sqrt(400.0);
    for (std::size_t k = 0; k < mean.size(); ++k) EXPECT_LE(std::abs(mean[k] - centers[k]), bound);
    for (double c : centers) EXPECT_LE(std::abs(c), 10.0);
}

TEST(Blobs, SplitSharesCenters) {
    const auto spec = BlobSpec::balanced(2, 50, 3, 10.0, 0.01, 3);
    const std::vector<std::size_t> test_counts{5, 5};
    const auto [train, test] = make_blob_split(spec, test_counts);
    EXPECT_EQ(test.features.rows(), 10u);
    const auto pred = knn_predict(train.features, train.labels, test.features);
    EXPECT_EQ(top1_accuracy(pred, test.labels.values()), 100.0);
}

TEST(Blobs, SeparabilityGuaranteeForKMeans) {
    // scale/sigma = 20, C = 32, 50 per class, every seed in 0..99
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto data = make_blobs(BlobSpec::balanced(32, 50, 16, 20.0, 1.0, s));
        StrategyConfig cfg;
        cfg.seed = s;
        EXPECT_EQ(category_coverage(select_kmeans_single(data.features, 32, cfg), data.labels), 100.0) << "seed " << s;
    }
}
