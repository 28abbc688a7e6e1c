#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include <lbal/metrics.hpp>
#include <lbal/strategies.hpp>
#include <lbal/synth.hpp>
#include <lbal/verify/oracles.hpp>

using namespace lbal;

namespace {

void expect_valid(const SelectionResult& s, std::size_t n) {
    EXPECT_NO_THROW(s.validate(n));
    const std::set<std::size_t> uniq(s.indices.begin(), s.indices.end());
    EXPECT_EQ(uniq.size(), s.indices.size());
}

std::set<std::size_t> as_set(std::span<const std::size_t> v) { return {v.begin(), v.end()}; }

LabeledSet blobs(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
    return make_blobs(BlobSpec::balanced(classes, per_class, 16, 10.0, 0.1, seed));
}

}  // namespace

TEST(BudgetSchedule, Validation) {
    EXPECT_THROW(BudgetSchedule(std::vector<std::size_t>{}), ArgumentError);
    EXPECT_THROW(BudgetSchedule({0}), ArgumentError);
    EXPECT_THROW(BudgetSchedule({10, 10}), ArgumentError);
    EXPECT_THROW(BudgetSchedule({10, 5}), ArgumentError);
    const BudgetSchedule s({10, 20, 50});
    EXPECT_EQ(s.delta(0), 10u);
    EXPECT_EQ(s.delta(2), 30u);
    EXPECT_THROW(s.check_pool(49), ArgumentError);
}

TEST(StrategyNames, ParseAliases) {
    EXPECT_EQ(parse_strategy("kmeans"), Strategy::kmeans_single);
    EXPECT_EQ(parse_strategy("kmeans-multi"), Strategy::kmeans_multi);
    EXPECT_EQ(parse_strategy("uniform_capped"), Strategy::uniform_capped);
    EXPECT_THROW(parse_strategy("vaal"), ArgumentError);
}

TEST(Random, ExhaustionAndDeterminism) {
    auto s = select_random(5, 5, 3);
    expect_valid(s, 5);
    EXPECT_EQ(as_set(s.indices), (std::set<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_EQ(select_random(100, 10, 9), select_random(100, 10, 9));
    EXPECT_NE(select_random(100, 10, 9).indices, select_random(100, 10, 10).indices);
    EXPECT_THROW(select_random(10, 0, 0), ArgumentError);
    EXPECT_THROW(select_random(10, 11, 0), ArgumentError);
}

TEST(Random, CoverageMatchesClosedForm) {
    // balanced pool, C = 10, 100 per class
    std::vector<std::int32_t> y(1000);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::int32_t>(i % 10);
    const LabelVector labels(y);
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) sum += category_coverage(select_random(1000, 10, s), labels);
    EXPECT_NEAR(sum / 1000.0, verify::expected_random_coverage(10, 10), 2.0);
    EXPECT_NEAR(verify::expected_random_coverage(10, 10), 65.13, 0.01);
}

TEST(Uniform, OnePerClass) {
    const LabelVector labels({0, 0, 1, 1, 2, 2});
    const auto s = select_uniform(labels, 1, 0, false);
    expect_valid(s, 6);
    ASSERT_EQ(s.size(), 3u);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(labels[s.indices[c]], static_cast<std::int32_t>(c));
    EXPECT_EQ(category_coverage(s, labels), 100.0);
}

TEST(Uniform, CappedAndUncapped) {
    const LabelVector labels({0, 0, 0, 1});
    const auto capped = select_uniform(labels, 2, 0, true);
    EXPECT_EQ(capped.size(), 3u);
    EXPECT_EQ(per_class_counts(capped.indices, labels), (std::vector<std::size_t>{2, 1}));
    EXPECT_EQ(capped.strategy, "uniform_capped");
    try {
        (void)select_uniform(labels, 2, 0, false);
        FAIL();
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
    }
}

TEST(KMeansSingle, OnePerBlob) {
    const auto data = blobs(8, 30, 4);
    StrategyConfig cfg;
    cfg.seed = 4;
    const auto s = select_kmeans_single(data.features, 8, cfg);
    expect_valid(s, data.features.rows());
    EXPECT_EQ(category_coverage(s, data.labels), 100.0);
    EXPECT_EQ(s.budget_schedule, std::vector<std::size_t>{8});
}

TEST(KMeansSingle, BudgetEqualsPool) {
    const auto data = blobs(3, 4, 1);
    const auto s = select_kmeans_single(data.features, 12, {});
    EXPECT_EQ(as_set(s.indices).size(), 12u);
}

TEST(KMeansSingle, NormalizedFeatureSpace) {
    const auto data = blobs(5, 20, 2);
    StrategyConfig cfg;
    cfg.normalize_features = true;
    const auto s = select_kmeans_single(data.features, 5, cfg);
    expect_valid(s, data.features.rows());
}

TEST(KMeansMulti, SingleRoundEqualsSingleBatch) {
    const auto data = blobs(6, 20, 5);
    StrategyConfig cfg;
    cfg.seed = 21;
    EXPECT_EQ(select_kmeans_multi(data.features, BudgetSchedule({9}), cfg).indices,
              select_kmeans_single(data.features, 9, cfg).indices);
}

TEST(KMeansMulti, HandTracedThreePoints) {
    const EmbeddingMatrix m(3, 2, {0, 0, 0.1f, 0, 10, 10});
    // global mean of the three points; both rounds cluster the full pool with k = 1
    const double mx = (0.0 + double(0.1f) + 10.0) / 3.0, my = 10.0 / 3.0;
    std::vector<double> d2(3);
    const double px[3] = {0.0, double(0.1f), 10.0}, py[3] = {0.0, 0.0, 10.0};
    for (int i = 0; i < 3; ++i) d2[i] = (px[i] - mx) * (px[i] - mx) + (py[i] - my) * (py[i] - my);
    ASSERT_LT(d2[1], d2[0]);
    ASSERT_LT(d2[0], d2[2]);
    const auto s = select_kmeans_multi(m, BudgetSchedule({1, 2}), {});
    EXPECT_EQ(s.indices, (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(s.round_boundaries, (std::vector<std::size_t>{1, 2}));
}

TEST(KMeansMulti, RoundsDisjointForBothVariants) {
    const auto data = blobs(10, 30, 6);
    for (bool unlabeled_only : {false, true}) {
        StrategyConfig cfg;
        cfg.seed = 2;
        cfg.recluster_unlabeled_only = unlabeled_only;
        const auto s = select_kmeans_multi(data.features, BudgetSchedule({10, 20, 50}), cfg);
        expect_valid(s, data.features.rows());
        EXPECT_EQ(s.size(), 50u);
        EXPECT_EQ(s.round_boundaries, (std::vector<std::size_t>{10, 20, 50}));
    }
}

TEST(KMeansMulti, AddingRoundsKeepsEarlierRounds) {
    const auto data = blobs(5, 20, 8);
    StrategyConfig cfg;
    cfg.seed = 5;
    const auto short_run = select_kmeans_multi(data.features, BudgetSchedule({5, 10}), cfg);
    const auto long_run = select_kmeans_multi(data.features, BudgetSchedule({5, 10, 20}), cfg);
    EXPECT_TRUE(std::equal(short_run.indices.begin(), short_run.indices.end(), long_run.indices.begin()));
}

TEST(Coreset, FarthestFirstOnALine) {
    const EmbeddingMatrix m(3, 1, {0, 1, 10});
    const SelectionResult initial{"manual", 0, {1}, {1}, {0}};
    const auto s = select_coreset(m, BudgetSchedule({2}), initial, {});
    EXPECT_EQ(s.indices, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(s.budget_schedule, (std::vector<std::size_t>{1, 2}));
}

TEST(Coreset, ExhaustsPoolAndRejectsOverBudget) {
    const auto data = blobs(3, 5, 3);
    const auto initial = select_random(15, 2, 0);
    const auto s = select_coreset(data.features, BudgetSchedule({15}), initial, {});
    EXPECT_EQ(as_set(s.indices).size(), 15u);
    EXPECT_THROW(select_coreset(data.features, BudgetSchedule({16}), initial, {}), ArgumentError);
    EXPECT_THROW(select_coreset(data.features, BudgetSchedule({1}), initial, {}), ArgumentError);
    EXPECT_THROW(select_coreset(data.features, BudgetSchedule({5}), SelectionResult{}, {}), ArgumentError);
}

TEST(Coreset, GreedyStepIsOptimal) {
    for (std::uint64_t t = 0; t < 40; ++t) {
        Rng rng(t);
        const std::size_t n = 30 + rng.uniform_below(40), d = 1 + rng.uniform_below(4);
        std::vector<float> v(n * d);
        for (auto& x : v) x = static_cast<float>(rng.uniform_below(3));  // many ties
        const EmbeddingMatrix m(n, d, v);
        const auto initial = select_random(n, 3, t);
        const auto s = select_coreset(m, BudgetSchedule({3, 8, 15}), initial, {});
        verify::Points pts(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) pts[i][j] = m(i, j);
        std::vector<std::size_t> chosen(s.indices.begin(), s.indices.begin() + 3);
        for (std::size_t k = 3; k < s.size(); ++k) {
            EXPECT_EQ(s.indices[k], verify::farthest_point(pts, chosen));
            chosen.push_back(s.indices[k]);
        }
    }
}

TEST(Entropy, Values) {
    const std::vector<double> uniform(4, 0.25);
    EXPECT_NEAR(shannon_entropy(uniform), std::log(4.0), 1e-12);
    EXPECT_EQ(shannon_entropy(std::vector<double>{0, 1, 0}), 0.0);
}

TEST(Entropy, TopEntropyHandComputed) {
    // H = 0.693, 0.325, 0.637
    const ProbabilityMatrix p{3, 2, {0.5, 0.5, 0.9, 0.1, 1.0 / 3, 2.0 / 3}};
    const std::vector<std::size_t> cand{0, 1, 2};
    EXPECT_EQ(top_entropy(p, cand, 1), std::vector<std::size_t>{0});
    EXPECT_EQ(top_entropy(p, cand, 3), (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Entropy, TiesGoToLowestIndexAndOneHotIsLast) {
    const ProbabilityMatrix p{4, 2, {1, 0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}};
    const std::vector<std::size_t> cand{3, 7, 5, 9};
    EXPECT_EQ(top_entropy(p, cand, 3), (std::vector<std::size_t>{5, 7, 9}));
}

TEST(MaxEntropy, AddsDeltaPerRound) {
    const auto data = make_blobs(BlobSpec::balanced(4, 25, 8, 5.0, 1.0, 3));
    const auto initial = select_uniform(data.labels, 2, 0, false);
    StrategyConfig cfg;
    cfg.probe.epochs = 10;
    cfg.probe.milestones = {5, 8};
    cfg.probe.batch_size = 4;
    const auto s = select_max_entropy(data.features, BudgetSchedule({8, 12, 20}), initial, data.labels, cfg);
    expect_valid(s, data.features.rows());
    EXPECT_EQ(s.round_boundaries, (std::vector<std::size_t>{8, 12, 20}));
    EXPECT_EQ(s, select_max_entropy(data.features, BudgetSchedule({8, 12, 20}), initial, data.labels, cfg));
}

TEST(MaxEntropy, SingleClassPoolIsDegenerate) {
    const auto data = make_blobs(BlobSpec::balanced(2, 10, 4, 5.0, 1.0, 1));
    std::vector<std::size_t> same_class;
    for (std::size_t i = 0; i < 20 && same_class.size() < 3; ++i)
        if (data.labels[i] == 0) same_class.push_back(i);
    const SelectionResult initial{"manual", 0, {3}, {3}, same_class};
    EXPECT_THROW(select_max_entropy(data.features, BudgetSchedule({5}), initial, data.labels, {}), DegenerateModelError);
}

TEST(UniformKMeans, MatchesSingleBatchOnSeparatedBlobs) {
    const auto data = blobs(7, 20, 9);
    StrategyConfig cfg;
    cfg.seed = 9;
    const auto a = select_uniform_kmeans(data.features, 7, 1, cfg);
    const auto b = select_kmeans_single(data.features, 7, cfg);
    EXPECT_EQ(as_set(a.indices), as_set(b.indices));
}

TEST(UniformKMeans, ExhaustionAndShortfall) {
    const auto data = blobs(3, 4, 2);
    StrategyConfig cfg;
    EXPECT_EQ(as_set(select_uniform_kmeans(data.features, 3, 4, cfg).indices).size(), 12u);

    // a singleton cluster at 100 cannot give 2 members; one index comes from the fallback
    const EmbeddingMatrix m(5, 1, {0, 0.1f, 0.2f, 0.3f, 100});
    const auto s = select_uniform_kmeans(m, 2, 2, cfg);
    expect_valid(s, 5);
    EXPECT_EQ(s.size(), 4u);
    EXPECT_TRUE(as_set(s.indices).contains(4));
}

TEST(Properties, BlobCoverageDominance) {
    double random_sum = 0.0;
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto data = blobs(12, 30, s);
        StrategyConfig cfg;
        cfg.seed = s;
        EXPECT_EQ(category_coverage(select_kmeans_single(data.features, 12, cfg), data.labels), 100.0);
        random_sum += category_coverage(select_random(data.features.rows(), 12, s), data.labels);
    }
    EXPECT_LT(random_sum / 40.0, 75.0);
}
