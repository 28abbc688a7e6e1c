#ifndef LBAL_STRATEGIES_HPP
#define LBAL_STRATEGIES_HPP

// Sample-selection strategies. Every function is a pure function of its
// inputs and seed. Strategies that must stay label-blind take no labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "classifiers.hpp"
#include "embedding_store.hpp"
#include "errors.hpp"
#include "kmeans.hpp"
#include "rng.hpp"

namespace lbal {

/// Strictly increasing cumulative labeled-set sizes, one per round.
class BudgetSchedule {
public:
    BudgetSchedule() = default;

    explicit BudgetSchedule(std::vector<std::size_t> cumulative) : sizes_(std::move(cumulative)) {
        if (sizes_.empty()) throw ArgumentError("budget schedule needs at least one round");
        for (std::size_t t = 0; t < sizes_.size(); ++t) {
            if (sizes_[t] == 0) throw ArgumentError("budget sizes must be positive");
            if (t > 0 && sizes_[t] <= sizes_[t - 1]) throw ArgumentError("budget schedule must be strictly increasing");
        }
    }

    static BudgetSchedule single(std::size_t budget) { return BudgetSchedule({budget}); }

    const std::vector<std::size_t>& cumulative() const { return sizes_; }
    std::size_t rounds() const { return sizes_.size(); }
    std::size_t total() const { return sizes_.back(); }
    std::size_t delta(std::size_t t) const { return t == 0 ? sizes_[0] : sizes_[t] - sizes_[t - 1]; }

    void check_pool(std::size_t n) const {
        if (total() > n)
            throw ArgumentError("budget " + std::to_string(total()) + " exceeds pool size " + std::to_string(n));
    }

private:
    std::vector<std::size_t> sizes_;
};

enum class Strategy { random, uniform, uniform_capped, kmeans_single, kmeans_multi, coreset, max_entropy, uniform_kmeans };

inline std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::random: return "random";
        case Strategy::uniform: return "uniform";
        case Strategy::uniform_capped: return "uniform_capped";
        case Strategy::kmeans_single: return "kmeans_single";
        case Strategy::kmeans_multi: return "kmeans_multi";
        case Strategy::coreset: return "coreset";
        case Strategy::max_entropy: return "max_entropy";
        case Strategy::uniform_kmeans: return "uniform_kmeans";
    }
    return "unknown";
}

// Accepts canonical names, dashes for underscores, and "kmeans" for kmeans_single.
inline Strategy parse_strategy(std::string name) {
    std::replace(name.begin(), name.end(), '-', '_');
    if (name == "kmeans") return Strategy::kmeans_single;
    for (auto s : {Strategy::random, Strategy::uniform, Strategy::uniform_capped, Strategy::kmeans_single,
                   Strategy::kmeans_multi, Strategy::coreset, Strategy::max_entropy, Strategy::uniform_kmeans})
        if (to_string(s) == name) return s;
    throw ArgumentError("unknown strategy '" + name + "'");
}

inline bool needs_labels(Strategy s) {
    return s == Strategy::uniform || s == Strategy::uniform_capped || s == Strategy::max_entropy;
}

struct StrategyConfig {
    std::uint64_t seed = 0;
    bool normalize_features = false;  // L2-normalize rows before clustering / distances
    bool recluster_unlabeled_only = false;  // multi-round K-means clusters only unselected points
    KMeansOptions kmeans;
    TrainSchedule probe = TrainSchedule::max_entropy();
};

namespace detail {

inline EmbeddingMatrix selection_space(const EmbeddingMatrix& m, const StrategyConfig& cfg) {
    return cfg.normalize_features ? l2_normalize(m) : m;
}

inline SelectionResult make_result(Strategy s, std::uint64_t seed, std::vector<std::size_t> schedule,
                                   std::vector<std::size_t> indices) {
    SelectionResult r;
    r.strategy = std::string(to_string(s));
    r.seed = seed;
    r.round_boundaries = schedule;
    r.budget_schedule = std::move(schedule);
    r.indices = std::move(indices);
    return r;
}

// Cumulative schedule of an iterative strategy whose first round is `initial`.
inline std::vector<std::size_t> with_initial_round(std::size_t initial, const BudgetSchedule& schedule) {
    if (schedule.cumulative().front() < initial)
        throw ArgumentError("first budget " + std::to_string(schedule.cumulative().front()) +
                            " is smaller than the initial pool " + std::to_string(initial));
    std::vector<std::size_t> out{initial};
    for (auto b : schedule.cumulative())
        if (b > initial) out.push_back(b);
    return out;
}

inline void check_initial(const SelectionResult& initial, std::size_t n) {
    if (initial.indices.empty()) throw ArgumentError("iterative strategies need a non-empty initial pool");
    initial.validate(n);
}

}  // namespace detail

/// Seeded Fisher-Yates prefix: position i swaps with i + uniform_below(n - i).
inline SelectionResult select_random(std::size_t n, std::size_t budget, std::uint64_t seed) {
    BudgetSchedule::single(budget).check_pool(n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < budget; ++i) std::swap(perm[i], perm[i + rng.uniform_below(n - i)]);
    perm.resize(budget);
    return detail::make_result(Strategy::random, seed, {budget}, std::move(perm));
}

/// per_class random members of each class, classes in ascending order. With
/// `capped` a class smaller than per_class contributes all its members.
inline SelectionResult select_uniform(const LabelVector& labels, std::size_t per_class, std::uint64_t seed,
                                      bool capped) {
    if (per_class == 0) throw ArgumentError("per_class must be positive");
    std::vector<std::vector<std::size_t>> members(labels.num_classes());
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
    if (!capped)
        for (std::size_t c = 0; c < members.size(); ++c)
            if (members[c].size() < per_class)
                throw ArgumentError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                    " members, fewer than " + std::to_string(per_class));
    Rng rng(seed);
    std::vector<std::size_t> picks;
    for (auto& pool : members) {
        const std::size_t take = std::min(per_class, pool.size());
        for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.uniform_below(pool.size() - i)]);
        picks.insert(picks.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    if (picks.empty()) throw ArgumentError("uniform selection is empty");
    const std::size_t total = picks.size();
    return detail::make_result(capped ? Strategy::uniform_capped : Strategy::uniform, seed, {total}, std::move(picks));
}

/// One K-means run with k = budget; the point nearest each center is picked.
inline SelectionResult select_kmeans_single(const EmbeddingMatrix& m, std::size_t budget, const StrategyConfig& cfg) {
    BudgetSchedule::single(budget).check_pool(m.rows());
    const auto space = detail::selection_space(m, cfg);
    const auto fit = kmeans_fit(space, budget, cfg.seed, cfg.kmeans);
    return detail::make_result(Strategy::kmeans_single, cfg.seed, {budget}, nearest_to_centroids(space, fit.centers));
}

/// Round t clusters with k = the round's budget delta (seed derive_seed(seed, t))
/// and picks the points nearest the new centers that were not picked before.
inline SelectionResult select_kmeans_multi(const EmbeddingMatrix& m, const BudgetSchedule& schedule,
                                           const StrategyConfig& cfg) {
    schedule.check_pool(m.rows());
    const auto space = detail::selection_space(m, cfg);
    std::vector<std::size_t> picked;
    picked.reserve(schedule.total());
    for (std::size_t t = 0; t < schedule.rounds(); ++t) {
        const std::size_t k = schedule.delta(t);
        const std::uint64_t round_seed = derive_seed(cfg.seed, t);
        if (t > 0 && cfg.recluster_unlabeled_only) {
            std::vector<bool> used(m.rows(), false);
            for (auto i : picked) used[i] = true;
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < m.rows(); ++i)
                if (!used[i]) rest.push_back(i);
            const auto sub = space.subset(rest);
            const auto fit = kmeans_fit(sub, k, round_seed, cfg.kmeans);
            for (auto local : nearest_to_centroids(sub, fit.centers)) picked.push_back(rest[local]);
        } else {
            const auto fit = kmeans_fit(space, k, round_seed, cfg.kmeans);
            const auto round = nearest_to_centroids(space, fit.centers, picked);
            picked.insert(picked.end(), round.begin(), round.end());
        }
    }
    return detail::make_result(Strategy::kmeans_multi, cfg.seed, schedule.cumulative(), std::move(picked));
}

/// Greedy k-center: each pick maximizes the Euclidean distance to its nearest
/// already-labeled point (ties -> lowest index). The initial pool is round 0.
inline SelectionResult select_coreset(const EmbeddingMatrix& m, const BudgetSchedule& schedule,
                                      const SelectionResult& initial, const StrategyConfig& cfg) {
    const std::size_t n = m.rows();
    detail::check_initial(initial, n);
    schedule.check_pool(n);
    const auto rounds = detail::with_initial_round(initial.size(), schedule);
    const auto space = detail::selection_space(m, cfg);

    std::vector<std::size_t> picked = initial.indices;
    std::vector<bool> labeled(n, false);
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    auto absorb = [&](std::size_t s) {
        labeled[s] = true;
        parallel_for(0, n, [&](std::size_t i) {
            min_dist[i] = std::min(min_dist[i], squared_distance(space.row(i), space.row(s)));
        });
    };
    for (auto s : picked) absorb(s);

    while (picked.size() < rounds.back()) {
        std::size_t arg = n;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labeled[i]) continue;
            if (min_dist[i] > best) {
                best = min_dist[i];
                arg = i;
            }
        }
        picked.push_back(arg);
        absorb(arg);
    }
    return detail::make_result(Strategy::coreset, cfg.seed, rounds, std::move(picked));
}

/// Shannon entropy in nats; zero-probability terms contribute nothing.
inline double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

// The `count` candidates with highest entropy, ties -> lowest index.
// probabilities.row(r) belongs to candidates[r].
inline std::vector<std::size_t> top_entropy(const ProbabilityMatrix& probabilities,
                                            std::span<const std::size_t> candidates, std::size_t count) {
    if (candidates.size() != probabilities.n) throw ArgumentError("one probability row per candidate required");
    if (count > candidates.size()) throw ArgumentError("not enough candidates for the requested count");
    std::vector<double> h(candidates.size());
    for (std::size_t r = 0; r < candidates.size(); ++r) h[r] = shannon_entropy(probabilities.row(r));
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (h[a] != h[b]) return h[a] > h[b];
        return candidates[a] < candidates[b];
    });
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t r = 0; r < count; ++r) out.push_back(candidates[order[r]]);
    return out;
}

/// Each round retrains a probe from scratch on the labeled set and adds the
/// unlabeled points whose predicted class distribution has highest entropy.
inline SelectionResult select_max_entropy(const EmbeddingMatrix& m, const BudgetSchedule& schedule,
                                          const SelectionResult& initial, const LabelVector& labels_for_training,
                                          const StrategyConfig& cfg) {
    const std::size_t n = m.rows();
    detail::check_initial(initial, n);
    schedule.check_pool(n);
    if (labels_for_training.size() != n) throw DataError("labels do not match the pool size");
    const auto rounds = detail::with_initial_round(initial.size(), schedule);

    std::vector<std::size_t> picked = initial.indices;
    for (std::size_t t = 1; t < rounds.size(); ++t) {
        const auto train_labels = labels_for_training.subset(picked);
        std::vector<bool> present(train_labels.num_classes(), false);
        std::size_t distinct = 0;
        for (auto y : train_labels.values())
            if (!present[static_cast<std::size_t>(y)]) present[static_cast<std::size_t>(y)] = true, ++distinct;
        if (distinct < 2)
            throw DegenerateModelError("round " + std::to_string(t) + ": labeled set has " + std::to_string(distinct) +
                                       " class(es); entropy would be constant");
        const auto model = probe_train(m.subset(picked), train_labels, cfg.probe, derive_seed(cfg.seed, t));

        std::vector<bool> used(n, false);
        for (auto i : picked) used[i] = true;
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < n; ++i)
            if (!used[i]) candidates.push_back(i);
        const auto probs = probe_predict_proba(model, m.subset(candidates));
        const auto round = top_entropy(probs, candidates, rounds[t] - rounds[t - 1]);
        picked.insert(picked.end(), round.begin(), round.end());
    }
    return detail::make_result(Strategy::max_entropy, cfg.seed, rounds, std::move(picked));
}

/// K-means with k = num_classes; from each cluster (ascending center index)
/// the per_cluster members nearest its center. A cluster with too few members
/// gives all of them and the shortfall is filled with the unselected points
/// closest to any center.
inline SelectionResult select_uniform_kmeans(const EmbeddingMatrix& m, std::size_t num_classes, std::size_t per_cluster,
                                             const StrategyConfig& cfg) {
    const std::size_t n = m.rows();
    if (num_classes == 0 || per_cluster == 0) throw ArgumentError("num_classes and per_cluster must be positive");
    const std::size_t budget = num_classes * per_cluster;
    BudgetSchedule::single(budget).check_pool(n);
    const auto space = detail::selection_space(m, cfg);
    const auto fit = kmeans_fit(space, num_classes, cfg.seed, cfg.kmeans);

    auto by_distance = [](std::vector<std::pair<double, std::size_t>>& v) { std::sort(v.begin(), v.end()); };
    std::vector<std::vector<std::pair<double, std::size_t>>> members(num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = fit.assignment[i];
        members[c].emplace_back(squared_distance(space.row(i), fit.centers.row(c)), i);
    }
    std::vector<std::size_t> picked;
    std::vector<bool> used(n, false);
    for (auto& cluster : members) {
        by_distance(cluster);
        for (std::size_t r = 0; r < std::min(per_cluster, cluster.size()); ++r) {
            picked.push_back(cluster[r].second);
            used[cluster[r].second] = true;
        }
    }
    if (picked.size() < budget) {
        std::vector<std::pair<double, std::size_t>> rest;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < num_classes; ++c)
                best = std::min(best, squared_distance(space.row(i), fit.centers.row(c)));
            rest.emplace_back(best, i);
        }
        by_distance(rest);
        for (std::size_t r = 0; picked.size() < budget; ++r) picked.push_back(rest[r].second);
    }
    return detail::make_result(Strategy::uniform_kmeans, cfg.seed, {budget}, std::move(picked));
}

}  // namespace lbal

#endif  // LBAL_STRATEGIES_HPP
