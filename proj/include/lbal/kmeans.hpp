#ifndef LBAL_KMEANS_HPP
#define LBAL_KMEANS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "embedding_store.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lbal {

/// k x d double-precision center matrix.
struct CenterMatrix {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t c) const { return {values.data() + c * d, d}; }
    std::span<double> row(std::size_t c) { return {values.data() + c * d, d}; }
};

struct Centroids {
    CenterMatrix centers;
    std::vector<std::size_t> assignment;
    double objective = 0.0;  // sum of squared distances to assigned centers
    std::size_t iterations_run = 0;
    std::vector<double> objective_history;  // after the assignment step of each iteration
    std::vector<bool> repaired;             // iteration reseeded an empty cluster

    std::size_t k() const { return centers.k; }
};

struct KMeansOptions {
    std::size_t max_iter = 100;
    double tol = 1e-4;          // max Euclidean center movement
    std::size_t local_trials = 0;  // k-means++ candidates per step; 0 = 2 + floor(ln k)
};

inline double squared_distance(std::span<const float> x, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = static_cast<double>(x[j]) - c[j];
        s += diff * diff;
    }
    return s;
}

inline double squared_distance(std::span<const float> x, std::span<const float> y) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = static_cast<double>(x[j]) - static_cast<double>(y[j]);
        s += diff * diff;
    }
    return s;
}

inline CenterMatrix gather_centers(const EmbeddingMatrix& m, std::span<const std::size_t> indices) {
    CenterMatrix c{indices.size(), m.cols(), {}};
    c.values.reserve(indices.size() * m.cols());
    for (auto i : indices)
        for (float v : m.row(i)) c.values.push_back(v);
    return c;
}

/// Greedy k-means++ seeding. The first center is uniform; each later center
/// is the best (lowest resulting potential) of `local_trials` candidates drawn
/// with probability proportional to squared distance to the nearest chosen
/// center. Points at distance zero are never drawn while any positive weight
/// remains; if none remains the next center is uniform over unchosen points.
/// Returns the chosen row indices in pick order.
inline std::vector<std::size_t> kmeanspp_indices(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                                                 std::size_t local_trials = 0) {
    const std::size_t n = m.rows();
    if (k == 0 || k > n)
        throw ArgumentError("k-means++ needs 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    if (local_trials == 0) local_trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::vector<bool> taken(n, false);
    chosen.push_back(rng.uniform_below(n));
    taken[chosen[0]] = true;

    std::vector<double> closest(n);
    parallel_for(0, n, [&](std::size_t i) { closest[i] = squared_distance(m.row(i), m.row(chosen[0])); });

    std::vector<double> trial(n), best(n);
    while (chosen.size() < k) {
        double total = 0.0;
        for (double w : closest) total += w;

        if (!(total > 0.0)) {
            std::uint64_t r = rng.uniform_below(n - chosen.size());
            std::size_t pick = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                if (r-- == 0) {
                    pick = i;
                    break;
                }
            }
            chosen.push_back(pick);
            taken[pick] = true;
            for (std::size_t i = 0; i < n; ++i)
                closest[i] = std::min(closest[i], squared_distance(m.row(i), m.row(pick)));
            continue;
        }

        std::size_t best_index = n;
        double best_potential = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < local_trials; ++t) {
            const double target = rng.uniform01() * total;
            std::size_t candidate = n;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (closest[i] <= 0.0) continue;
                cumulative += closest[i];
                candidate = i;
                if (cumulative > target) break;
            }
            parallel_for(0, n, [&](std::size_t i) {
                trial[i] = std::min(closest[i], squared_distance(m.row(i), m.row(candidate)));
            });
            double potential = 0.0;
            for (double w : trial) potential += w;
            if (potential < best_potential) {
                best_potential = potential;
                best_index = candidate;
                best.swap(trial);
            }
        }
        chosen.push_back(best_index);
        taken[best_index] = true;
        closest.swap(best);
    }
    return chosen;
}

inline CenterMatrix kmeanspp_init(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                                  std::size_t local_trials = 0) {
    const auto idx = kmeanspp_indices(m, k, seed, local_trials);
    return gather_centers(m, idx);
}

namespace detail {

// Nearest center per point (ties -> lowest center index).
inline void assign_points(const EmbeddingMatrix& m, const CenterMatrix& c, std::vector<std::size_t>& assignment,
                          std::vector<double>& dist2) {
    parallel_for(0, m.rows(), [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < c.k; ++j) {
            const double dd = squared_distance(m.row(i), c.row(j));
            if (dd < best) {
                best = dd;
                arg = j;
            }
        }
        assignment[i] = arg;
        dist2[i] = best;
    });
}

// Reseeds every empty cluster at the point farthest from its center, taken
// from a cluster that keeps at least one member. Returns true if anything moved.
inline bool repair_empty_clusters(const EmbeddingMatrix& m, CenterMatrix& c, std::vector<std::size_t>& assignment,
                                  std::vector<double>& dist2) {
    std::vector<std::size_t> counts(c.k, 0);
    for (auto a : assignment) ++counts[a];
    bool repaired = false;
    for (std::size_t cluster = 0; cluster < c.k; ++cluster) {
        if (counts[cluster] != 0) continue;
        std::size_t far = m.rows();
        double far_dist = -1.0;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (counts[assignment[i]] < 2) continue;
            if (dist2[i] > far_dist) {
                far_dist = dist2[i];
                far = i;
            }
        }
        --counts[assignment[far]];
        assignment[far] = cluster;
        counts[cluster] = 1;
        dist2[far] = 0.0;
        const auto r = m.row(far);
        auto dst = c.row(cluster);
        for (std::size_t j = 0; j < c.d; ++j) dst[j] = r[j];
        repaired = true;
    }
    return repaired;
}

}  // namespace detail

/// Lloyd iterations from `init`. Each iteration assigns, repairs empty
/// clusters, records the objective, then moves every center to the mean of
/// its members; stops once no center moves more than `tol`. A final
/// assignment against the returned centers fills `assignment` and `objective`.
inline Centroids lloyd_fit(const EmbeddingMatrix& m, const CenterMatrix& init, const KMeansOptions& opt = {}) {
    const std::size_t n = m.rows(), d = m.cols(), k = init.k;
    if (k == 0 || k > n) throw ArgumentError("lloyd_fit needs 1 <= k <= n");
    if (init.d != d || init.values.size() != k * d) throw ArgumentError("initial centers have wrong dimension");
    if (opt.max_iter == 0 || !(opt.tol >= 0.0)) throw ArgumentError("lloyd_fit needs max_iter >= 1 and tol >= 0");

    Centroids out;
    out.centers = init;
    out.assignment.assign(n, 0);
    std::vector<double> dist2(n);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        detail::assign_points(m, out.centers, out.assignment, dist2);
        const bool repaired = detail::repair_empty_clusters(m, out.centers, out.assignment, dist2);
        double objective = 0.0;
        for (double v : dist2) objective += v;
        out.objective_history.push_back(objective);
        out.repaired.push_back(repaired);

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = out.assignment[i];
            ++counts[a];
            const auto r = m.row(i);
            for (std::size_t j = 0; j < d; ++j) sums[a * d + j] += r[j];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            auto center = out.centers.row(c);
            double shift = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double updated = sums[c * d + j] / static_cast<double>(counts[c]);
                shift += (updated - center[j]) * (updated - center[j]);
                center[j] = updated;
            }
            movement = std::max(movement, std::sqrt(shift));
        }
        out.iterations_run = it + 1;
        if (movement <= opt.tol) break;
    }

    detail::assign_points(m, out.centers, out.assignment, dist2);
    out.objective = 0.0;
    for (double v : dist2) out.objective += v;
    return out;
}

inline Centroids kmeans_fit(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed, const KMeansOptions& opt = {}) {
    return lloyd_fit(m, kmeanspp_init(m, k, seed, opt.local_trials), opt);
}

/// For each center in order, the closest point not in `exclude` and not
/// already claimed by an earlier center (ties -> lowest point index).
inline std::vector<std::size_t> nearest_to_centroids(const EmbeddingMatrix& m, const CenterMatrix& centers,
                                                     std::span<const std::size_t> exclude = {}) {
    const std::size_t n = m.rows();
    std::vector<bool> blocked(n, false);
    std::size_t blocked_count = 0;
    for (auto i : exclude) {
        if (i >= n) throw ArgumentError("exclude index out of range");
        if (!blocked[i]) ++blocked_count;
        blocked[i] = true;
    }
    if (n - blocked_count < centers.k)
        throw ArgumentError("only " + std::to_string(n - blocked_count) + " selectable points for " +
                            std::to_string(centers.k) + " centers");

    std::vector<std::size_t> picks;
    picks.reserve(centers.k);
    for (std::size_t c = 0; c < centers.k; ++c) {
        std::size_t arg = n;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (blocked[i]) continue;
            const double dd = squared_distance(m.row(i), centers.row(c));
            if (dd < best) {
                best = dd;
                arg = i;
            }
        }
        picks.push_back(arg);
        blocked[arg] = true;
    }
    return picks;
}

}  // namespace lbal

#endif  // LBAL_KMEANS_HPP
