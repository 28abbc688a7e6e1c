#ifndef LBAL_VERIFY_ORACLES_HPP
#define LBAL_VERIFY_ORACLES_HPP

// Brute-force reference computations used by the tests and the acceptance
// protocol. Nothing here calls into the library's algorithms.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace lbal::verify {

using Points = std::vector<std::vector<double>>;

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

// Sum of squared distances to cluster means for one labeling.
inline double partition_cost(const Points& pts, const std::vector<std::size_t>& label, std::size_t k) {
    const std::size_t d = pts.front().size();
    std::vector<std::vector<double>> mean(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ++count[label[i]];
        for (std::size_t j = 0; j < d; ++j) mean[label[i]][j] += pts[i][j];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (auto& v : mean[c]) v /= static_cast<double>(count[c]);
    double cost = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) cost += sq_dist(pts[i], mean[label[i]]);
    return cost;
}

/// Minimum K-means objective over every partition of `pts` into exactly k
/// non-empty groups (k^n labelings; keep n small).
inline double exhaustive_kmeans_optimum(const Points& pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        std::vector<bool> used(k, false);
        std::size_t distinct = 0;
        for (auto l : label)
            if (!used[l]) used[l] = true, ++distinct;
        if (distinct == k) best = std::min(best, partition_cost(pts, label, k));
        std::size_t pos = 0;
        while (pos < n && ++label[pos] == k) label[pos++] = 0;
        if (pos == n) break;
    }
    return best;
}

/// The unselected point farthest from the selected set, recomputed from
/// scratch (ties -> lowest index). Returns n when nothing is left.
inline std::size_t farthest_point(const Points& pts, const std::vector<std::size_t>& selected) {
    std::vector<bool> in(pts.size(), false);
    for (auto s : selected) in[s] = true;
    std::size_t arg = pts.size();
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (in[i]) continue;
        double m = std::numeric_limits<double>::infinity();
        for (auto s : selected) m = std::min(m, sq_dist(pts[i], pts[s]));
        if (m > best) {
            best = m;
            arg = i;
        }
    }
    return arg;
}

/// Central finite differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = x[k];
        x[k] = orig + h;
        const double up = f(x);
        x[k] = orig - h;
        const double down = f(x);
        x[k] = orig;
        g[k] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Mean softmax cross-entropy written directly from the definition.
inline double reference_cross_entropy(const std::vector<double>& weights, const std::vector<double>& bias,
                                      const Points& x, const std::vector<int>& y) {
    const std::size_t classes = bias.size(), d = x.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> z(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            z[c] = bias[c];
            for (std::size_t j = 0; j < d; ++j) z[c] += weights[c * d + j] * x[i][j];
        }
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double lse = 0.0;
        for (double v : z) lse += std::exp(v - zmax);
        total += std::log(lse) + zmax - z[static_cast<std::size_t>(y[i])];
    }
    return total / static_cast<double>(x.size());
}

/// Expected category coverage (percent) of B uniform draws over C equally
/// likely classes: 100 * (1 - (1 - 1/C)^B).
inline double expected_random_coverage(std::size_t classes, std::size_t budget) {
    return 100.0 * (1.0 - std::pow(1.0 - 1.0 / static_cast<double>(classes), static_cast<double>(budget)));
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff += (a[k] - b[k]) * (a[k] - b[k]);
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
    return std::sqrt(diff) / denom;
}

}  // namespace lbal::verify

#endif  // LBAL_VERIFY_ORACLES_HPP
