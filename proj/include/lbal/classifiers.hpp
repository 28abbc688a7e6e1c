#ifndef LBAL_CLASSIFIERS_HPP
#define LBAL_CLASSIFIERS_HPP

// Evaluation classifiers over frozen features: a multinomial logistic
// regression probe trained with Adam, and exact cosine 1-NN.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedding_store.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace lbal {

struct TrainSchedule {
    double lr = 0.01;
    std::vector<std::size_t> milestones{50, 75};  // lr *= 0.1 from each of these epochs on
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    // Linear-probe evaluation schedule.
    static TrainSchedule linear_eval() { return {}; }

    // Schedule for the probe that scores Max-Entropy candidates.
    static TrainSchedule max_entropy() {
        TrainSchedule s;
        s.lr = 0.001;
        return s;
    }

    double lr_at(std::size_t epoch) const {
        double rate = lr;
        for (auto m : milestones)
            if (epoch >= m) rate *= 0.1;
        return rate;
    }

    void validate() const {
        if (epochs == 0 || batch_size == 0) throw ArgumentError("epochs and batch_size must be positive");
        if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
        for (std::size_t i = 0; i < milestones.size(); ++i) {
            if (milestones[i] >= epochs) throw ArgumentError("milestone beyond last epoch");
            if (i > 0 && milestones[i] <= milestones[i - 1]) throw ArgumentError("milestones must be strictly increasing");
        }
    }
};

struct EpochLog {
    double loss = 0.0;      // mean cross-entropy over the epoch's samples
    double accuracy = 0.0;  // percent of samples predicted correctly before their update
};

struct ProbeModel {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<double> weights;  // classes x dim
    std::vector<double> bias;     // classes
    NormStats norm;
    TrainSchedule schedule;
    std::vector<EpochLog> train_log;

    static ProbeModel zeros(std::size_t classes, std::size_t dim) {
        ProbeModel p;
        p.classes = classes;
        p.dim = dim;
        p.weights.assign(classes * dim, 0.0);
        p.bias.assign(classes, 0.0);
        p.norm = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
        return p;
    }
};

/// Row-major n x d doubles, the probe's working copy of standardized features.
struct DenseRows {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }

    static DenseRows from(const EmbeddingMatrix& m) {
        return {m.rows(), m.cols(), std::vector<double>(m.values().begin(), m.values().end())};
    }
};

// In-place softmax with max subtraction.
inline void softmax_inplace(std::span<double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - top);
        z += v;
    }
    for (auto& v : logits) v /= z;
}

inline void compute_logits(std::span<const double> weights, std::span<const double> bias, std::span<const double> x,
                           std::span<double> out) {
    const std::size_t d = x.size();
    for (std::size_t c = 0; c < out.size(); ++c) {
        double s = bias[c];
        for (std::size_t j = 0; j < d; ++j) s += weights[c * d + j] * x[j];
        out[c] = s;
    }
}

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
    std::size_t correct = 0;
};

/// Mean cross-entropy of softmax(Wx + b) over rows `batch` of `x`, plus
/// 0.5 * weight_decay * |W|^2, and its gradient.
inline LossGradient softmax_cross_entropy(std::span<const double> weights, std::span<const double> bias,
                                          const DenseRows& x, std::span<const std::int32_t> labels,
                                          std::span<const std::size_t> batch, double weight_decay = 0.0) {
    const std::size_t classes = bias.size(), d = x.d;
    LossGradient g;
    g.grad_weights.assign(classes * d, 0.0);
    g.grad_bias.assign(classes, 0.0);
    std::vector<double> p(classes);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto i : batch) {
        const auto xi = x.row(i);
        compute_logits(weights, bias, xi, p);
        const auto y = static_cast<std::size_t>(labels[i]);
        if (static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == y) ++g.correct;
        softmax_inplace(p);
        g.loss -= std::log(std::max(p[y], std::numeric_limits<double>::min())) * scale;
        for (std::size_t c = 0; c < classes; ++c) {
            const double delta = (p[c] - (c == y ? 1.0 : 0.0)) * scale;
            g.grad_bias[c] += delta;
            for (std::size_t j = 0; j < d; ++j) g.grad_weights[c * d + j] += delta * xi[j];
        }
    }
    if (weight_decay != 0.0) {
        for (std::size_t k = 0; k < weights.size(); ++k) {
            g.loss += 0.5 * weight_decay * weights[k] * weights[k];
            g.grad_weights[k] += weight_decay * weights[k];
        }
    }
    return g;
}

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t size) : m(size, 0.0), v(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr, const TrainSchedule& s,
              std::size_t t) {
        const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < params.size(); ++k) {
            m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * grad[k];
            v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * grad[k] * grad[k];
            params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + s.eps);
        }
    }
};

}  // namespace detail

/// Trains a linear probe on standardized `features`. Weights start at zero;
/// each epoch reshuffles with the seeded generator and keeps the last partial
/// batch.
inline ProbeModel probe_train(const EmbeddingMatrix& features, const LabelVector& labels, const TrainSchedule& schedule,
                              std::uint64_t seed) {
    schedule.validate();
    if (labels.size() != features.rows()) throw DataError("features and labels differ in length");
    if (labels.num_classes() < 2) throw ArgumentError("probe needs at least two classes");

    auto [standardized, stats] = standardize(features);
    const DenseRows x = DenseRows::from(standardized);
    ProbeModel model = ProbeModel::zeros(labels.num_classes(), features.cols());
    model.norm = std::move(stats);
    model.schedule = schedule;

    detail::AdamState adam_w(model.weights.size()), adam_b(model.bias.size());
    std::vector<std::size_t> order(x.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_below(i)]);
        const double lr = schedule.lr_at(epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < x.n; start += schedule.batch_size) {
            const auto batch = std::span<const std::size_t>(order).subspan(start, std::min(schedule.batch_size, x.n - start));
            auto g = softmax_cross_entropy(model.weights, model.bias, x, labels.values(), batch, schedule.weight_decay);
            if (!std::isfinite(g.loss)) throw DivergenceError(epoch);
            loss_sum += g.loss * static_cast<double>(batch.size());
            correct += g.correct;
            ++step;
            adam_w.step(model.weights, g.grad_weights, lr, schedule, step);
            adam_b.step(model.bias, g.grad_bias, lr, schedule, step);
        }
        for (double w : model.weights)
            if (!std::isfinite(w)) throw DivergenceError(epoch);
        model.train_log.push_back({loss_sum / static_cast<double>(x.n), 100.0 * static_cast<double>(correct) / static_cast<double>(x.n)});
    }
    return model;
}

/// n x C class probabilities.
struct ProbabilityMatrix {
    std::size_t n = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * classes, classes}; }
};

inline ProbabilityMatrix probe_predict_proba(const ProbeModel& model, const EmbeddingMatrix& features) {
    if (features.cols() != model.dim)
        throw DataError("feature dimension " + std::to_string(features.cols()) + " does not match probe dimension " +
                        std::to_string(model.dim));
    const auto x = DenseRows::from(standardize(features, model.norm).first);
    ProbabilityMatrix out{x.n, model.classes, std::vector<double>(x.n * model.classes)};
    parallel_for(0, x.n, [&](std::size_t i) {
        std::span<double> row(out.values.data() + i * model.classes, model.classes);
        compute_logits(model.weights, model.bias, x.row(i), row);
        softmax_inplace(row);
    });
    return out;
}

inline std::vector<std::int32_t> probe_predict(const ProbeModel& model, const EmbeddingMatrix& features) {
    const auto p = probe_predict_proba(model, features);
    std::vector<std::int32_t> out(p.n);
    for (std::size_t i = 0; i < p.n; ++i) {
        const auto r = p.row(i);
        out[i] = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

/// Exact 1-NN under cosine similarity; zero vectors have similarity 0 to
/// everything and ties go to the lowest training index.
inline std::vector<std::int32_t> knn_predict(const EmbeddingMatrix& train, const LabelVector& train_labels,
                                             const EmbeddingMatrix& query) {
    if (train_labels.size() != train.rows()) throw DataError("training features and labels differ in length");
    if (train.cols() != query.cols()) throw DataError("query dimension does not match training dimension");
    const std::size_t d = train.cols();
    auto unit_rows = [d](const EmbeddingMatrix& m) {
        std::vector<double> out(m.values().begin(), m.values().end());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) sq += out[i * d + j] * out[i * d + j];
            if (sq == 0.0) continue;
            const double norm = std::sqrt(sq);
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= norm;
        }
        return out;
    };
    const auto t = unit_rows(train);
    const auto q = unit_rows(query);
    std::vector<std::int32_t> out(query.rows());
    parallel_for(0, query.rows(), [&](std::size_t i) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t r = 0; r < train.rows(); ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += q[i * d + j] * t[r * d + j];
            if (s > best) {
                best = s;
                arg = r;
            }
        }
        out[i] = train_labels[arg];
    });
    return out;
}

inline nlohmann::json to_json(const TrainSchedule& s) {
    return {{"optimizer", "adam"}, {"lr", s.lr},       {"milestones", s.milestones}, {"epochs", s.epochs},
            {"batch_size", s.batch_size}, {"weight_decay", s.weight_decay}, {"beta1", s.beta1},
            {"beta2", s.beta2}, {"eps", s.eps}};
}

inline nlohmann::json to_json(const ProbeModel& p) {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t c = 0; c < p.classes; ++c)
        w.push_back(std::vector<double>(p.weights.begin() + c * p.dim, p.weights.begin() + (c + 1) * p.dim));
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : p.train_log) log.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}});
    return {{"classes", p.classes},
            {"dim", p.dim},
            {"weights", w},
            {"bias", p.bias},
            {"norm_stats", {{"mean", p.norm.mean}, {"std", p.norm.stddev}}},
            {"schedule", to_json(p.schedule)},
            {"train_log", log}};
}

inline ProbeModel probe_from_json(const nlohmann::json& j) {
    try {
        ProbeModel p;
        p.classes = j.at("classes").get<std::size_t>();
        p.dim = j.at("dim").get<std::size_t>();
        for (const auto& row : j.at("weights")) {
            const auto r = row.get<std::vector<double>>();
            if (r.size() != p.dim) throw DataError("weight row has wrong dimension");
            p.weights.insert(p.weights.end(), r.begin(), r.end());
        }
        p.bias = j.at("bias").get<std::vector<double>>();
        p.norm.mean = j.at("norm_stats").at("mean").get<std::vector<double>>();
        p.norm.stddev = j.at("norm_stats").at("std").get<std::vector<double>>();
        const auto& s = j.at("schedule");
        p.schedule.lr = s.at("lr").get<double>();
        p.schedule.milestones = s.at("milestones").get<std::vector<std::size_t>>();
        p.schedule.epochs = s.at("epochs").get<std::size_t>();
        p.schedule.batch_size = s.at("batch_size").get<std::size_t>();
        p.schedule.weight_decay = s.at("weight_decay").get<double>();
        p.schedule.beta1 = s.at("beta1").get<double>();
        p.schedule.beta2 = s.at("beta2").get<double>();
        p.schedule.eps = s.at("eps").get<double>();
        for (const auto& e : j.at("train_log")) p.train_log.push_back({e.at("loss").get<double>(), e.at("accuracy").get<double>()});
        if (p.weights.size() != p.classes * p.dim || p.bias.size() != p.classes || p.norm.mean.size() != p.dim ||
            p.norm.stddev.size() != p.dim)
            throw DataError("probe model arrays have inconsistent sizes");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed probe model: ") + e.what());
    }
}

}  // namespace lbal

#endif  // LBAL_CLASSIFIERS_HPP
