#ifndef LBAL_METRICS_HPP
#define LBAL_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedding_store.hpp"
#include "errors.hpp"

namespace lbal {

inline std::vector<std::size_t> per_class_counts(std::span<const std::size_t> indices, const LabelVector& labels) {
    std::vector<std::size_t> counts(labels.num_classes(), 0);
    for (auto i : indices) {
        if (i >= labels.size()) throw DataError("selection index " + std::to_string(i) + " outside label vector");
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    return counts;
}

// Percent of the declared classes with at least one selected example.
inline double category_coverage(std::span<const std::size_t> indices, const LabelVector& labels) {
    const auto counts = per_class_counts(indices, labels);
    std::size_t hit = 0;
    for (auto c : counts) hit += c > 0 ? 1 : 0;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(counts.size());
}

inline double category_coverage(const SelectionResult& s, const LabelVector& labels) {
    return category_coverage(s.indices, labels);
}

/// occurrence count -> number of classes selected exactly that many times,
/// zero bucket included.
inline std::map<std::size_t, std::size_t> occurrence_histogram(std::span<const std::size_t> indices,
                                                               const LabelVector& labels) {
    std::map<std::size_t, std::size_t> h;
    for (auto c : per_class_counts(indices, labels)) ++h[c];
    return h;
}

inline std::map<std::size_t, std::size_t> occurrence_histogram(const SelectionResult& s, const LabelVector& labels) {
    return occurrence_histogram(s.indices, labels);
}

inline double top1_accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> truth) {
    if (predicted.size() != truth.size()) throw DataError("prediction and truth lengths differ");
    if (truth.empty()) throw DataError("accuracy of an empty set");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(truth.size());
}

// Unweighted mean of per-class accuracy over classes present in `truth`.
inline double mean_per_class_accuracy(std::span<const std::int32_t> predicted, std::span<const std::int32_t> truth,
                                      std::size_t num_classes) {
    if (predicted.size() != truth.size()) throw DataError("prediction and truth lengths differ");
    if (truth.empty()) throw DataError("accuracy of an empty set");
    std::vector<std::size_t> total(num_classes, 0), hit(num_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto y = static_cast<std::size_t>(truth[i]);
        if (truth[i] < 0 || y >= num_classes) throw DataError("truth label outside class range");
        ++total[y];
        hit[y] += predicted[i] == truth[i] ? 1 : 0;
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (total[c] == 0) continue;
        sum += 100.0 * static_cast<double>(hit[c]) / static_cast<double>(total[c]);
        ++present;
    }
    return sum / static_cast<double>(present);
}

/// Metrics of one selection prefix (strategy, seed, budget).
struct MetricsReport {
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t budget = 0;
    double coverage_percent = 0.0;
    std::vector<std::size_t> per_class_counts;
    std::map<std::size_t, std::size_t> occurrence_histogram;
    std::map<std::string, double> accuracy;  // e.g. "linear_top1", "knn_mean_per_class"
};

inline MetricsReport coverage_report(const SelectionResult& s, std::size_t budget, const LabelVector& labels) {
    MetricsReport r;
    r.strategy = s.strategy;
    r.seed = s.seed;
    r.budget = budget;
    const auto prefix = s.prefix(budget);
    r.per_class_counts = per_class_counts(prefix, labels);
    r.coverage_percent = category_coverage(prefix, labels);
    r.occurrence_histogram = occurrence_histogram(prefix, labels);
    return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json hist = nlohmann::json::object();
    for (auto [k, v] : r.occurrence_histogram) hist[std::to_string(k)] = v;
    return {{"strategy", r.strategy},
            {"seed", r.seed},
            {"budget", r.budget},
            {"coverage_percent", r.coverage_percent},
            {"per_class_counts", r.per_class_counts},
            {"occurrence_histogram", hist},
            {"accuracy", r.accuracy}};
}

/// Mean and population standard deviation over seed runs.
struct Summary {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t runs = 0;
};

inline Summary summarize(std::span<const double> values) {
    Summary s;
    s.runs = values.size();
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    for (double v : values) s.stddev += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(values.size()));
    return s;
}

inline std::string format_cell(const Summary& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", s.mean, s.stddev);
    return buf;
}

/// Strategy x budget grid: one row per strategy, one column per budget.
using SummaryGrid = std::map<std::string, std::map<std::size_t, Summary>>;

inline std::string format_table(const std::string& title, const SummaryGrid& grid) {
    std::map<std::size_t, bool> budgets;
    std::size_t name_width = 8;
    for (const auto& [name, row] : grid) {
        name_width = std::max(name_width, name.size());
        for (const auto& [b, _] : row) budgets[b] = true;
    }
    std::ostringstream out;
    out << title << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_width), "strategy");
    out << buf;
    for (const auto& [b, _] : budgets) {
        std::snprintf(buf, sizeof buf, " | %12zu", b);
        out << buf;
    }
    out << "\n";
    for (const auto& [name, row] : grid) {
        std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_width), name.c_str());
        out << buf;
        for (const auto& [b, _] : budgets) {
            const auto it = row.find(b);
            const std::string cell = it == row.end() ? "-" : format_cell(it->second);
            // "±" is two bytes but one column
            const int pad = 12 + (cell.find("±") != std::string::npos ? 1 : 0);
            std::snprintf(buf, sizeof buf, " | %*s", pad, cell.c_str());
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

// strategy,budget,seed,occurrences,classes
inline std::string histogram_csv(std::span<const MetricsReport> reports) {
    std::ostringstream out;
    out << "strategy,budget,seed,occurrences,classes\n";
    for (const auto& r : reports)
        for (auto [k, v] : r.occurrence_histogram)
            out << r.strategy << ',' << r.budget << ',' << r.seed << ',' << k << ',' << v << '\n';
    return out.str();
}

}  // namespace lbal

#endif  // LBAL_METRICS_HPP
