#ifndef LBAL_VERIFY_ACCEPTANCE_HPP
#define LBAL_VERIFY_ACCEPTANCE_HPP

// Desk-scale acceptance protocol. Shared by the acceptance test binary and
// `lbal reproduce`; every tolerance is fixed here.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "../classifiers.hpp"
#include "../embedding_store.hpp"
#include "../kmeans.hpp"
#include "../metrics.hpp"
#include "../parallel.hpp"
#include "../rng.hpp"
#include "../strategies.hpp"
#include "../synth.hpp"
#include "oracles.hpp"

namespace lbal::verify {

struct CriterionResult {
    std::string id{};
    std::string title{};
    bool passed = false;
    std::string detail{};
    double seconds = 0.0;
};

struct AcceptanceOptions {
    bool quick = false;   // fewer seeds / instances, for a fast smoke run
    bool tamper = false;  // test hook: replaces the A1 tolerance with an unsatisfiable one
    unsigned threads = 1;
    std::set<std::string> only;  // empty = all criteria
};

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

inline Points to_points(const EmbeddingMatrix& m) {
    Points p(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) p[i][j] = m(i, j);
    return p;
}

inline std::size_t zero_classes(const SelectionResult& s, const LabelVector& labels) {
    return occurrence_histogram(s, labels)[0];
}

inline double knn_accuracy(const LabeledSet& train, std::span<const std::size_t> picks, const LabeledSet& test) {
    const auto pred = knn_predict(train.features.subset(picks), train.labels.subset(picks), test.features);
    return top1_accuracy(pred, test.labels.values());
}

}  // namespace detail

// A1: K-means covers every class of separable blobs at budget = C; random
// matches the closed-form expectation.
inline CriterionResult criterion_a1(const AcceptanceOptions& opt) {
    CriterionResult r{.id = "A1", .title = "coverage dominance, C=10 blobs, budget 10"};
    const std::size_t seeds = opt.quick ? 20 : 100;
    const double expected = expected_random_coverage(10, 10);
    const double band = opt.tamper ? -1.0 : 3.0;
    std::size_t kmeans_full = 0;
    double random_sum = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        const auto data = make_blobs(BlobSpec::balanced(10, 100, 16, 10.0, 0.1, s));
        StrategyConfig cfg;
        cfg.seed = s;
        if (category_coverage(select_kmeans_single(data.features, 10, cfg), data.labels) == 100.0) ++kmeans_full;
        random_sum += category_coverage(select_random(data.features.rows(), 10, s), data.labels);
    }
    const double random_mean = random_sum / static_cast<double>(seeds);
    r.passed = kmeans_full == seeds && std::abs(random_mean - expected) <= band;
    r.detail = detail::fmt("kmeans 100%% on %.0f/%.0f seeds; random mean %.2f%% (expected %.2f%%)", static_cast<double>(kmeans_full),
                           static_cast<double>(seeds), random_mean, expected);
    r.detail += detail::fmt(" +- %.0f", band);
    return r;
}

// A2: random leaves >= 4x more classes unrepresented (kmeans leaves none).
inline CriterionResult criterion_a2(const AcceptanceOptions& opt) {
    CriterionResult r{.id = "A2", .title = "zero-coverage ratio, C=100 blobs, budget 100"};
    const std::size_t seeds = opt.quick ? 5 : 100;
    std::size_t kmeans_zero_total = 0;
    double random_zero_sum = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        const auto data = make_blobs(BlobSpec::balanced(100, 100, 16, 10.0, 0.1, s));
        StrategyConfig cfg;
        cfg.seed = s;
        kmeans_zero_total += detail::zero_classes(select_kmeans_single(data.features, 100, cfg), data.labels);
        random_zero_sum += static_cast<double>(detail::zero_classes(select_random(data.features.rows(), 100, s), data.labels));
    }
    const double random_mean = random_zero_sum / static_cast<double>(seeds);
    r.passed = kmeans_zero_total == 0 && random_mean >= 20.0;
    r.detail = detail::fmt("random zero-class mean %.2f (>= 20), kmeans zero-class total %.0f (== 0) over %.0f seeds", random_mean,
                           static_cast<double>(kmeans_zero_total), static_cast<double>(seeds));
    return r;
}

// Random well-separated instance: k blobs, n <= 10 points in total.
inline EmbeddingMatrix separated_instance(std::uint64_t config, std::size_t& k_out) {
    Rng rng(derive_seed(0xA3, config));
    const std::size_t k = 1 + rng.uniform_below(3);
    const std::size_t d = 1 + rng.uniform_below(3);
    const std::size_t n = k + rng.uniform_below(10 - k + 1);
    std::vector<std::vector<double>> centers;
    const double min_sep = 100.0 * std::sqrt(static_cast<double>(d));  // offsets span at most sqrt(d)
    while (centers.size() < k) {
        std::vector<double> c(d);
        for (auto& v : c) v = (2.0 * rng.uniform01() - 1.0) * 1000.0;
        bool ok = true;
        for (const auto& o : centers) ok = ok && std::sqrt(sq_dist(c, o)) > min_sep;
        if (ok) centers.push_back(c);
    }
    std::vector<float> values;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[i < k ? i : rng.uniform_below(k)];
        for (std::size_t j = 0; j < d; ++j) values.push_back(static_cast<float>(c[j] + rng.uniform01() - 0.5));
    }
    k_out = k;
    return {n, d, std::move(values)};
}

// A3: Lloyd from k-means++ reaches the exhaustive-partition optimum.
inline CriterionResult criterion_a3(const AcceptanceOptions&) {
    CriterionResult r{.id = "A3", .title = "K-means equals exhaustive optimum on 20 small separated instances"};
    std::size_t ok = 0, total = 0;
    double worst = 0.0;
    for (std::uint64_t config = 0; config < 20; ++config) {
        std::size_t k = 0;
        const auto m = separated_instance(config, k);
        const double optimum = exhaustive_kmeans_optimum(detail::to_points(m), k);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto fit = kmeans_fit(m, k, seed);
            const double rel = std::abs(fit.objective - optimum) / std::max(optimum, 1e-300);
            const bool good = optimum == 0.0 ? fit.objective <= 1e-12 : rel <= 1e-9;
            worst = std::max(worst, optimum == 0.0 ? fit.objective : rel);
            ok += good ? 1 : 0;
            ++total;
        }
    }
    r.passed = ok == total;
    r.detail = detail::fmt("%.0f/%.0f fits optimal, worst relative gap %.3g (<= 1e-9)", static_cast<double>(ok),
                           static_cast<double>(total), worst);
    return r;
}

// A4: every core-set pick matches a brute-force farthest-point re-scan.
inline CriterionResult criterion_a4(const AcceptanceOptions& opt) {
    CriterionResult r{.id = "A4", .title = "greedy core-set picks match brute-force re-scan"};
    const std::size_t instances = opt.quick ? 200 : 1000;
    std::size_t mismatches = 0, picks = 0;
    for (std::uint64_t inst = 0; inst < instances; ++inst) {
        Rng rng(derive_seed(0xA4, inst));
        const std::size_t n = 2 + rng.uniform_below(199);
        const std::size_t d = 1 + rng.uniform_below(8);
        const bool grid = inst % 2 == 0;  // integer grid coordinates force distance ties
        std::vector<float> values(n * d);
        for (auto& v : values)
            v = grid ? static_cast<float>(rng.uniform_below(4)) : static_cast<float>(rng.normal());
        const EmbeddingMatrix m(n, d, std::move(values));
        const std::size_t init = 1 + rng.uniform_below(std::min<std::size_t>(5, n - 1));
        const std::size_t extra = 1 + rng.uniform_below(std::min<std::size_t>(40, n - init));
        const auto initial = select_random(n, init, inst);
        StrategyConfig cfg;
        cfg.seed = inst;
        const auto sel = select_coreset(m, BudgetSchedule({init + extra}), initial, cfg);
        const auto pts = detail::to_points(m);
        std::vector<std::size_t> chosen(sel.indices.begin(), sel.indices.begin() + static_cast<std::ptrdiff_t>(init));
        for (std::size_t t = init; t < sel.indices.size(); ++t) {
            if (farthest_point(pts, chosen) != sel.indices[t]) ++mismatches;
            chosen.push_back(sel.indices[t]);
            ++picks;
        }
    }
    r.passed = mismatches == 0;
    r.detail = detail::fmt("%.0f instances, %.0f picks, %.0f mismatches", static_cast<double>(instances), static_cast<double>(picks),
                           static_cast<double>(mismatches));
    return r;
}

// A5: analytic softmax cross-entropy gradient vs central differences.
inline CriterionResult criterion_a5(const AcceptanceOptions&) {
    CriterionResult r{.id = "A5", .title = "probe gradient vs central finite differences"};
    double worst = 0.0;
    for (std::uint64_t inst = 0; inst < 20; ++inst) {
        Rng rng(derive_seed(0xA5, inst));
        const std::size_t classes = 2 + rng.uniform_below(4), d = 1 + rng.uniform_below(6), n = 5 + rng.uniform_below(6);
        DenseRows x{n, d, std::vector<double>(n * d)};
        for (auto& v : x.values) v = rng.normal();
        std::vector<std::int32_t> y(n);
        for (auto& v : y) v = static_cast<std::int32_t>(rng.uniform_below(classes));
        std::vector<double> params(classes * d + classes);
        for (auto& v : params) v = 0.5 * rng.normal();
        std::vector<std::size_t> batch(n);
        std::iota(batch.begin(), batch.end(), std::size_t{0});

        const std::vector<double> w(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(classes * d));
        const std::vector<double> b(params.begin() + static_cast<std::ptrdiff_t>(classes * d), params.end());
        const auto g = softmax_cross_entropy(w, b, x, y, batch);
        std::vector<double> analytic = g.grad_weights;
        analytic.insert(analytic.end(), g.grad_bias.begin(), g.grad_bias.end());

        Points rows(n, std::vector<double>(d));
        std::vector<int> labels(y.begin(), y.end());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) rows[i][j] = x.values[i * d + j];
        const auto loss = [&](const std::vector<double>& p) {
            return reference_cross_entropy(std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(classes * d)),
                                           std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(classes * d), p.end()),
                                           rows, labels);
        };
        worst = std::max(worst, relative_error(analytic, central_difference(loss, params, 1e-4)));
    }
    r.passed = worst < 1e-4;
    r.detail = detail::fmt("worst relative error %.3g over 20 instances (< 1e-4)", worst);
    return r;
}

// A6: probe learns two separable blobs with the linear-eval schedule.
inline CriterionResult criterion_a6(const AcceptanceOptions&) {
    CriterionResult r{.id = "A6", .title = "probe learns separable blobs (Adam 0.01, x0.1 at 50/75, 100 epochs)"};
    const std::vector<std::size_t> test_counts{500, 500};
    const auto [train, test] = make_blob_split(BlobSpec::balanced(2, 50, 16, 10.0, 1.0, 6), test_counts);
    auto schedule = TrainSchedule::linear_eval();
    schedule.batch_size = 4;
    const auto model = probe_train(train.features, train.labels, schedule, 0);
    const double train_acc = top1_accuracy(probe_predict(model, train.features), train.labels.values());
    const double test_acc = top1_accuracy(probe_predict(model, test.features), test.labels.values());
    r.passed = train_acc == 100.0 && test_acc >= 99.0;
    r.detail = detail::fmt("train %.2f%% (== 100), test %.2f%% (>= 99)", train_acc, test_acc);
    return r;
}

// A7: cosine 1-NN evaluator.
inline CriterionResult criterion_a7(const AcceptanceOptions&) {
    CriterionResult r{.id = "A7", .title = "cosine 1-NN evaluator"};
    const std::vector<std::size_t> test_counts(10, 50);
    const auto [train, test] = make_blob_split(BlobSpec::balanced(10, 100, 16, 10.0, 0.1, 7), test_counts);
    const double self = top1_accuracy(knn_predict(train.features, train.labels, train.features), train.labels.values());
    const double held_out = top1_accuracy(knn_predict(train.features, train.labels, test.features), test.labels.values());
    r.passed = self == 100.0 && held_out >= 99.0;
    r.detail = detail::fmt("duplicated queries %.2f%% (== 100), held-out %.2f%% (>= 99)", self, held_out);
    return r;
}

// A8: multi-round K-means contract.
inline CriterionResult criterion_a8(const AcceptanceOptions&) {
    CriterionResult r{.id = "A8", .title = "multi-round K-means: disjoint rounds, single-round equivalence"};
    const auto data = make_blobs(BlobSpec::balanced(10, 100, 16, 10.0, 0.1, 8));
    StrategyConfig cfg;
    cfg.seed = 3;
    const auto multi = select_kmeans_multi(data.features, BudgetSchedule({10, 20, 50}), cfg);
    const std::set<std::size_t> unique(multi.indices.begin(), multi.indices.end());
    const bool disjoint = unique.size() == multi.indices.size() && unique.size() == 50;
    const bool bounds = multi.round_boundaries == std::vector<std::size_t>{10, 20, 50};
    const auto one = select_kmeans_multi(data.features, BudgetSchedule({10}), cfg);
    const auto single = select_kmeans_single(data.features, 10, cfg);
    const bool same = one.indices == single.indices;
    r.passed = disjoint && bounds && same;
    r.detail = std::string("union size ") + std::to_string(unique.size()) + (disjoint ? " (disjoint)" : " (overlap!)") +
               ", boundaries " + (bounds ? "[10,20,50]" : "wrong") + ", single-round " + (same ? "identical" : "differs");
    return r;
}

// Runs every strategy and the evaluators, serialized as the CLI writes them.
inline std::string determinism_fingerprint() {
    const std::vector<std::size_t> test_counts(5, 10);
    const auto [train, test] = make_blob_split(BlobSpec::balanced(5, 40, 8, 10.0, 1.0, 9), test_counts);
    const std::size_t n = train.features.rows();
    StrategyConfig cfg;
    cfg.seed = 11;
    cfg.probe.epochs = 20;
    cfg.probe.milestones = {10, 15};
    cfg.probe.batch_size = 4;
    const BudgetSchedule schedule({10, 20, 30});
    const auto initial = select_random(n, 10, cfg.seed);
    std::vector<SelectionResult> all{
        select_random(n, 30, cfg.seed),
        select_uniform(train.labels, 6, cfg.seed, false),
        select_uniform(train.labels, 6, cfg.seed, true),
        select_kmeans_single(train.features, 30, cfg),
        select_kmeans_multi(train.features, schedule, cfg),
        select_coreset(train.features, schedule, initial, cfg),
        select_max_entropy(train.features, schedule, initial, train.labels, cfg),
        select_uniform_kmeans(train.features, 5, 6, cfg),
    };
    std::string out;
    for (const auto& s : all) {
        out += encode_selection(s);
        auto rep = coverage_report(s, s.size(), train.labels);
        const auto picks = s.prefix(s.size());
        rep.accuracy["knn_top1"] =
            top1_accuracy(knn_predict(train.features.subset(picks), train.labels.subset(picks), test.features), test.labels.values());
        auto lin = TrainSchedule::linear_eval();
        lin.batch_size = 4;
        const auto model = probe_train(train.features.subset(picks), train.labels.subset(picks), lin, s.seed);
        rep.accuracy["linear_top1"] = top1_accuracy(probe_predict(model, test.features), test.labels.values());
        out += to_json(rep).dump() + "\n" + to_json(model).dump() + "\n";
    }
    return out;
}

// A9: repeated runs and thread counts give byte-identical outputs.
inline CriterionResult criterion_a9(const AcceptanceOptions&) {
    CriterionResult r{.id = "A9", .title = "byte-identical outputs across runs and thread counts"};
    const unsigned saved = num_threads();
    set_num_threads(1);
    const auto a = determinism_fingerprint();
    const auto b = determinism_fingerprint();
    set_num_threads(8);
    const auto c = determinism_fingerprint();
    set_num_threads(saved);
    r.passed = a == b && a == c;
    r.detail = std::string("repeat ") + (a == b ? "identical" : "differs") + ", threads 1 vs 8 " + (a == c ? "identical" : "differs") +
               " (" + std::to_string(a.size()) + " bytes)";
    return r;
}

// A10: EMB1 round-trip and header validation.
inline CriterionResult criterion_a10(const AcceptanceOptions&) {
    CriterionResult r{.id = "A10", .title = "EMB1 round-trip and malformed-header rejection"};
    const auto dir = std::filesystem::temp_directory_path() / ("lbal_a10_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::size_t exact = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        Rng rng(derive_seed(0xA10, t));
        const std::size_t n = 1 + rng.uniform_below(40), d = 1 + rng.uniform_below(20);
        std::vector<float> v(n * d);
        for (auto& x : v) {
            float f;
            do {
                f = std::bit_cast<float>(static_cast<std::uint32_t>(rng.next()));
            } while (!std::isfinite(f));
            x = f;
        }
        const EmbeddingMatrix m(n, d, std::move(v));
        const auto path = dir / "m.emb";
        save_embeddings(m, path);
        const auto back = load_embeddings(path);
        exact += (back == m && encode_embeddings(back) == encode_embeddings(m)) ? 1 : 0;
    }
    std::filesystem::remove_all(dir);

    const auto good = encode_embeddings(EmbeddingMatrix(2, 3, {1, 2, 3, 4, 5, 6}));
    auto expect = [&](auto tag, std::string bytes) {
        try {
            (void)decode_embeddings(bytes);
        } catch (const decltype(tag)&) {
            return true;
        } catch (...) {
        }
        return false;
    };
    std::string bad_magic = good, bad_version = good, bad_dtype = good, nan_payload = good;
    bad_magic[3] = '9';
    bad_version[4] = 2;
    bad_dtype[20] = 2;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    const auto nan_bits = std::bit_cast<std::uint32_t>(nan);
    for (int b = 0; b < 4; ++b) nan_payload[kEmbHeaderSize + 12 + b] = static_cast<char>((nan_bits >> (8 * b)) & 0xFF);
    const bool rejects = expect(FormatError(""), bad_magic) && expect(FormatError(""), bad_version) &&
                         expect(FormatError(""), bad_dtype) && expect(TruncationError(""), good.substr(0, good.size() - 1)) &&
                         expect(TruncationError(""), good.substr(0, 10)) && expect(DataError(""), nan_payload);
    r.passed = exact == 100 && rejects;
    r.detail = std::to_string(exact) + "/100 bit-exact round-trips; malformed headers " + (rejects ? "rejected with the expected errors" : "NOT all rejected correctly");
    return r;
}

// A11: on long-tail blobs K-means beats random under the 1-NN evaluator.
inline CriterionResult criterion_a11(const AcceptanceOptions& opt) {
    CriterionResult r{.id = "A11", .title = "long-tail low-budget ordering, kmeans vs random (1-NN)"};
    const std::size_t seeds = opt.quick ? 3 : 10;
    const auto counts = make_longtail(20, 128, 5);
    const std::vector<std::size_t> test_counts(20, 20);
    double kmeans_sum = 0.0, random_sum = 0.0;
    for (std::uint64_t s = 0; s < seeds; ++s) {
        BlobSpec spec{counts, 16, 10.0, 1.25, s};
        const auto [train, test] = make_blob_split(spec, test_counts);
        StrategyConfig cfg;
        cfg.seed = s;
        kmeans_sum += detail::knn_accuracy(train, select_kmeans_single(train.features, 20, cfg).indices, test);
        random_sum += detail::knn_accuracy(train, select_random(train.features.rows(), 20, s).indices, test);
    }
    const double km = kmeans_sum / static_cast<double>(seeds), rnd = random_sum / static_cast<double>(seeds);
    r.passed = km > rnd;
    r.detail = detail::fmt("kmeans %.2f%% vs random %.2f%% mean 1-NN accuracy over %.0f seeds", km, rnd, static_cast<double>(seeds));
    return r;
}

struct CriterionSpec {
    std::string id;
    std::function<CriterionResult(const AcceptanceOptions&)> run;
    double time_limit_seconds;  // 0 = none
};

inline std::vector<CriterionSpec> acceptance_criteria() {
    return {{"A1", criterion_a1, 10.0}, {"A2", criterion_a2, 60.0}, {"A3", criterion_a3, 0.0},
            {"A4", criterion_a4, 0.0},  {"A5", criterion_a5, 0.0},  {"A6", criterion_a6, 0.0},
            {"A7", criterion_a7, 0.0},  {"A8", criterion_a8, 0.0},  {"A9", criterion_a9, 0.0},
            {"A10", criterion_a10, 0.0}, {"A11", criterion_a11, 120.0}};
}

/// Runs the selected criteria, printing one PASS/FAIL line each to `out`.
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::FILE* out = stdout) {
    set_num_threads(opt.threads);
    std::vector<CriterionResult> results;
    for (const auto& c : acceptance_criteria()) {
        if (!opt.only.empty() && !opt.only.contains(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = c.run(opt);
        } catch (const std::exception& e) {
            r = {.id = c.id, .title = "", .passed = false, .detail = std::string("exception: ") + e.what()};
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.time_limit_seconds > 0.0 && r.seconds >= c.time_limit_seconds) {
            r.passed = false;
            r.detail += detail::fmt("; runtime %.1f s exceeds %.0f s", r.seconds, c.time_limit_seconds);
        }
        if (out) {
            std::fprintf(out, "[%s] %-4s %s: %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.id.c_str(), r.title.c_str(),
                         r.detail.c_str(), r.seconds);
            std::fflush(out);
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace lbal::verify

#endif  // LBAL_VERIFY_ACCEPTANCE_HPP
