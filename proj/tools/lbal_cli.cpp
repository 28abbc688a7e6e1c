// lbal: dataset generation, sample selection, evaluation and the desk-scale
// acceptance protocol. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <lbal/classifiers.hpp>
#include <lbal/embedding_store.hpp>
#include <lbal/metrics.hpp>
#include <lbal/strategies.hpp>
#include <lbal/synth.hpp>
#include <lbal/verify/acceptance.hpp>

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out_dir = ".";
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw lbal::IoError("cannot write " + path.string());
    out << text;
}

// ---- gen ------------------------------------------------------------------

struct GenOptions {
    bool blobs = false;
    bool longtail = false;
    std::size_t classes = 10;
    std::size_t per_class = 100;
    std::size_t max_count = 128;
    std::size_t min_count = 5;
    double exponent = 1.0;
    std::size_t test_per_class = 20;
    std::size_t dim = 16;
    double sigma = 0.1;
    double scale = 10.0;
};

int run_gen(const GlobalOptions& g, const GenOptions& o) {
    if (o.blobs == o.longtail) throw UsageError("gen needs exactly one of --blobs or --longtail");
    lbal::BlobSpec spec;
    spec.per_class_counts = o.longtail ? lbal::make_longtail(o.classes, o.max_count, o.min_count, o.exponent)
                                       : std::vector<std::size_t>(o.classes, o.per_class);
    spec.dim = o.dim;
    spec.center_scale = o.scale;
    spec.sigma = o.sigma;
    spec.seed = g.seed;
    const std::vector<std::size_t> test_counts(o.classes, o.test_per_class);
    const auto [train, test] = lbal::make_blob_split(spec, test_counts);
    const fs::path dir = g.out_dir;
    fs::create_directories(dir);
    lbal::save_embeddings(train.features, dir / "train.emb");
    lbal::save_labels(train.labels, dir / "train.lbl");
    lbal::save_embeddings(test.features, dir / "test.emb");
    lbal::save_labels(test.labels, dir / "test.lbl");
    std::printf("wrote %s/{train,test}.{emb,lbl}: train n=%zu, test n=%zu, d=%zu, C=%zu\n", dir.string().c_str(),
                train.features.rows(), test.features.rows(), spec.dim, o.classes);
    return 0;
}

// ---- select ---------------------------------------------------------------

struct SelectOptions {
    std::string emb;
    std::string labels;
    std::vector<std::string> strategies;
    std::optional<std::size_t> budget;
    std::vector<std::size_t> schedule;
    std::vector<std::uint64_t> seeds;
    std::size_t per_class = 0;
    std::size_t classes = 0;
    std::size_t initial_size = 0;
    std::string initial = "random";
    bool normalize = false;
    bool recluster_unlabeled_only = false;
    std::size_t max_iter = 100;
    double tol = 1e-4;
    std::size_t probe_epochs = 100;
    std::size_t batch_size = 0;
};

std::size_t auto_batch(std::size_t pool) { return pool >= 1280 ? 128 : 4; }

lbal::TrainSchedule scaled_schedule(lbal::TrainSchedule s, std::size_t epochs) {
    if (epochs != s.epochs) {
        for (auto& m : s.milestones) m = m * epochs / s.epochs;
        s.epochs = epochs;
        std::vector<std::size_t> kept;
        for (auto m : s.milestones)
            if (m < epochs && (kept.empty() || m > kept.back())) kept.push_back(m);
        s.milestones = kept;
    }
    return s;
}

std::vector<lbal::SelectionResult> run_strategy(lbal::Strategy strategy, const lbal::EmbeddingMatrix& m,
                                                const std::optional<lbal::LabelVector>& labels,
                                                const lbal::BudgetSchedule& schedule, const SelectOptions& o,
                                                std::uint64_t seed) {
    using lbal::Strategy;
    lbal::StrategyConfig cfg;
    cfg.seed = seed;
    cfg.normalize_features = o.normalize;
    cfg.recluster_unlabeled_only = o.recluster_unlabeled_only;
    cfg.kmeans.max_iter = o.max_iter;
    cfg.kmeans.tol = o.tol;
    cfg.probe = scaled_schedule(lbal::TrainSchedule::max_entropy(), o.probe_epochs);

    std::vector<lbal::SelectionResult> out;
    switch (strategy) {
        case Strategy::kmeans_multi:
            out.push_back(lbal::select_kmeans_multi(m, schedule, cfg));
            return out;
        case Strategy::coreset:
        case Strategy::max_entropy: {
            const std::size_t init = o.initial_size ? o.initial_size : schedule.cumulative().front();
            if (!o.initial_size && schedule.rounds() < 2)
                throw UsageError("iterative strategies need --schedule with >= 2 sizes or --initial-size");
            auto initial = o.initial == "kmeans" ? lbal::select_kmeans_single(m, init, cfg) : lbal::select_random(m.rows(), init, seed);
            cfg.probe.batch_size = o.batch_size ? o.batch_size : auto_batch(init);
            out.push_back(strategy == Strategy::coreset ? lbal::select_coreset(m, schedule, initial, cfg)
                                                        : lbal::select_max_entropy(m, schedule, initial, *labels, cfg));
            return out;
        }
        default:
            break;
    }
    // single-batch strategies: an independent selection per budget
    for (auto b : schedule.cumulative()) {
        switch (strategy) {
            case Strategy::random: out.push_back(lbal::select_random(m.rows(), b, seed)); break;
            case Strategy::kmeans_single: out.push_back(lbal::select_kmeans_single(m, b, cfg)); break;
            case Strategy::uniform:
            case Strategy::uniform_capped: {
                const std::size_t per = o.per_class ? o.per_class : b / labels->num_classes();
                if (per == 0) throw UsageError("budget " + std::to_string(b) + " is smaller than the class count");
                out.push_back(lbal::select_uniform(*labels, per, seed, strategy == Strategy::uniform_capped));
                break;
            }
            case Strategy::uniform_kmeans: {
                const std::size_t k = o.classes ? o.classes : (labels ? labels->num_classes() : 0);
                if (k == 0) throw UsageError("uniform-kmeans needs --classes (or --labels to read C)");
                const std::size_t per = o.per_class ? o.per_class : b / k;
                if (per == 0) throw UsageError("budget " + std::to_string(b) + " is smaller than --classes");
                out.push_back(lbal::select_uniform_kmeans(m, k, per, cfg));
                break;
            }
            default: break;
        }
    }
    return out;
}

int run_select(const GlobalOptions& g, SelectOptions o) {
    if (o.strategies.empty()) throw UsageError("select needs --strategy");
    std::vector<lbal::Strategy> strategies;
    for (const auto& name : o.strategies) {
        try {
            strategies.push_back(lbal::parse_strategy(name));
        } catch (const lbal::ArgumentError& e) {
            throw UsageError(e.what());
        }
    }
    std::vector<std::size_t> sizes = o.schedule;
    if (o.budget) {
        if (!sizes.empty()) throw UsageError("give either --budget or --schedule, not both");
        sizes = {*o.budget};
    }
    if (sizes.empty()) throw UsageError("select needs --budget or --schedule");
    std::optional<lbal::BudgetSchedule> schedule;
    try {
        schedule.emplace(sizes);
    } catch (const lbal::ArgumentError& e) {
        throw UsageError(e.what());
    }
    for (auto s : strategies)
        if (lbal::needs_labels(s) && o.labels.empty())
            throw UsageError(std::string(lbal::to_string(s)) + " needs --labels");
    if (o.initial != "random" && o.initial != "kmeans") throw UsageError("--initial must be random or kmeans");
    if (o.seeds.empty()) o.seeds = {g.seed};

    const fs::path dir = g.out_dir;
    if (o.emb.empty()) o.emb = (dir / "train.emb").string();
    const auto m = lbal::load_embeddings(o.emb);
    std::optional<lbal::LabelVector> labels;
    if (!o.labels.empty()) {
        labels = lbal::load_labels(o.labels);
        if (labels->size() != m.rows()) throw lbal::DataError("labels and embeddings differ in length");
    }

    std::vector<std::pair<fs::path, lbal::SelectionResult>> outputs;
    for (auto strategy : strategies)
        for (auto seed : o.seeds)
            for (auto& sel : run_strategy(strategy, m, labels, *schedule, o, seed)) {
                sel.validate(m.rows());
                const auto name = "sel_" + sel.strategy + "_b" + std::to_string(sel.size()) + "_s" + std::to_string(seed) + ".json";
                outputs.emplace_back(dir / name, std::move(sel));
            }
    fs::create_directories(dir);
    for (const auto& [path, sel] : outputs) {
        lbal::save_selection(sel, path);
        std::printf("%s: %zu indices, rounds %s\n", path.string().c_str(), sel.size(),
                    nlohmann::json(sel.round_boundaries).dump().c_str());
    }
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalOptions {
    std::string train_emb, train_labels, test_emb, test_labels;
    std::vector<std::string> selections;
    std::vector<std::string> metrics{"coverage", "histogram"};
    std::size_t batch_size = 0;
    std::size_t probe_epochs = 100;
};

int run_eval(const GlobalOptions& g, EvalOptions o) {
    if (o.selections.empty()) throw UsageError("eval needs at least one selection file");
    std::set<std::string> want(o.metrics.begin(), o.metrics.end());
    for (const auto& w : want)
        if (w != "coverage" && w != "histogram" && w != "linear" && w != "knn") throw UsageError("unknown metric '" + w + "'");
    const bool needs_test = want.contains("linear") || want.contains("knn");
    const fs::path dir = g.out_dir;
    if (o.train_emb.empty()) o.train_emb = (dir / "train.emb").string();
    if (o.train_labels.empty()) o.train_labels = (dir / "train.lbl").string();
    if (needs_test && o.test_emb.empty()) o.test_emb = (dir / "test.emb").string();
    if (needs_test && o.test_labels.empty()) o.test_labels = (dir / "test.lbl").string();

    const auto train_labels = lbal::load_labels(o.train_labels);
    std::optional<lbal::EmbeddingMatrix> train, test;
    std::optional<lbal::LabelVector> test_labels;
    if (needs_test) {
        train = lbal::load_embeddings(o.train_emb);
        test = lbal::load_embeddings(o.test_emb);
        test_labels = lbal::load_labels(o.test_labels);
        if (train->rows() != train_labels.size() || test->rows() != test_labels->size())
            throw lbal::DataError("embeddings and labels differ in length");
    }
    std::vector<lbal::SelectionResult> selections;
    for (const auto& p : o.selections) {
        selections.push_back(lbal::load_selection(p));
        selections.back().validate(train_labels.size());
    }

    std::vector<lbal::MetricsReport> reports;
    for (const auto& sel : selections)
        for (auto budget : sel.budget_schedule) {
            auto rep = lbal::coverage_report(sel, budget, train_labels);
            const auto picks = sel.prefix(budget);
            if (want.contains("knn")) {
                const auto pred = lbal::knn_predict(train->subset(picks), train_labels.subset(picks), *test);
                rep.accuracy["knn_top1"] = lbal::top1_accuracy(pred, test_labels->values());
                rep.accuracy["knn_mean_per_class"] =
                    lbal::mean_per_class_accuracy(pred, test_labels->values(), test_labels->num_classes());
            }
            if (want.contains("linear")) {
                auto schedule = scaled_schedule(lbal::TrainSchedule::linear_eval(), o.probe_epochs);
                schedule.batch_size = o.batch_size ? o.batch_size : auto_batch(picks.size());
                const auto model = lbal::probe_train(train->subset(picks), train_labels.subset(picks), schedule, sel.seed);
                const auto pred = lbal::probe_predict(model, *test);
                rep.accuracy["linear_top1"] = lbal::top1_accuracy(pred, test_labels->values());
                rep.accuracy["linear_mean_per_class"] =
                    lbal::mean_per_class_accuracy(pred, test_labels->values(), test_labels->num_classes());
            }
            reports.push_back(std::move(rep));
        }

    // metric -> strategy -> budget -> values over seeds
    std::map<std::string, std::map<std::string, std::map<std::size_t, std::vector<double>>>> cells;
    for (const auto& r : reports) {
        if (want.contains("coverage") || want.contains("histogram"))
            cells["coverage_percent"][r.strategy][r.budget].push_back(r.coverage_percent);
        for (const auto& [k, v] : r.accuracy) cells[k][r.strategy][r.budget].push_back(v);
    }
    nlohmann::json summary = nlohmann::json::object();
    std::string tables;
    for (const auto& [metric, by_strategy] : cells) {
        lbal::SummaryGrid grid;
        for (const auto& [strategy, by_budget] : by_strategy)
            for (const auto& [budget, values] : by_budget) {
                const auto s = lbal::summarize(values);
                grid[strategy][budget] = s;
                summary[metric][strategy][std::to_string(budget)] = {{"mean", s.mean}, {"std", s.stddev}, {"runs", s.runs}};
            }
        tables += lbal::format_table(metric, grid) + "\n";
    }
    nlohmann::json doc;
    doc["reports"] = nlohmann::json::array();
    for (const auto& r : reports) doc["reports"].push_back(lbal::to_json(r));
    doc["summary"] = summary;

    fs::create_directories(dir);
    write_text(dir / "metrics.json", doc.dump(2) + "\n");
    write_text(dir / "table.txt", tables);
    if (want.contains("histogram")) write_text(dir / "histogram.csv", lbal::histogram_csv(reports));
    std::fputs(tables.c_str(), stdout);
    return 0;
}

// ---- reproduce ------------------------------------------------------------

struct ReproduceOptions {
    bool quick = false;
    bool tamper = false;
    std::vector<std::string> only;
};

int run_reproduce(const GlobalOptions& g, const ReproduceOptions& o) {
    lbal::verify::AcceptanceOptions opt;
    opt.quick = o.quick;
    opt.tamper = o.tamper;
    opt.threads = g.threads;
    opt.only.insert(o.only.begin(), o.only.end());
    const auto results = lbal::verify::run_acceptance(opt);
    std::vector<std::string> failed;
    for (const auto& r : results)
        if (!r.passed) failed.push_back(r.id);
    if (failed.empty()) {
        std::printf("all %zu criteria passed\n", results.size());
        return 0;
    }
    std::printf("FAILED:");
    for (const auto& id : failed) std::printf(" %s", id.c_str());
    std::printf("\n");
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-budget active learning: selection strategies and evaluation over frozen embeddings", "lbal"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "flat key=value config file; command-line flags win");

    GlobalOptions g;
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--threads", g.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "output directory (also the default input location)");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "generate synthetic train/test EMB1+LBL1 files");
    gen_cmd->add_flag("--blobs", gen.blobs, "balanced Gaussian blobs");
    gen_cmd->add_flag("--longtail", gen.longtail, "long-tail class sizes from --max down to --min");
    gen_cmd->add_option("--classes", gen.classes)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--per-class", gen.per_class)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--max", gen.max_count)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--min", gen.min_count)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--exponent", gen.exponent);
    gen_cmd->add_option("--test-per-class", gen.test_per_class)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--dim", gen.dim)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--sigma", gen.sigma);
    gen_cmd->add_option("--scale", gen.scale);

    SelectOptions sel;
    auto* sel_cmd = app.add_subcommand("select", "run selection strategies, writing one SEL1 file per strategy/seed");
    sel_cmd->add_option("--emb", sel.emb, "pool embeddings (default <out-dir>/train.emb)");
    sel_cmd->add_option("--labels", sel.labels, "pool labels; required by uniform* and max-entropy");
    sel_cmd->add_option("--strategy", sel.strategies,
                        "random, uniform, uniform-capped, kmeans, kmeans-multi, coreset, max-entropy, uniform-kmeans")
        ->delimiter(',');
    sel_cmd->add_option("--budget", sel.budget);
    sel_cmd->add_option("--schedule", sel.schedule, "cumulative budget sizes, e.g. 10,20,50")->delimiter(',');
    sel_cmd->add_option("--seeds", sel.seeds, "seed list (default: --seed)")->delimiter(',');
    sel_cmd->add_option("--per-class", sel.per_class, "uniform / uniform-kmeans examples per class (default budget / C)");
    sel_cmd->add_option("--classes", sel.classes, "uniform-kmeans cluster count (default C from --labels)");
    sel_cmd->add_option("--initial-size", sel.initial_size, "initial pool size for coreset / max-entropy (default first budget)");
    sel_cmd->add_option("--initial", sel.initial, "initial pool strategy: random or kmeans");
    sel_cmd->add_flag("--normalize", sel.normalize, "L2-normalize features before selection");
    sel_cmd->add_flag("--recluster-unlabeled-only", sel.recluster_unlabeled_only,
                      "kmeans-multi clusters only not-yet-selected points in later rounds");
    sel_cmd->add_option("--max-iter", sel.max_iter)->check(CLI::PositiveNumber);
    sel_cmd->add_option("--tol", sel.tol)->check(CLI::NonNegativeNumber);
    sel_cmd->add_option("--probe-epochs", sel.probe_epochs)->check(CLI::PositiveNumber);
    sel_cmd->add_option("--batch-size", sel.batch_size, "max-entropy probe batch size (default: 128 for pools >= 1280, else 4)");

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate selections: coverage, histogram, linear probe, 1-NN");
    eval_cmd->add_option("selections", ev.selections, "SEL1 files")->required();
    eval_cmd->add_option("--train-emb", ev.train_emb);
    eval_cmd->add_option("--train-labels", ev.train_labels);
    eval_cmd->add_option("--test-emb", ev.test_emb);
    eval_cmd->add_option("--test-labels", ev.test_labels);
    eval_cmd->add_option("--metrics", ev.metrics, "subset of coverage,histogram,linear,knn")->delimiter(',');
    eval_cmd->add_option("--batch-size", ev.batch_size, "linear probe batch size (default: 128 for pools >= 1280, else 4)");
    eval_cmd->add_option("--probe-epochs", ev.probe_epochs)->check(CLI::PositiveNumber);

    ReproduceOptions rep;
    auto* rep_cmd = app.add_subcommand("reproduce", "run the desk-scale acceptance protocol");
    rep_cmd->add_flag("--quick", rep.quick, "fewer seeds and instances");
    rep_cmd->add_flag("--tamper", rep.tamper, "test hook: force an unsatisfiable tolerance")->group("");
    rep_cmd->add_option("--only", rep.only, "criterion ids, e.g. A1,A3")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    lbal::set_num_threads(g.threads);
    try {
        if (*gen_cmd) return run_gen(g, gen);
        if (*sel_cmd) return run_select(g, sel);
        if (*eval_cmd) return run_eval(g, ev);
        if (*rep_cmd) return run_reproduce(g, rep);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
