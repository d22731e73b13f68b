#include "floodbench/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "json.hpp"

#include "floodbench/data.hpp"
#include "floodbench/gradcheck.hpp"
#include "floodbench/metrics.hpp"
#include "floodbench/models.hpp"
#include "floodbench/ssl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace floodbench {
namespace {

constexpr const char* kToolVersion = "floodbench 1.0.0";

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << content;
}

ModelConfig model_config(const RunConfig& cfg) {
    ModelConfig mc;
    mc.encoder_channels = cfg.channels;
    mc.attention_lambda = cfg.lambda;
    return mc;
}

TrainConfig train_config(const RunConfig& cfg, const std::vector<Tile>& labeled_tiles) {
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr;
    tc.seed = cfg.seed;
    tc.weights = inverse_frequency_weights(label_histogram(labeled_tiles));
    tc.alpha = cfg.alpha;
    tc.betas = cfg.betas;
    tc.buffer_capacity = cfg.buffer_n;
    tc.label_ratio = cfg.label_ratio;
    return tc;
}

struct DataBundle {
    std::vector<ScenePair> scenes;
    std::string digest;
    SceneSplit split;
    std::vector<size_t> labeled_scenes, unlabeled_scenes;
    std::vector<Tile> labeled_tiles, unlabeled_tiles, test_tiles;
};

DataBundle prepare_data(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) throw ConfigError("data_dir: required for this command");
    DataBundle b;
    b.scenes = load_scene_dir(cfg.data_dir, true);
    if (b.scenes.empty()) throw DataError("no scenes found under " + cfg.data_dir);
    b.digest = dataset_digest(b.scenes);

    SplitSpec spec;
    spec.seed = cfg.seed;
    b.split = split_scenes(b.scenes.size(), spec);
    sample_labeled(b.split.train, cfg.label_ratio, cfg.seed, b.labeled_scenes,
                   b.unlabeled_scenes);

    auto tiles_of = [&](const std::vector<size_t>& idx) {
        std::vector<Tile> out;
        for (size_t i : idx) {
            auto t = tile_scene(b.scenes[i], cfg.tile, cfg.stride);
            out.insert(out.end(), std::make_move_iterator(t.begin()),
                       std::make_move_iterator(t.end()));
        }
        return out;
    };
    b.labeled_tiles = tiles_of(b.labeled_scenes);
    b.unlabeled_tiles = tiles_of(b.unlabeled_scenes);
    b.test_tiles = tiles_of(b.split.test);
    return b;
}

struct EvalResult {
    MetricsReport four;
    MetricsReport binary;
    NormalizedMatrix norm4;
    NormalizedMatrix norm2;
    int64_t tiles = 0;
};

EvalResult evaluate_tiles(Model<float>& model, const std::vector<Tile>& tiles,
                          int64_t batch_size) {
    if (tiles.empty()) throw DataError("evaluation tile set is empty");
    ConfusionMatrix cm4(4), cm2(2);
    std::vector<size_t> order(tiles.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const auto batch = static_cast<size_t>(batch_size);
    for (size_t start = 0; start < tiles.size(); start += batch) {
        const size_t count = std::min(batch, tiles.size() - start);
        Tensor<float> pre, post;
        std::vector<uint8_t> labels;
        make_batch(tiles, order, start, count, pre, post, labels);
        const std::vector<uint8_t> preds = predict_labels(model, pre, post);
        const std::vector<uint8_t> labels2 = binary_collapse(labels);
        const std::vector<uint8_t> preds2 = binary_collapse(preds);
        for (size_t i = 0; i < labels.size(); ++i) {
            ++cm4.at(labels[i], preds[i]);
            ++cm2.at(labels2[i], preds2[i]);
        }
    }
    EvalResult r;
    r.four = compute_metrics(cm4);
    r.binary = compute_metrics(cm2);
    r.norm4 = normalize_rows(cm4);
    r.norm2 = normalize_rows(cm2);
    r.tiles = static_cast<int64_t>(tiles.size());
    return r;
}

json metrics_json(const MetricsReport& r, const NormalizedMatrix& nm) {
    json j;
    j["k"] = r.k;
    json matrix = json::array();
    for (int g = 0; g < r.k; ++g) {
        json row = json::array();
        for (int p = 0; p < r.k; ++p)
            row.push_back(r.matrix[static_cast<size_t>(g * r.k + p)]);
        matrix.push_back(row);
    }
    j["confusion"] = matrix;
    json per_class = json::array();
    for (const ClassMetrics& c : r.per_class)
        per_class.push_back({{"precision", c.precision},
                             {"recall", c.recall},
                             {"f1", c.f1},
                             {"precision_undefined", c.precision_undefined},
                             {"recall_undefined", c.recall_undefined},
                             {"f1_undefined", c.f1_undefined}});
    j["per_class"] = per_class;
    j["macro_f1"] = r.macro_f1;
    j["overall_accuracy"] = r.overall_accuracy;
    j["kappa"] = r.kappa;
    json norm = json::array();
    for (int g = 0; g < nm.k; ++g) {
        json row = json::array();
        for (int p = 0; p < nm.k; ++p)
            row.push_back(nm.rows[static_cast<size_t>(g * nm.k + p)]);
        norm.push_back(row);
    }
    j["normalized_rows"] = norm;
    json zeros = json::array();
    for (int g = 0; g < nm.k; ++g) zeros.push_back(static_cast<bool>(nm.zero_rows[static_cast<size_t>(g)]));
    j["zero_rows"] = zeros;
    return j;
}

json eval_json(const EvalResult& e, const std::string& digest) {
    json j;
    j["four_class"] = metrics_json(e.four, e.norm4);
    j["binary"] = metrics_json(e.binary, e.norm2);
    j["tiles"] = e.tiles;
    j["dataset_digest"] = digest;
    return j;
}

struct RunOutputs {
    EvalResult eval;
    int64_t params = 0;
    std::string checkpoint_path;
};

// Shared body of train/ssl/benchmark cells. strategy 0 is plain supervised
// training; 1..4 run the consistency loop after a supervised warm start.
RunOutputs execute_run(const RunConfig& cfg, const DataBundle& data,
                       const std::string& dir) {
    fs::create_directories(dir);
    const std::string started = now_iso8601();

    auto model = make_model<float>(cfg.model, model_config(cfg), cfg.seed);
    TrainConfig tc = train_config(cfg, data.labeled_tiles);

    TrainHistory history;
    if (cfg.strategy == 0) {
        history = pretrain(*model, data.labeled_tiles, tc);
    } else {
        if (!cfg.checkpoint.empty()) {
            model->load(cfg.checkpoint);
        } else {
            TrainConfig pre_tc = tc;
            pre_tc.epochs = cfg.pretrain_epochs > 0 ? cfg.pretrain_epochs : cfg.epochs;
            TrainHistory pre_history = pretrain(*model, data.labeled_tiles, pre_tc);
            write_text((fs::path(dir) / "pretrain_history.csv").string(),
                       pre_history.csv());
        }
        history = ssl_train(*model, data.labeled_tiles, data.unlabeled_tiles,
                            strategy_from_int(cfg.strategy), tc);
    }

    RunOutputs out;
    out.checkpoint_path = (fs::path(dir) / "checkpoint.ntf").string();
    model->save(out.checkpoint_path);
    out.params = model->parameter_count();
    out.eval = evaluate_tiles(*model, data.test_tiles, cfg.batch_size);

    write_text((fs::path(dir) / "history.csv").string(), history.csv());
    write_text((fs::path(dir) / "eval.json").string(),
               eval_json(out.eval, data.digest).dump(2) + "\n");

    json manifest;
    manifest["config"] = json::parse(cfg.to_json());
    manifest["dataset_digest"] = data.digest;
    manifest["started"] = started;
    manifest["finished"] = now_iso8601();
    manifest["checkpoint"] = out.checkpoint_path;
    manifest["parameter_count"] = out.params;
    manifest["tool_version"] = kToolVersion;
    manifest["final_metrics"] = {
        {"macro_f1", out.eval.four.macro_f1},
        {"overall_accuracy", out.eval.four.overall_accuracy},
        {"kappa", out.eval.four.kappa},
        {"binary_f1_damaged", out.eval.binary.per_class.at(1).f1},
        {"binary_overall_accuracy", out.eval.binary.overall_accuracy},
        {"binary_kappa", out.eval.binary.kappa}};
    write_text((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    return out;
}

}  // namespace

void run_synth(const RunConfig& cfg) {
    cfg.validate();
    const std::string dest = cfg.data_dir.empty() ? cfg.out_dir : cfg.data_dir;
    if (dest.empty()) throw ConfigError("data_dir: required as the synth destination");

    SynthConfig sc;
    sc.scene_count = cfg.scenes;
    sc.extent = cfg.extent;
    sc.class_ratios = cfg.ratios;
    const std::vector<ScenePair> scenes = generate_synthetic(sc, cfg.seed);

    json gen;
    gen["seed"] = cfg.seed;
    gen["scenes"] = cfg.scenes;
    gen["extent"] = cfg.extent;
    gen["ratios"] = cfg.ratios;
    gen["tool_version"] = kToolVersion;
    save_scene_dir(dest, scenes, gen.dump());

    const std::array<double, 4> achieved = class_ratios(scenes);
    std::printf("wrote %zu scenes to %s\n", scenes.size(), dest.c_str());
    for (int c = 0; c < 4; ++c)
        std::printf("class %d: generated %.4f%%  target %.4f%%\n", c,
                    100.0 * achieved[static_cast<size_t>(c)],
                    100.0 * cfg.ratios[static_cast<size_t>(c)]);
    std::printf("dataset_digest %s\n", dataset_digest(scenes).c_str());
}

void run_train(const RunConfig& cfg) {
    cfg.validate();
    RunConfig c = cfg;
    c.strategy = 0;
    const DataBundle data = prepare_data(c);
    const RunOutputs out = execute_run(c, data, c.out_dir);
    std::printf("train done: macro_f1 %.6f  oa %.6f  kappa %.6f  params %lld\n",
                out.eval.four.macro_f1, out.eval.four.overall_accuracy,
                out.eval.four.kappa, static_cast<long long>(out.params));
}

void run_ssl(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.strategy < 1)
        throw ConfigError("strategy: ssl needs a strategy in 1..4 (use train for none)");
    const DataBundle data = prepare_data(cfg);
    const RunOutputs out = execute_run(cfg, data, cfg.out_dir);
    std::printf("ssl done: strategy %d  macro_f1 %.6f  oa %.6f  kappa %.6f\n",
                cfg.strategy, out.eval.four.macro_f1, out.eval.four.overall_accuracy,
                out.eval.four.kappa);
}

void run_eval(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.checkpoint.empty()) throw ConfigError("checkpoint: required for eval");
    const DataBundle data = prepare_data(cfg);
    auto model = make_model<float>(cfg.model, model_config(cfg), cfg.seed);
    model->load(cfg.checkpoint);
    const EvalResult eval = evaluate_tiles(*model, data.test_tiles, cfg.batch_size);
    fs::create_directories(cfg.out_dir);
    json j = eval_json(eval, data.digest);
    j["checkpoint"] = cfg.checkpoint;
    write_text((fs::path(cfg.out_dir) / "eval.json").string(), j.dump(2) + "\n");
    std::printf("eval done: macro_f1 %.6f  oa %.6f  kappa %.6f\n", eval.four.macro_f1,
                eval.four.overall_accuracy, eval.four.kappa);
}

void run_benchmark(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.data_dir.empty()) throw ConfigError("data_dir: required for benchmark");

    std::vector<std::string> models, strategies, ratios;
    {
        std::stringstream sm(cfg.grid_models), ss(cfg.grid_strategies), sr(cfg.grid_ratios);
        std::string item;
        while (std::getline(sm, item, ',')) if (!item.empty()) models.push_back(item);
        while (std::getline(ss, item, ',')) if (!item.empty()) strategies.push_back(item);
        while (std::getline(sr, item, ',')) if (!item.empty()) ratios.push_back(item);
    }
    if (models.empty() || strategies.empty() || ratios.empty())
        throw ConfigError("benchmark grid lists must be non-empty");

    fs::create_directories(cfg.out_dir);
    std::string csv =
        "model,strategy,label_ratio,seed,"
        "prec_0,rec_0,f1_0,prec_1,rec_1,f1_1,prec_2,rec_2,f1_2,prec_3,rec_3,f1_3,"
        "macro_f1,oa,kappa,params\n";
    char buf[512];

    struct Row {
        std::array<double, 15> vals;  // 12 per-class + macro + oa + kappa
        double params;
    };

    for (const std::string& strat : strategies) {
        for (const std::string& ratio : ratios) {
            std::vector<Row> group;
            for (const std::string& model : models) {
                RunConfig cell = cfg;
                cell.model = model;
                apply_kv(cell, "strategy", strat);
                apply_kv(cell, "label_ratio", ratio);
                cell.command = cell.strategy == 0 ? "train" : "ssl";
                cell.validate();
                const std::string dir =
                    (fs::path(cfg.out_dir) /
                     ("cell_" + model + "_s" + std::to_string(cell.strategy) + "_r" + ratio))
                        .string();
                const DataBundle data = prepare_data(cell);
                const RunOutputs out = execute_run(cell, data, dir);

                Row row{};
                for (int c = 0; c < 4; ++c) {
                    const ClassMetrics& m = out.eval.four.per_class[static_cast<size_t>(c)];
                    row.vals[static_cast<size_t>(3 * c + 0)] = m.precision;
                    row.vals[static_cast<size_t>(3 * c + 1)] = m.recall;
                    row.vals[static_cast<size_t>(3 * c + 2)] = m.f1;
                }
                row.vals[12] = out.eval.four.macro_f1;
                row.vals[13] = out.eval.four.overall_accuracy;
                row.vals[14] = out.eval.four.kappa;
                row.params = static_cast<double>(out.params);
                group.push_back(row);

                std::snprintf(buf, sizeof(buf),
                              "%s,%s,%s,%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
                              "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.0f\n",
                              model.c_str(), strat.c_str(), ratio.c_str(),
                              static_cast<unsigned long long>(cell.seed), row.vals[0],
                              row.vals[1], row.vals[2], row.vals[3], row.vals[4],
                              row.vals[5], row.vals[6], row.vals[7], row.vals[8],
                              row.vals[9], row.vals[10], row.vals[11], row.vals[12],
                              row.vals[13], row.vals[14], row.params);
                csv += buf;
                std::printf("cell %-8s strategy %-4s ratio %-4s  macro_f1 %.6f\n",
                            model.c_str(), strat.c_str(), ratio.c_str(), row.vals[12]);
            }
            // Table-style average over the models of this strategy/ratio group.
            Row mean{};
            for (const Row& r : group) {
                for (size_t i = 0; i < mean.vals.size(); ++i) mean.vals[i] += r.vals[i];
                mean.params += r.params;
            }
            const auto n = static_cast<double>(group.size());
            for (double& v : mean.vals) v /= n;
            mean.params /= n;
            std::snprintf(buf, sizeof(buf),
                          "mean,%s,%s,%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
                          "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.1f\n",
                          strat.c_str(), ratio.c_str(),
                          static_cast<unsigned long long>(cfg.seed), mean.vals[0],
                          mean.vals[1], mean.vals[2], mean.vals[3], mean.vals[4],
                          mean.vals[5], mean.vals[6], mean.vals[7], mean.vals[8],
                          mean.vals[9], mean.vals[10], mean.vals[11], mean.vals[12],
                          mean.vals[13], mean.vals[14], mean.params);
            csv += buf;
        }
    }
    write_text((fs::path(cfg.out_dir) / "benchmark.csv").string(), csv);
    std::printf("benchmark table written to %s\n",
                (fs::path(cfg.out_dir) / "benchmark.csv").string().c_str());
}

void run_gradcheck(const RunConfig& cfg) {
    (void)cfg;
    const std::vector<GradCheckResult> results = run_full_suite();
    std::fputs(format_report(results).c_str(), stdout);
    if (!all_passed(results)) throw NumericError("gradient suite failed");
    std::printf("gradient suite passed (%zu checks)\n", results.size());
}

}  // namespace floodbench
