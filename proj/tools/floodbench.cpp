// Command line front end. Parsing and layering live in config.cpp; the
// subcommand bodies live in runner.cpp. This file only wires flags to
// `key = value` pairs and maps typed errors onto exit codes:
//   0 success, 1 internal error, 2 bad configuration, 3 bad data,
//   4 numeric failure.
#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "floodbench/common.hpp"
#include "floodbench/config.hpp"
#include "floodbench/runner.hpp"

namespace {

using KvList = std::vector<std::pair<std::string, std::string>>;

// Registers --key style options that append to the kv list so command line
// order is preserved and later flags win inside resolve_config. Multi-word
// keys also accept a hyphenated spelling (--label-ratio == --label_ratio).
void add_kv_option(CLI::App& cmd, KvList& kv, const std::string& key,
                   const std::string& help) {
    std::string names = "--" + key;
    std::string hyphened = key;
    for (char& c : hyphened)
        if (c == '_') c = '-';
    if (hyphened != key) names += ",--" + hyphened;
    cmd.add_option_function<std::string>(
        names, [&kv, key](const std::string& value) { kv.emplace_back(key, value); },
        help);
}

void add_common_options(CLI::App& cmd, KvList& kv, std::string& config_path) {
    cmd.add_option("--config", config_path, "key = value config file");
    add_kv_option(cmd, kv, "preset", "desk or paper");
    add_kv_option(cmd, kv, "seed", "run seed");
    add_kv_option(cmd, kv, "out_dir", "output directory");
    add_kv_option(cmd, kv, "data_dir", "scene directory");
}

void add_train_options(CLI::App& cmd, KvList& kv) {
    add_kv_option(cmd, kv, "model", "unet, spaunet, or bit");
    add_kv_option(cmd, kv, "epochs", "training epochs");
    add_kv_option(cmd, kv, "batch_size", "tiles per step");
    add_kv_option(cmd, kv, "lr", "initial learning rate");
    add_kv_option(cmd, kv, "lambda", "attention energy regularizer");
    add_kv_option(cmd, kv, "channels", "five encoder widths, comma separated");
    add_kv_option(cmd, kv, "tile", "square tile size");
    add_kv_option(cmd, kv, "stride", "tiling stride");
    add_kv_option(cmd, kv, "label_ratio", "labeled fraction of train scenes");
    add_kv_option(cmd, kv, "checkpoint", "checkpoint file to start from");
}

void add_ssl_options(CLI::App& cmd, KvList& kv) {
    add_kv_option(cmd, kv, "strategy", "reference strategy: none or 1..4");
    add_kv_option(cmd, kv, "alpha", "entropy loss weight");
    add_kv_option(cmd, kv, "betas", "three consistency weights, comma separated");
    add_kv_option(cmd, kv, "buffer_n", "reference buffer capacity");
    add_kv_option(cmd, kv, "pretrain_epochs", "supervised warm start epochs");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace floodbench;

    CLI::App app{"flood damage assessment workbench"};
    app.require_subcommand(1);

    std::string config_path;
    KvList flag_kv;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene set");
    add_common_options(*synth, flag_kv, config_path);
    add_kv_option(*synth, flag_kv, "scenes", "scene count");
    add_kv_option(*synth, flag_kv, "extent", "square scene size in pixels");
    add_kv_option(*synth, flag_kv, "ratios", "four class pixel fractions, comma separated");

    CLI::App* train = app.add_subcommand("train", "supervised training");
    add_common_options(*train, flag_kv, config_path);
    add_train_options(*train, flag_kv);

    CLI::App* ssl = app.add_subcommand("ssl", "semi-supervised training");
    add_common_options(*ssl, flag_kv, config_path);
    add_train_options(*ssl, flag_kv);
    add_ssl_options(*ssl, flag_kv);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common_options(*eval, flag_kv, config_path);
    add_train_options(*eval, flag_kv);

    CLI::App* benchmark = app.add_subcommand("benchmark", "model/strategy/ratio grid");
    add_common_options(*benchmark, flag_kv, config_path);
    add_train_options(*benchmark, flag_kv);
    add_ssl_options(*benchmark, flag_kv);
    add_kv_option(*benchmark, flag_kv, "grid_models", "models to sweep, comma separated");
    add_kv_option(*benchmark, flag_kv, "grid_strategies", "strategies to sweep");
    add_kv_option(*benchmark, flag_kv, "grid_ratios", "label ratios to sweep");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite difference gradient suite");
    add_common_options(*gradcheck, flag_kv, config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        KvList file_kv;
        if (!config_path.empty()) file_kv = read_config_file(config_path);
        RunConfig cfg = resolve_config(file_kv, flag_kv);

        if (synth->parsed()) {
            cfg.command = "synth";
            run_synth(cfg);
        } else if (train->parsed()) {
            cfg.command = "train";
            run_train(cfg);
        } else if (ssl->parsed()) {
            cfg.command = "ssl";
            run_ssl(cfg);
        } else if (eval->parsed()) {
            cfg.command = "eval";
            run_eval(cfg);
        } else if (benchmark->parsed()) {
            cfg.command = "benchmark";
            run_benchmark(cfg);
        } else if (gradcheck->parsed()) {
            cfg.command = "gradcheck";
            run_gradcheck(cfg);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
