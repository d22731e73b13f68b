#include "floodbench/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "floodbench/common.hpp"

namespace floodbench {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

void apply_kv(RunConfig& c, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "preset") c.preset = v;
    else if (key == "model") c.model = v;
    else if (key == "strategy") {
        if (v == "none") c.strategy = 0;
        else c.strategy = static_cast<int>(parse_int(key, v));
    } else if (key == "label_ratio") c.label_ratio = parse_double(key, v);
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, v));
    else if (key == "pretrain_epochs") c.pretrain_epochs = static_cast<int>(parse_int(key, v));
    else if (key == "batch_size") c.batch_size = parse_int(key, v);
    else if (key == "lr") c.lr = parse_double(key, v);
    else if (key == "lambda") c.lambda = parse_double(key, v);
    else if (key == "alpha") c.alpha = parse_double(key, v);
    else if (key == "betas") {
        const auto parts = split_commas(v);
        if (parts.size() != 3) throw ConfigError("betas: expected three comma-separated values");
        for (size_t i = 0; i < 3; ++i) c.betas[i] = parse_double(key, parts[i]);
    } else if (key == "buffer_n") c.buffer_n = parse_int(key, v);
    else if (key == "seed") c.seed = parse_u64(key, v);
    else if (key == "channels") {
        const auto parts = split_commas(v);
        if (parts.size() != 5) throw ConfigError("channels: expected five comma-separated values");
        c.channels.clear();
        for (const auto& p : parts) c.channels.push_back(parse_int(key, p));
    } else if (key == "data_dir") c.data_dir = v;
    else if (key == "out_dir") c.out_dir = v;
    else if (key == "checkpoint") c.checkpoint = v;
    else if (key == "tile") c.tile = parse_int(key, v);
    else if (key == "stride") c.stride = parse_int(key, v);
    else if (key == "scenes") c.scenes = parse_int(key, v);
    else if (key == "extent") c.extent = parse_int(key, v);
    else if (key == "ratios") {
        const auto parts = split_commas(v);
        if (parts.size() != 4) throw ConfigError("ratios: expected four comma-separated values");
        for (size_t i = 0; i < 4; ++i) c.ratios[i] = parse_double(key, parts[i]);
    } else if (key == "grid_models") c.grid_models = v;
    else if (key == "grid_strategies") c.grid_strategies = v;
    else if (key == "grid_ratios") c.grid_ratios = v;
    else throw ConfigError("unknown config key '" + key + "'");
}

void apply_preset(RunConfig& c, const std::string& name) {
    if (name == "desk") {
        c.preset = "desk";
        c.tile = 64;
        c.stride = 64;
        c.channels = {8, 16, 32, 64, 128};
        c.epochs = 30;
        c.batch_size = 8;
        c.lr = 3e-4;
    } else if (name == "paper") {
        c.preset = "paper";
        c.tile = 256;
        c.stride = 256;
        c.channels = {16, 32, 64, 128, 256};
        c.epochs = 150;
        c.batch_size = 24;
        c.lr = 3e-5;
    } else {
        throw ConfigError("preset: expected 'desk' or 'paper', got '" + name + "'");
    }
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        out.emplace_back(key, value);
    }
    return out;
}

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_kv,
                         const std::vector<std::pair<std::string, std::string>>& flag_kv) {
    RunConfig c;
    // The preset key wins from flags over file; everything else layers
    // file first, flags last.
    std::string preset = "desk";
    for (const auto& [k, v] : file_kv)
        if (k == "preset") preset = v;
    for (const auto& [k, v] : flag_kv)
        if (k == "preset") preset = v;
    apply_preset(c, preset);
    for (const auto& [k, v] : file_kv)
        if (k != "preset") apply_kv(c, k, v);
    for (const auto& [k, v] : flag_kv)
        if (k != "preset") apply_kv(c, k, v);
    return c;
}

void RunConfig::validate() const {
    if (model != "unet" && model != "spaunet" && model != "bit")
        throw ConfigError("model: expected unet, spaunet, or bit, got '" + model + "'");
    if (strategy < 0 || strategy > 4)
        throw ConfigError("strategy: expected none or 1..4, got " + std::to_string(strategy));
    if (!(label_ratio > 0.0) || label_ratio > 1.0)
        throw ConfigError("label_ratio: must be in (0,1]");
    if (epochs < 1) throw ConfigError("epochs: must be at least 1");
    if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs: must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size: must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr: must be positive and finite");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ConfigError("lambda: must be positive and finite");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw ConfigError("alpha: must be non-negative and finite");
    for (double b : betas)
        if (!(b >= 0.0) || !std::isfinite(b))
            throw ConfigError("betas: must be non-negative and finite");
    if (buffer_n < 1) throw ConfigError("buffer_n: must be at least 1");
    if (channels.size() != 5) throw ConfigError("channels: expected five encoder widths");
    for (int64_t ch : channels)
        if (ch < 1) throw ConfigError("channels: widths must be positive");
    if (tile < 16 || tile % 16 != 0)
        throw ConfigError("tile: must be a positive multiple of 16");
    if (stride < 1) throw ConfigError("stride: must be positive");
    if (scenes < 1) throw ConfigError("scenes: must be at least 1");
    if (extent < 64 || extent % 16 != 0)
        throw ConfigError("extent: must be >= 64 and divisible by 16");
    double rsum = 0.0;
    for (double r : ratios) {
        if (r < 0.0 || r >= 1.0) throw ConfigError("ratios: entries must lie in [0,1)");
        rsum += r;
    }
    // Tolerance matches SynthConfig: rounded published proportions may miss 1 by
    // a hundredth of a percent, which the background class soaks up.
    if (std::abs(rsum - 1.0) > 1e-3) throw ConfigError("ratios: must sum to 1");
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["preset"] = preset;
    j["command"] = command;
    j["model"] = model;
    j["strategy"] = strategy;
    j["label_ratio"] = label_ratio;
    j["epochs"] = epochs;
    j["pretrain_epochs"] = pretrain_epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["lambda"] = lambda;
    j["alpha"] = alpha;
    j["betas"] = betas;
    j["buffer_n"] = buffer_n;
    j["seed"] = seed;
    j["channels"] = channels;
    j["data_dir"] = data_dir;
    j["out_dir"] = out_dir;
    j["checkpoint"] = checkpoint;
    j["tile"] = tile;
    j["stride"] = stride;
    j["scenes"] = scenes;
    j["extent"] = extent;
    j["ratios"] = ratios;
    j["grid_models"] = grid_models;
    j["grid_strategies"] = grid_strategies;
    j["grid_ratios"] = grid_ratios;
    return j.dump(2);
}

}  // namespace floodbench
