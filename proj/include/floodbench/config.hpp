#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace floodbench {

// Fully resolved run settings. Resolution order: built-in defaults, then the
// preset, then the config file, then command-line flags.
struct RunConfig {
    std::string preset = "desk";    // desk | paper
    std::string command;            // filled by the CLI dispatcher

    // model / training
    std::string model = "spaunet";  // unet | spaunet | bit
    int strategy = 0;               // 0 = none, 1..4 = consistency strategies
    double label_ratio = 0.1;
    int epochs = 30;
    int pretrain_epochs = 0;        // 0 = same as epochs (ssl warm-up budget)
    int64_t batch_size = 8;
    double lr = 3e-4;
    double lambda = 1e-4;
    double alpha = 1e-3;
    std::array<double, 3> betas{1e-3, 1e-3, 1e-3};
    int64_t buffer_n = 10;
    uint64_t seed = 0;
    std::vector<int64_t> channels{8, 16, 32, 64, 128};

    // data
    std::string data_dir;
    std::string out_dir = "runs/out";
    std::string checkpoint;  // eval input / ssl warm start
    int64_t tile = 64;
    int64_t stride = 64;

    // synthesis
    int64_t scenes = 40;
    int64_t extent = 128;
    std::array<double, 4> ratios{0.9170, 0.0428, 0.0368, 0.0033};

    // benchmark grid (comma lists)
    std::string grid_models = "spaunet,bit";
    std::string grid_strategies = "none,1";
    std::string grid_ratios = "0.1,0.5";

    void validate() const;
    std::string to_json() const;  // resolved config for manifests
};

// Applies one `key = value` assignment; unknown keys or malformed values
// raise ConfigError naming the key.
void apply_kv(RunConfig& config, const std::string& key, const std::string& value);

// desk: 64px tiles, channels {8,16,32,64,128}, 30 epochs, batch 8, lr 3e-4.
// paper: 256px tiles, channels {16,32,64,128,256}, 150 epochs, batch 24,
// lr 3e-5 (not expected to finish on desk hardware).
void apply_preset(RunConfig& config, const std::string& name);

// Line-based `key = value` pairs, '#' starts a comment, blank lines ignored.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// defaults -> preset -> file pairs -> flag pairs; `preset` keys in either
// list steer which preset is applied first.
RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_kv,
                         const std::vector<std::pair<std::string, std::string>>& flag_kv);

}  // namespace floodbench
