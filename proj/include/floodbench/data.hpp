#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "floodbench/png_io.hpp"
#include "floodbench/tensor.hpp"

namespace floodbench {

// One bitemporal scene: co-registered pre/post rasters [C,H,W] and a
// per-pixel damage label map [H,W] over {0..3}.
struct ScenePair {
    std::string scene_id;
    int64_t channels = 3, height = 0, width = 0;
    std::vector<uint8_t> pre, post;  // planar [C,H,W]
    std::vector<uint8_t> label;      // [H,W]

    void validate() const;
};

struct Tile {
    std::string scene_id;
    int64_t row = 0, col = 0;  // origin in the source scene
    int64_t channels = 0, size = 0;
    std::vector<uint8_t> pre, post;  // [C,size,size]
    std::vector<uint8_t> label;      // [size,size]
};

// Origins at multiples of stride with origin+tile <= extent; trailing pixels
// that do not fill a tile are dropped.
std::vector<Tile> tile_scene(const ScenePair& scene, int64_t tile, int64_t stride);

struct SplitSpec {
    double train = 0.6, val = 0.2, test = 0.2;
    uint64_t seed = 0;
};

struct SceneSplit {
    std::vector<size_t> train, val, test;  // indices into the scene list
};

// Deterministic seeded shuffle, then partition by scene. Val and test sizes
// round to nearest; train absorbs the remainder.
SceneSplit split_scenes(size_t scene_count, const SplitSpec& spec);

// Uniform sample without replacement over scenes; the labeled count is
// round(ratio * n) clamped to at least 1. Both outputs are sorted.
void sample_labeled(const std::vector<size_t>& train_scenes, double ratio,
                    uint64_t seed, std::vector<size_t>& labeled,
                    std::vector<size_t>& unlabeled);

struct SynthConfig {
    int64_t scene_count = 40;
    int64_t extent = 128;  // square scenes, >= 64 and divisible by 16
    int64_t channels = 3;
    // Fractions of all pixels per damage class; flood-event calibration.
    std::array<double, 4> class_ratios{0.9170, 0.0428, 0.0368, 0.0033};

    void validate() const;
};

// Procedural scene set: textured background, rectangular buildings, damage
// rendered into the post image as texture perturbation plus edge erosion
// growing with the damage class. Each scene fills its own damage-class pixel
// quotas greedily by relative deficit, so per-scene class fractions track the
// configured ratios. Deterministic in (config, seed).
// Guarantees: labeled damaged pixels always differ between pre and post;
// intact (class 0) building pixels are byte-identical.
std::vector<ScenePair> generate_synthetic(const SynthConfig& config, uint64_t seed);

// Realized per-class pixel fractions over a scene set.
std::array<double, 4> class_ratios(const std::vector<ScenePair>& scenes);

uint64_t scene_digest(const ScenePair& scene);
std::string dataset_digest(const std::vector<ScenePair>& scenes);

// Directory layout: <root>/<scene_id>/{pre.png,post.png,label.png} plus a
// dataset.json manifest (scene list, digests, generator config if any).
void save_scene_dir(const std::string& root, const std::vector<ScenePair>& scenes,
                    const std::string& generator_json = "");

// strict: malformed scenes abort with DataError; otherwise they are skipped
// with a warning on stderr.
std::vector<ScenePair> load_scene_dir(const std::string& root, bool strict = true);

// Assembles count tiles (picked by order[start..start+count)) into [0,1]
// float tensors [count,C,S,S] and a row-major label vector.
template <typename S>
void make_batch(const std::vector<Tile>& tiles, const std::vector<size_t>& order,
                size_t start, size_t count, Tensor<S>& pre, Tensor<S>& post,
                std::vector<uint8_t>& labels);

// Pixel counts per damage class over a tile list (class-weight input).
std::array<int64_t, 4> label_histogram(const std::vector<Tile>& tiles);

}  // namespace floodbench
