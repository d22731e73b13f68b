#include "floodbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace floodbench {

void ScenePair::validate() const {
    if (channels != 1 && channels != 3)
        throw DataError("scene " + scene_id + ": unsupported channel count " +
                        std::to_string(channels));
    if (height <= 0 || width <= 0)
        throw DataError("scene " + scene_id + ": empty raster");
    const size_t plane = static_cast<size_t>(height * width);
    if (pre.size() != plane * static_cast<size_t>(channels) ||
        post.size() != pre.size())
        throw DataError("scene " + scene_id + ": pre/post buffers do not match dims");
    if (label.size() != plane)
        throw DataError("scene " + scene_id + ": label buffer does not match dims");
    for (uint8_t v : label)
        if (v > 3)
            throw DataError("scene " + scene_id + ": label value " +
                            std::to_string(int(v)) +
                            " outside the 4-class damage scale");
}

// ---- tiling -------------------------------------------------------------

std::vector<Tile> tile_scene(const ScenePair& scene, int64_t tile, int64_t stride) {
    scene.validate();
    if (stride <= 0) throw ContractError("tile_scene: stride must be positive");
    if (tile <= 0) throw ContractError("tile_scene: tile must be positive");
    if (tile > scene.height || tile > scene.width)
        throw DataError("tile_scene: tile " + std::to_string(tile) +
                        " exceeds scene extent " + std::to_string(scene.height) +
                        "x" + std::to_string(scene.width));

    const int64_t ny = (scene.height - tile) / stride + 1;
    const int64_t nx = (scene.width - tile) / stride + 1;
    std::vector<Tile> out;
    out.reserve(static_cast<size_t>(ny * nx));
    for (int64_t ty = 0; ty < ny; ++ty)
        for (int64_t tx = 0; tx < nx; ++tx) {
            Tile t;
            t.scene_id = scene.scene_id;
            t.row = ty * stride;
            t.col = tx * stride;
            t.channels = scene.channels;
            t.size = tile;
            t.pre.resize(static_cast<size_t>(scene.channels * tile * tile));
            t.post.resize(t.pre.size());
            t.label.resize(static_cast<size_t>(tile * tile));
            for (int64_t c = 0; c < scene.channels; ++c)
                for (int64_t y = 0; y < tile; ++y) {
                    const size_t src = static_cast<size_t>(
                        (c * scene.height + t.row + y) * scene.width + t.col);
                    const size_t dst = static_cast<size_t>((c * tile + y) * tile);
                    std::copy_n(scene.pre.begin() + static_cast<int64_t>(src), tile,
                                t.pre.begin() + static_cast<int64_t>(dst));
                    std::copy_n(scene.post.begin() + static_cast<int64_t>(src), tile,
                                t.post.begin() + static_cast<int64_t>(dst));
                }
            for (int64_t y = 0; y < tile; ++y) {
                const size_t src = static_cast<size_t>((t.row + y) * scene.width + t.col);
                std::copy_n(scene.label.begin() + static_cast<int64_t>(src), tile,
                            t.label.begin() + y * tile);
            }
            out.push_back(std::move(t));
        }
    return out;
}

// ---- splitting ----------------------------------------------------------

SceneSplit split_scenes(size_t scene_count, const SplitSpec& spec) {
    if (scene_count < 5)
        throw DataError("split_scenes needs at least 5 scenes, got " +
                        std::to_string(scene_count));
    if (spec.train < 0 || spec.val < 0 || spec.test < 0 ||
        std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");

    const auto n = static_cast<int64_t>(scene_count);
    const int64_t n_val = std::llround(spec.val * static_cast<double>(n));
    const int64_t n_test = std::llround(spec.test * static_cast<double>(n));
    const int64_t n_train = n - n_val - n_test;
    if (n_train < 1) throw ConfigError("split ratios leave no training scenes");

    std::vector<size_t> idx(scene_count);
    for (size_t i = 0; i < scene_count; ++i) idx[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(idx);

    SceneSplit split;
    split.train.assign(idx.begin(), idx.begin() + n_train);
    split.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    split.test.assign(idx.begin() + n_train + n_val, idx.end());
    return split;
}

void sample_labeled(const std::vector<size_t>& train_scenes, double ratio,
                    uint64_t seed, std::vector<size_t>& labeled,
                    std::vector<size_t>& unlabeled) {
    if (!(ratio > 0.0) || ratio > 1.0)
        throw ConfigError("label ratio must be in (0,1], got " + std::to_string(ratio));
    if (train_scenes.empty()) throw DataError("sample_labeled on an empty train split");

    const auto n = static_cast<int64_t>(train_scenes.size());
    int64_t count = ratio >= 1.0 ? n : std::llround(ratio * static_cast<double>(n));
    count = std::clamp<int64_t>(count, 1, n);

    std::vector<size_t> idx = train_scenes;
    Rng rng(seed);
    rng.shuffle(idx);
    labeled.assign(idx.begin(), idx.begin() + count);
    unlabeled.assign(idx.begin() + count, idx.end());
    std::sort(labeled.begin(), labeled.end());
    std::sort(unlabeled.begin(), unlabeled.end());
}

// ---- synthetic generator ------------------------------------------------

void SynthConfig::validate() const {
    if (scene_count < 1) throw ConfigError("scene_count must be at least 1");
    if (extent < 64 || extent % 16 != 0)
        throw ConfigError("scene extent must be >= 64 and divisible by 16, got " +
                          std::to_string(extent));
    if (channels != 1 && channels != 3)
        throw ConfigError("synthetic scenes support 1 or 3 channels");
    double sum = 0.0;
    for (double r : class_ratios) {
        if (r < 0.0 || r >= 1.0) throw ConfigError("class ratios must lie in [0,1)");
        sum += r;
    }
    // Published class proportions are rounded to two decimals of a percent, so
    // the sum check leaves room for that; the background class absorbs the slack.
    if (std::abs(sum - 1.0) > 1e-3)
        throw ConfigError("class ratios must sum to 1, got " + std::to_string(sum));
    // Any positive quota is realizable: the painter always places at least one
    // building for a class that is still short, overshooting by at most one
    // footprint, so small scenes need no per-class minimum. What the layout
    // cannot exceed is its building coverage: 45% cell occupancy with a mean
    // footprint of ~72 of 256 cell pixels paints roughly 12% of a scene, so
    // damage quotas beyond that would silently fall short of their targets.
    const double damage = class_ratios[1] + class_ratios[2] + class_ratios[3];
    if (damage > 0.12)
        throw ConfigError("class ratios ask for more damage than the building layout "
                          "can paint (limit 0.12), got " +
                          std::to_string(damage));
}

namespace {

uint8_t clamp_u8(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

struct Building {
    int64_t x0, y0, w, h;
    int cls;
};

}  // namespace

std::vector<ScenePair> generate_synthetic(const SynthConfig& config, uint64_t seed) {
    config.validate();
    const int64_t E = config.extent, C = config.channels;
    const int64_t scene_px = E * E;
    Rng rng(seed);

    std::vector<ScenePair> scenes;
    scenes.reserve(static_cast<size_t>(config.scene_count));

    for (int64_t s = 0; s < config.scene_count; ++s) {
        ScenePair scene;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "scene_%04lld",
                      static_cast<long long>(s));
        scene.scene_id = idbuf;
        scene.channels = C;
        scene.height = E;
        scene.width = E;
        scene.pre.assign(static_cast<size_t>(C * scene_px), 0);
        scene.label.assign(static_cast<size_t>(scene_px), 0);

        // Textured background.
        std::vector<int> base(static_cast<size_t>(C));
        for (int64_t c = 0; c < C; ++c)
            base[static_cast<size_t>(c)] = 60 + static_cast<int>(rng.index(51));
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < scene_px; ++i)
                scene.pre[static_cast<size_t>(c * scene_px + i)] = clamp_u8(
                    base[static_cast<size_t>(c)] + static_cast<int>(rng.index(31)) - 15);

        // Buildings on a 16px grid; per-scene damage quotas are filled by
        // largest relative deficit so every scene realizes all ratios.
        std::array<double, 3> target{}, assigned{};
        for (int c = 0; c < 3; ++c)
            target[static_cast<size_t>(c)] =
                config.class_ratios[static_cast<size_t>(c + 1)] *
                static_cast<double>(scene_px);

        const int64_t cells = E / 16;
        std::vector<Building> buildings;
        for (int64_t cy = 0; cy < cells; ++cy)
            for (int64_t cx = 0; cx < cells; ++cx) {
                if (rng.uniform(0.0, 1.0) >= 0.45) continue;
                Building b;
                b.w = 5 + static_cast<int64_t>(rng.index(8));
                b.h = 5 + static_cast<int64_t>(rng.index(8));
                b.x0 = cx * 16 + 2 + static_cast<int64_t>(rng.index(static_cast<uint64_t>(12 - b.w + 1)));
                b.y0 = cy * 16 + 2 + static_cast<int64_t>(rng.index(static_cast<uint64_t>(12 - b.h + 1)));

                int pick = -1;
                double best = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const size_t u = static_cast<size_t>(c);
                    if (target[u] <= 0.0) continue;
                    const double rel = (target[u] - assigned[u]) / target[u];
                    if (rel > best + 1e-12) {
                        best = rel;
                        pick = c;
                    }
                }
                b.cls = pick < 0 ? 0 : pick + 1;
                if (b.cls > 0)
                    assigned[static_cast<size_t>(b.cls - 1)] +=
                        static_cast<double>(b.w * b.h);

                // Draw into the pre image: 1px dark border, textured fill.
                std::vector<int> col(static_cast<size_t>(C));
                for (int64_t c = 0; c < C; ++c)
                    col[static_cast<size_t>(c)] = 150 + static_cast<int>(rng.index(81));
                for (int64_t y = b.y0; y < b.y0 + b.h; ++y)
                    for (int64_t x = b.x0; x < b.x0 + b.w; ++x) {
                        const bool border = y == b.y0 || y == b.y0 + b.h - 1 ||
                                            x == b.x0 || x == b.x0 + b.w - 1;
                        const int noise = static_cast<int>(rng.index(21)) - 10;
                        for (int64_t c = 0; c < C; ++c) {
                            const int v = col[static_cast<size_t>(c)] + noise;
                            scene.pre[static_cast<size_t>(c * scene_px + y * E + x)] =
                                clamp_u8(border ? v - 60 : v);
                        }
                        if (b.cls > 0)
                            scene.label[static_cast<size_t>(y * E + x)] =
                                static_cast<uint8_t>(b.cls);
                    }
                buildings.push_back(b);
            }

        // Post image starts as a byte copy: background and intact buildings
        // stay identical by construction.
        scene.post = scene.pre;

        for (const Building& b : buildings) {
            if (b.cls == 0) continue;
            const int64_t erosion =
                std::min<int64_t>(b.cls - 1, (std::min(b.w, b.h) - 1) / 2);
            const int shift = 20 + 15 * b.cls;
            for (int64_t y = b.y0; y < b.y0 + b.h; ++y)
                for (int64_t x = b.x0; x < b.x0 + b.w; ++x) {
                    const bool ring = y < b.y0 + erosion || y >= b.y0 + b.h - erosion ||
                                      x < b.x0 + erosion || x >= b.x0 + b.w - erosion;
                    const size_t pix = static_cast<size_t>(y * E + x);
                    if (ring && erosion > 0) {
                        // Collapsed edge: rubble gray replaces the structure.
                        const int g = 90 + static_cast<int>(rng.index(40));
                        for (int64_t c = 0; c < C; ++c)
                            scene.post[static_cast<size_t>(c) * static_cast<size_t>(scene_px) + pix] =
                                clamp_u8(g + static_cast<int>(rng.index(21)) - 10);
                    } else {
                        const int noise = static_cast<int>(rng.index(21)) - 10;
                        for (int64_t c = 0; c < C; ++c) {
                            const size_t u =
                                static_cast<size_t>(c) * static_cast<size_t>(scene_px) + pix;
                            scene.post[u] = clamp_u8(int(scene.pre[u]) - shift + noise);
                        }
                    }
                    // Damaged pixels must always differ from the pre image.
                    bool same = true;
                    for (int64_t c = 0; c < C && same; ++c) {
                        const size_t u =
                            static_cast<size_t>(c) * static_cast<size_t>(scene_px) + pix;
                        same = scene.post[u] == scene.pre[u];
                    }
                    if (same) {
                        const size_t u = pix;
                        scene.post[u] = scene.pre[u] >= 128
                                            ? static_cast<uint8_t>(scene.pre[u] - 16)
                                            : static_cast<uint8_t>(scene.pre[u] + 16);
                    }
                }
        }

        scene.validate();
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

std::array<double, 4> class_ratios(const std::vector<ScenePair>& scenes) {
    std::array<int64_t, 4> counts{};
    int64_t total = 0;
    for (const ScenePair& s : scenes) {
        for (uint8_t v : s.label) ++counts[v];
        total += static_cast<int64_t>(s.label.size());
    }
    if (total == 0) throw DataError("class_ratios on an empty scene set");
    std::array<double, 4> out;
    for (int c = 0; c < 4; ++c)
        out[static_cast<size_t>(c)] = static_cast<double>(counts[static_cast<size_t>(c)]) /
                                      static_cast<double>(total);
    return out;
}

// ---- digests ------------------------------------------------------------

uint64_t scene_digest(const ScenePair& scene) {
    Fnv1a h;
    h.update_str(scene.scene_id);
    h.update_u64(static_cast<uint64_t>(scene.channels));
    h.update_u64(static_cast<uint64_t>(scene.height));
    h.update_u64(static_cast<uint64_t>(scene.width));
    h.update(scene.pre.data(), scene.pre.size());
    h.update(scene.post.data(), scene.post.size());
    h.update(scene.label.data(), scene.label.size());
    return h.digest();
}

std::string dataset_digest(const std::vector<ScenePair>& scenes) {
    Fnv1a h;
    for (const ScenePair& s : scenes) h.update_u64(scene_digest(s));
    return h.hex();
}

// ---- directory IO -------------------------------------------------------

namespace {

ImageU8 to_image(const std::vector<uint8_t>& data, int64_t c, int64_t h, int64_t w) {
    ImageU8 img = make_image(c, h, w);
    img.data = data;
    return img;
}

std::string digest_hex(uint64_t d) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

}  // namespace

void save_scene_dir(const std::string& root, const std::vector<ScenePair>& scenes,
                    const std::string& generator_json) {
    fs::create_directories(root);
    json manifest;
    manifest["scenes"] = json::array();
    for (const ScenePair& s : scenes) {
        s.validate();
        const fs::path dir = fs::path(root) / s.scene_id;
        fs::create_directories(dir);
        write_png((dir / "pre.png").string(),
                  to_image(s.pre, s.channels, s.height, s.width));
        write_png((dir / "post.png").string(),
                  to_image(s.post, s.channels, s.height, s.width));
        write_png((dir / "label.png").string(), to_image(s.label, 1, s.height, s.width));
        manifest["scenes"].push_back(
            {{"id", s.scene_id}, {"digest", digest_hex(scene_digest(s))}});
    }
    manifest["dataset_digest"] = dataset_digest(scenes);
    manifest["generator"] =
        generator_json.empty() ? json(nullptr) : json::parse(generator_json);

    std::ofstream f(fs::path(root) / "dataset.json");
    if (!f) throw DataError("cannot write manifest under " + root);
    f << manifest.dump(2) << "\n";
}

std::vector<ScenePair> load_scene_dir(const std::string& root, bool strict) {
    if (!fs::is_directory(root)) throw DataError("dataset root " + root + " is not a directory");

    std::vector<std::string> ids;
    const fs::path manifest_path = fs::path(root) / "dataset.json";
    if (fs::exists(manifest_path)) {
        std::ifstream f(manifest_path);
        json manifest;
        try {
            f >> manifest;
            for (const auto& entry : manifest.at("scenes"))
                ids.push_back(entry.at("id").get<std::string>());
        } catch (const json::exception& e) {
            throw DataError("malformed manifest " + manifest_path.string() + ": " +
                            e.what());
        }
    } else {
        for (const auto& entry : fs::directory_iterator(root))
            if (entry.is_directory()) ids.push_back(entry.path().filename().string());
        std::sort(ids.begin(), ids.end());
    }
    if (ids.empty())
        std::cerr << "warning: no scenes found under " << root << "\n";

    std::vector<ScenePair> scenes;
    for (const std::string& id : ids) {
        try {
            const fs::path dir = fs::path(root) / id;
            ImageU8 pre = read_png((dir / "pre.png").string());
            ImageU8 post = read_png((dir / "post.png").string());
            ImageU8 lab = read_png((dir / "label.png").string());
            if (post.channels != pre.channels || post.height != pre.height ||
                post.width != pre.width)
                throw DataError("scene " + id + ": pre/post rasters disagree");
            if (lab.channels != 1 || lab.height != pre.height || lab.width != pre.width)
                throw DataError("scene " + id + ": label raster disagrees with images");
            ScenePair s;
            s.scene_id = id;
            s.channels = pre.channels;
            s.height = pre.height;
            s.width = pre.width;
            s.pre = std::move(pre.data);
            s.post = std::move(post.data);
            s.label = std::move(lab.data);
            s.validate();
            scenes.push_back(std::move(s));
        } catch (const DataError& e) {
            if (strict) throw;
            std::cerr << "warning: skipping scene " << id << ": " << e.what() << "\n";
        }
    }
    return scenes;
}

// ---- batch assembly -----------------------------------------------------

template <typename S>
void make_batch(const std::vector<Tile>& tiles, const std::vector<size_t>& order,
                size_t start, size_t count, Tensor<S>& pre, Tensor<S>& post,
                std::vector<uint8_t>& labels) {
    if (count == 0) throw ContractError("make_batch of zero tiles");
    if (start + count > order.size())
        throw ContractError("make_batch: window exceeds order list");
    const Tile& first = tiles.at(order[start]);
    const int64_t C = first.channels, sz = first.size;
    const int64_t n = static_cast<int64_t>(count);

    pre = Tensor<S>::zeros({n, C, sz, sz});
    post = Tensor<S>::zeros({n, C, sz, sz});
    labels.resize(static_cast<size_t>(n * sz * sz));
    const S inv = S(1) / S(255);
    for (int64_t b = 0; b < n; ++b) {
        const Tile& t = tiles.at(order[start + static_cast<size_t>(b)]);
        if (t.channels != C || t.size != sz)
            throw ContractError("make_batch: tiles disagree in geometry");
        const int64_t plane = C * sz * sz;
        for (int64_t i = 0; i < plane; ++i) {
            pre.value()[static_cast<size_t>(b * plane + i)] =
                static_cast<S>(t.pre[static_cast<size_t>(i)]) * inv;
            post.value()[static_cast<size_t>(b * plane + i)] =
                static_cast<S>(t.post[static_cast<size_t>(i)]) * inv;
        }
        std::copy(t.label.begin(), t.label.end(),
                  labels.begin() + b * sz * sz);
    }
}

std::array<int64_t, 4> label_histogram(const std::vector<Tile>& tiles) {
    std::array<int64_t, 4> counts{};
    for (const Tile& t : tiles)
        for (uint8_t v : t.label) {
            if (v > 3)
                throw DataError("tile label value " + std::to_string(int(v)) +
                                " outside the 4-class damage scale");
            ++counts[v];
        }
    return counts;
}

template void make_batch<float>(const std::vector<Tile>&, const std::vector<size_t>&,
                                size_t, size_t, Tensor<float>&, Tensor<float>&,
                                std::vector<uint8_t>&);
template void make_batch<double>(const std::vector<Tile>&, const std::vector<size_t>&,
                                 size_t, size_t, Tensor<double>&, Tensor<double>&,
                                 std::vector<uint8_t>&);

}  // namespace floodbench
