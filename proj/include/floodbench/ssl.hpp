#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "floodbench/data.hpp"
#include "floodbench/losses.hpp"
#include "floodbench/models.hpp"

namespace floodbench {

// Length-4 class-probability vector over the damage scale.
struct ClassDistribution {
    std::array<double, 4> p{1.0, 0.0, 0.0, 0.0};
    void validate() const;
};

// Pixel histogram of a label map, normalized to probabilities.
ClassDistribution class_distribution(const std::vector<uint8_t>& labels);

// Fixed-capacity FIFO of class distributions. The reference is the mean of
// whatever has accumulated so far (partial mean during warm-up).
class ReferenceBuffer {
public:
    explicit ReferenceBuffer(size_t capacity = 10);

    void push(const ClassDistribution& d);
    ClassDistribution reference() const;
    size_t size() const { return entries_.size(); }
    size_t capacity() const { return capacity_; }

private:
    size_t capacity_;
    std::deque<ClassDistribution> entries_;
};

// Where the consistency reference distribution comes from. None means plain
// supervised training with no consistency term.
enum class Strategy {
    None = 0,
    PseudoUnlabeled = 1,  // predictions on unlabeled images
    PredLabeled = 2,      // predictions on labeled images
    GroundTruth = 3,      // ground-truth maps of labeled images
    Combined = 4,         // all three, independently buffered and weighted
};

Strategy strategy_from_int(int value);
std::string strategy_name(Strategy s);

// Per-pixel argmax over the class axis of a [B,K,H,W] value buffer; exact
// ties resolve to the lowest class index.
template <typename S>
std::vector<uint8_t> argmax_channels(const std::vector<S>& values,
                                     const std::vector<int64_t>& shape);

// Hard label maps from a model: forward, softmax, per-pixel argmax. Runs
// outside any tape; the model is not mutated.
template <typename S>
std::vector<uint8_t> predict_labels(Model<S>& model, const Tensor<S>& pre,
                                    const Tensor<S>& post);

struct TrainConfig {
    int epochs = 150;
    int64_t batch_size = 24;
    double lr = 3e-5;
    uint64_t seed = 0;
    ClassWeights weights;
    double alpha = 1e-3;
    std::array<double, 3> betas{1e-3, 1e-3, 1e-3};
    int64_t buffer_capacity = 10;
    double label_ratio = 1.0;  // recorded in history rows

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double l_s = 0.0;
    double l_entropy = 0.0;
    double l_kl = 0.0;  // weighted consistency term as it enters the total
    double total = 0.0;
    double lr = 0.0;
    // Unweighted per-stream mean KL, filled only by the combined strategy.
    std::array<double, 3> kl_terms{0.0, 0.0, 0.0};
};

struct TrainHistory {
    Strategy strategy = Strategy::None;
    double label_ratio = 1.0;
    uint64_t seed = 0;
    std::vector<EpochStats> epochs;

    // One row per epoch; the combined strategy adds three raw KL columns.
    std::string csv() const;
};

// Supervised training with the weighted cross-entropy only.
template <typename S>
TrainHistory pretrain(Model<S>& model, const std::vector<Tile>& labeled,
                      const TrainConfig& config);

// Semi-supervised loop: supervised CE on labeled batches plus entropy and
// reference-distribution consistency on unlabeled batches. The model passed
// in is expected to carry pre-trained parameters; a frozen copy of it
// generates the prediction-group buffer entries during the first epoch.
template <typename S>
TrainHistory ssl_train(Model<S>& model, const std::vector<Tile>& labeled,
                       const std::vector<Tile>& unlabeled, Strategy strategy,
                       const TrainConfig& config);

}  // namespace floodbench
