#include "floodbench/ssl.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

namespace floodbench {

void ClassDistribution::validate() const {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw ContractError("class distribution has a negative entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ContractError("class distribution sums to " + std::to_string(sum));
}

ClassDistribution class_distribution(const std::vector<uint8_t>& labels) {
    if (labels.empty()) throw ContractError("class_distribution of an empty label map");
    std::array<int64_t, 4> counts{};
    for (uint8_t v : labels) {
        if (v > 3)
            throw DataError("label value " + std::to_string(int(v)) +
                            " outside the 4-class damage scale");
        ++counts[v];
    }
    ClassDistribution d;
    for (int c = 0; c < 4; ++c)
        d.p[static_cast<size_t>(c)] = static_cast<double>(counts[static_cast<size_t>(c)]) /
                                      static_cast<double>(labels.size());
    return d;
}

ReferenceBuffer::ReferenceBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("reference buffer needs capacity >= 1");
}

void ReferenceBuffer::push(const ClassDistribution& d) {
    d.validate();
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(d);
}

ClassDistribution ReferenceBuffer::reference() const {
    if (entries_.empty()) throw ContractError("reference from an empty buffer");
    ClassDistribution mean;
    mean.p = {0.0, 0.0, 0.0, 0.0};
    for (const ClassDistribution& d : entries_)
        for (int c = 0; c < 4; ++c) mean.p[static_cast<size_t>(c)] += d.p[static_cast<size_t>(c)];
    double sum = 0.0;
    for (double& v : mean.p) {
        v /= static_cast<double>(entries_.size());
        sum += v;
    }
    // The mean of normalized entries can drift at the last bit; renormalize.
    for (double& v : mean.p) v /= sum;
    return mean;
}

Strategy strategy_from_int(int value) {
    if (value < 0 || value > 4)
        throw ConfigError("strategy must be 0 (none) through 4, got " +
                          std::to_string(value));
    return static_cast<Strategy>(value);
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::None: return "none";
        case Strategy::PseudoUnlabeled: return "pseudo-unlabeled";
        case Strategy::PredLabeled: return "pred-labeled";
        case Strategy::GroundTruth: return "ground-truth";
        case Strategy::Combined: return "combined";
    }
    throw ContractError("unknown strategy enum value");
}

template <typename S>
std::vector<uint8_t> argmax_channels(const std::vector<S>& values,
                                     const std::vector<int64_t>& shape) {
    if (shape.size() != 4) throw ContractError("argmax_channels expects a [B,K,H,W] shape");
    const int64_t b = shape[0], k = shape[1], hw = shape[2] * shape[3];
    if (k < 1 || k > 255) throw ContractError("argmax_channels class axis out of range");
    if (static_cast<int64_t>(values.size()) != b * k * hw)
        throw ContractError("argmax_channels buffer does not match its shape");

    std::vector<uint8_t> out(static_cast<size_t>(b * hw));
    for (int64_t i = 0; i < b; ++i)
        for (int64_t p = 0; p < hw; ++p) {
            const S* base = values.data() + i * k * hw + p;
            int best = 0;
            S best_v = base[0];
            for (int c = 1; c < k; ++c)
                if (base[static_cast<int64_t>(c) * hw] > best_v) {
                    best_v = base[static_cast<int64_t>(c) * hw];
                    best = c;
                }
            out[static_cast<size_t>(i * hw + p)] = static_cast<uint8_t>(best);
        }
    return out;
}

template <typename S>
std::vector<uint8_t> predict_labels(Model<S>& model, const Tensor<S>& pre,
                                    const Tensor<S>& post) {
    Tape<S> tape;
    NoGrad<S> guard(tape);
    Tensor<S> logits = model.forward(tape, pre, post);
    Tensor<S> probs = softmax_channels(tape, logits);
    return argmax_channels(probs.value(), probs.shape());
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive and finite");
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw ConfigError("alpha must be non-negative and finite");
    for (double b : betas)
        if (!(b >= 0.0) || !std::isfinite(b))
            throw ConfigError("beta weights must be non-negative and finite");
    if (buffer_capacity < 1) throw ConfigError("buffer capacity must be at least 1");
    if (!(label_ratio > 0.0) || label_ratio > 1.0)
        throw ConfigError("label_ratio must be in (0,1]");
    for (double w : weights.w)
        if (!(w > 0.0) || !std::isfinite(w))
            throw ConfigError("class weights must be positive and finite");
}

std::string TrainHistory::csv() const {
    const bool combined = strategy == Strategy::Combined;
    std::string out =
        combined
            ? "epoch,L_s,L_entropy,L_kl,L_kl1,L_kl2,L_kl3,total,lr,strategy,label_ratio,seed\n"
            : "epoch,L_s,L_entropy,L_kl,total,lr,strategy,label_ratio,seed\n";
    char buf[320];
    for (const EpochStats& e : epochs) {
        if (combined)
            std::snprintf(buf, sizeof(buf),
                          "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%g,%llu\n",
                          e.epoch, e.l_s, e.l_entropy, e.l_kl, e.kl_terms[0],
                          e.kl_terms[1], e.kl_terms[2], e.total, e.lr,
                          static_cast<int>(strategy), label_ratio,
                          static_cast<unsigned long long>(seed));
        else
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%g,%llu\n",
                          e.epoch, e.l_s, e.l_entropy, e.l_kl, e.total, e.lr,
                          static_cast<int>(strategy), label_ratio,
                          static_cast<unsigned long long>(seed));
        out += buf;
    }
    return out;
}

namespace {

// Decorrelates the unlabeled batch stream from the labeled one so that
// adding unlabeled data never perturbs the labeled shuffle sequence.
constexpr uint64_t kUnlabeledStreamSalt = 0x9e3779b97f4a7c15ull;

std::array<double, 4> row_distribution(const std::vector<double>& flat, size_t row) {
    std::array<double, 4> a{};
    double sum = 0.0;
    for (size_t c = 0; c < 4; ++c) {
        a[c] = flat[row * 4 + c];
        sum += a[c];
    }
    for (double& v : a) v /= sum;
    return a;
}

}  // namespace

template <typename S>
TrainHistory pretrain(Model<S>& model, const std::vector<Tile>& labeled,
                      const TrainConfig& config) {
    config.validate();
    if (labeled.empty()) throw ConfigError("pretrain: labeled tile set is empty");

    TrainHistory history;
    history.strategy = Strategy::None;
    history.label_ratio = config.label_ratio;
    history.seed = config.seed;

    Adam<S> opt;
    Rng rng(config.seed);
    std::vector<size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const size_t n = labeled.size();
    const auto batch = static_cast<size_t>(config.batch_size);

    int64_t global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_schedule(config.lr, epoch);
        rng.shuffle(order);
        double sum_ls = 0.0;
        int64_t steps = 0;
        for (size_t start = 0; start < n; start += batch) {
            const size_t count = std::min(batch, n - start);
            try {
                Tape<S> tape;
                Tensor<S> pre, post;
                std::vector<uint8_t> y;
                make_batch(labeled, order, start, count, pre, post, y);
                Tensor<S> logits = model.forward(tape, pre, post);
                Tensor<S> probs = softmax_channels(tape, logits);
                Tensor<S> l_s = weighted_cross_entropy(tape, probs, y, config.weights);
                model.zero_grad();
                tape.backward(l_s);
                opt.step(model.parameters(), static_cast<S>(lr));
                sum_ls += static_cast<double>(l_s.item());
            } catch (const NumericError& err) {
                throw NumericError("epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(global_step) + ": " + err.what());
            }
            ++global_step;
            ++steps;
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.l_s = sum_ls / static_cast<double>(steps);
        stats.total = stats.l_s;
        stats.lr = lr;
        history.epochs.push_back(stats);
    }
    return history;
}

template <typename S>
TrainHistory ssl_train(Model<S>& model, const std::vector<Tile>& labeled,
                       const std::vector<Tile>& unlabeled, Strategy strategy,
                       const TrainConfig& config) {
    config.validate();
    if (strategy == Strategy::None)
        throw ConfigError("ssl_train needs a consistency strategy; use pretrain for plain supervision");
    if (labeled.empty()) throw ConfigError("ssl_train: labeled tile set is empty");
    if (unlabeled.empty()) throw ConfigError("ssl_train: unlabeled tile set is empty");

    const bool use_pred_unlabeled =
        strategy == Strategy::PseudoUnlabeled || strategy == Strategy::Combined;
    const bool use_pred_labeled =
        strategy == Strategy::PredLabeled || strategy == Strategy::Combined;
    const bool use_ground_truth =
        strategy == Strategy::GroundTruth || strategy == Strategy::Combined;

    // Frozen copy of the incoming (pre-trained) parameters; it supplies the
    // prediction-group label maps during the first epoch, after which the
    // evolving model takes over.
    std::unique_ptr<Model<S>> snapshot;
    if (use_pred_unlabeled || use_pred_labeled) {
        snapshot = make_model<S>(model.kind(), model.config(), 0);
        snapshot->copy_from(model);
    }

    const auto cap = static_cast<size_t>(config.buffer_capacity);
    ReferenceBuffer buf_pred_u(cap), buf_pred_l(cap), buf_gt(cap);

    TrainHistory history;
    history.strategy = strategy;
    history.label_ratio = config.label_ratio;
    history.seed = config.seed;

    Adam<S> opt;
    Rng rng_l(config.seed);
    Rng rng_u(config.seed ^ kUnlabeledStreamSalt);
    std::vector<size_t> order_l(labeled.size()), order_u(unlabeled.size());
    std::iota(order_l.begin(), order_l.end(), size_t{0});
    std::iota(order_u.begin(), order_u.end(), size_t{0});
    const size_t n_l = labeled.size(), n_u = unlabeled.size();
    const auto batch = static_cast<size_t>(config.batch_size);
    const size_t count_u = std::min(batch, n_u);

    int64_t global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_schedule(config.lr, epoch);
        rng_l.shuffle(order_l);
        rng_u.shuffle(order_u);
        size_t u_cursor = 0;
        const bool frozen_epoch = epoch == 0;

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        int64_t steps = 0;

        for (size_t start = 0; start < n_l; start += batch) {
            const size_t count_l = std::min(batch, n_l - start);
            if (u_cursor + count_u > n_u) u_cursor = 0;
            try {
                Tape<S> tape;
                Tensor<S> pre_l, post_l, pre_u, post_u;
                std::vector<uint8_t> y_l, y_u_unused;
                make_batch(labeled, order_l, start, count_l, pre_l, post_l, y_l);
                make_batch(unlabeled, order_u, u_cursor, count_u, pre_u, post_u,
                           y_u_unused);

                Tensor<S> logits_l = model.forward(tape, pre_l, post_l);
                Tensor<S> probs_l = softmax_channels(tape, logits_l);
                Tensor<S> l_s = weighted_cross_entropy(tape, probs_l, y_l, config.weights);

                Tensor<S> logits_u = model.forward(tape, pre_u, post_u);
                Tensor<S> probs_u = softmax_channels(tape, logits_u);
                Tensor<S> l_ent = entropy_loss(tape, probs_u);

                // Expected per-image class distributions: mean over pixels of
                // the per-pixel probabilities, kept differentiable.
                Tensor<S> pooled = mean_spatial(tape, probs_u);
                Tensor<S> dists = reshape(tape, pooled,
                                          {static_cast<int64_t>(count_u), 4});

                // Refresh the buffers with this step's newest label maps,
                // then read the references.
                if (use_pred_unlabeled) {
                    std::vector<uint8_t> maps =
                        frozen_epoch ? predict_labels(*snapshot, pre_u, post_u)
                                     : argmax_channels(probs_u.value(), probs_u.shape());
                    buf_pred_u.push(class_distribution(maps));
                }
                if (use_pred_labeled) {
                    std::vector<uint8_t> maps =
                        frozen_epoch ? predict_labels(*snapshot, pre_l, post_l)
                                     : argmax_channels(probs_l.value(), probs_l.shape());
                    buf_pred_l.push(class_distribution(maps));
                }
                if (use_ground_truth) buf_gt.push(class_distribution(y_l));

                std::vector<std::array<double, 4>> refs;
                std::vector<double> betas;
                if (strategy == Strategy::Combined) {
                    refs = {buf_pred_u.reference().p, buf_pred_l.reference().p,
                            buf_gt.reference().p};
                    betas = {config.betas[0], config.betas[1], config.betas[2]};
                } else {
                    if (use_pred_unlabeled) refs = {buf_pred_u.reference().p};
                    else if (use_pred_labeled) refs = {buf_pred_l.reference().p};
                    else refs = {buf_gt.reference().p};
                    betas = {config.betas[0]};
                }
                Tensor<S> l_kl = consistency_loss(tape, dists, refs, betas);
                Tensor<S> total = total_ssl_loss(tape, l_s, l_ent, l_kl,
                                                 static_cast<S>(config.alpha));

                model.zero_grad();
                tape.backward(total);
                opt.step(model.parameters(), static_cast<S>(lr));

                stats.l_s += static_cast<double>(l_s.item());
                stats.l_entropy += static_cast<double>(l_ent.item());
                stats.l_kl += static_cast<double>(l_kl.item());
                stats.total += static_cast<double>(total.item());
                if (strategy == Strategy::Combined) {
                    std::vector<double> rows(dists.value().begin(), dists.value().end());
                    for (size_t k = 0; k < 3; ++k) {
                        double acc = 0.0;
                        for (size_t i = 0; i < count_u; ++i)
                            acc += kl_divergence(row_distribution(rows, i), refs[k]);
                        stats.kl_terms[k] += acc / static_cast<double>(count_u);
                    }
                }
            } catch (const NumericError& err) {
                throw NumericError("epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(global_step) + ": " + err.what());
            }
            u_cursor += count_u;
            ++global_step;
            ++steps;
        }

        const auto d = static_cast<double>(steps);
        stats.l_s /= d;
        stats.l_entropy /= d;
        stats.l_kl /= d;
        stats.total /= d;
        for (double& v : stats.kl_terms) v /= d;
        history.epochs.push_back(stats);
    }
    return history;
}

template std::vector<uint8_t> argmax_channels<float>(const std::vector<float>&,
                                                     const std::vector<int64_t>&);
template std::vector<uint8_t> argmax_channels<double>(const std::vector<double>&,
                                                      const std::vector<int64_t>&);
template std::vector<uint8_t> predict_labels<float>(Model<float>&, const Tensor<float>&,
                                                    const Tensor<float>&);
template std::vector<uint8_t> predict_labels<double>(Model<double>&,
                                                     const Tensor<double>&,
                                                     const Tensor<double>&);
template TrainHistory pretrain<float>(Model<float>&, const std::vector<Tile>&,
                                      const TrainConfig&);
template TrainHistory pretrain<double>(Model<double>&, const std::vector<Tile>&,
                                       const TrainConfig&);
template TrainHistory ssl_train<float>(Model<float>&, const std::vector<Tile>&,
                                       const std::vector<Tile>&, Strategy,
                                       const TrainConfig&);
template TrainHistory ssl_train<double>(Model<double>&, const std::vector<Tile>&,
                                        const std::vector<Tile>&, Strategy,
                                        const TrainConfig&);

}  // namespace floodbench
