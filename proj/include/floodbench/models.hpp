#pragma once

#include <memory>
#include <string>

#include "floodbench/attention.hpp"
#include "floodbench/checkpoint.hpp"
#include "floodbench/optim.hpp"
#include "floodbench/tensor.hpp"

namespace floodbench {

struct ModelConfig {
    int64_t input_channels = 3;  // per temporal image
    int64_t class_count = 4;
    std::vector<int64_t> encoder_channels = {16, 32, 64, 128, 256};
    int64_t bit_feature_dim = 32;
    int64_t bit_token_count = 4;
    int64_t bit_head_count = 4;
    int64_t bit_head_dim = 8;
    double attention_lambda = 1e-4;

    void validate() const;
};

// A change-detection network over a bitemporal image pair. Parameters are
// ordered, named tensors; construction order fixes checkpoint layout.
template <typename S>
class Model {
public:
    virtual ~Model() = default;

    // pre/post: [B,C0,H,W] with identical shapes, H and W divisible by 16.
    // Returns 4-class logits [B,4,H,W].
    virtual Tensor<S> forward(Tape<S>& tape, const Tensor<S>& pre,
                              const Tensor<S>& post) = 0;
    virtual std::string kind() const = 0;

    NamedParams<S>& parameters() { return params_; }
    const NamedParams<S>& parameters() const { return params_; }
    int64_t parameter_count() const;
    void zero_grad();
    void save(const std::string& path) const { save_checkpoint(path, params_); }
    void load(const std::string& path) { load_checkpoint(path, params_); }
    // Copies values from a same-architecture model (frozen snapshots).
    void copy_from(const Model<S>& other);

    const ModelConfig& config() const { return config_; }

protected:
    explicit Model(const ModelConfig& config) : config_(config) { config_.validate(); }

    void check_pair(const Tensor<S>& pre, const Tensor<S>& post) const;

    // Xavier-uniform weight: limit sqrt(6/(fan_in+fan_out)), fans read from
    // the shape (conv [Cout,Cin,k,k] or linear [din,dout]).
    Tensor<S> add_weight(const std::string& name, std::vector<int64_t> shape,
                         Rng& rng);
    Tensor<S> add_bias(const std::string& name, int64_t n);

    ModelConfig config_;
    NamedParams<S> params_;
};

// Early-fusion UNet: concat(pre,post) through five conv units with 2x2
// pooling, then a four-level decoder with skip concatenation and a 1x1 head.
template <typename S>
class UNet : public Model<S> {
public:
    UNet(const ModelConfig& config, uint64_t seed);
    Tensor<S> forward(Tape<S>& tape, const Tensor<S>& pre,
                      const Tensor<S>& post) override;
    std::string kind() const override { return "unet"; }

protected:
    // Hook applied to each of the four skip feature maps before decoder
    // concatenation; identity here, attention in SpaUNet.
    virtual Tensor<S> attend_skip(Tape<S>& tape, const Tensor<S>& skip) {
        (void)tape;
        return skip;
    }

private:
    struct ConvUnit {
        Tensor<S> w1, b1, w2, b2;
    };
    struct DecoderStage {
        Tensor<S> up_w, up_b;
        ConvUnit unit;
    };
    Tensor<S> run_unit(Tape<S>& tape, const ConvUnit& u, const Tensor<S>& x);

    ConvUnit enc_[5];
    DecoderStage dec_[4];
    Tensor<S> head_w_, head_b_;
};

// UNet with the parameter-free attention module on the four skip paths.
// Identical parameter set to UNet (the attention adds none).
template <typename S>
class SpaUNet : public UNet<S> {
public:
    SpaUNet(const ModelConfig& config, uint64_t seed) : UNet<S>(config, seed) {}
    std::string kind() const override { return "spaunet"; }

protected:
    Tensor<S> attend_skip(Tape<S>& tape, const Tensor<S>& skip) override {
        return prior_attention(tape, skip,
                               static_cast<S>(this->config_.attention_lambda));
    }
};

// Siamese conv stem -> semantic tokens -> one transformer encoder layer over
// the joint token set -> per-stream decoder (pixels query tokens) -> head on
// the absolute feature difference. Swap-invariant in (pre, post).
template <typename S>
class BitModel : public Model<S> {
public:
    BitModel(const ModelConfig& config, uint64_t seed);
    Tensor<S> forward(Tape<S>& tape, const Tensor<S>& pre,
                      const Tensor<S>& post) override;
    std::string kind() const override { return "bit"; }

private:
    TransformerLayerParams<S> make_layer(const std::string& prefix, Rng& rng);

    Tensor<S> stem_w1_, stem_b1_, stem_w2_, stem_b2_;
    Tensor<S> token_w_;
    TransformerLayerParams<S> enc_layer_, dec_layer_;
    Tensor<S> head_w1_, head_b1_, head_w2_, head_b2_;
};

template <typename S>
std::unique_ptr<Model<S>> make_model(const std::string& kind,
                                     const ModelConfig& config, uint64_t seed);

}  // namespace floodbench
