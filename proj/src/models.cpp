#include "floodbench/models.hpp"

#include <cmath>

namespace floodbench {

void ModelConfig::validate() const {
    if (input_channels <= 0) throw ConfigError("input_channels must be positive");
    if (class_count != 4)
        throw ConfigError("class_count must be 4 (joint damage scale), got " +
                          std::to_string(class_count));
    if (encoder_channels.size() != 5)
        throw ConfigError("encoder_channels must list exactly 5 widths, got " +
                          std::to_string(encoder_channels.size()));
    for (int64_t c : encoder_channels)
        if (c <= 0) throw ConfigError("encoder channel widths must be positive");
    if (bit_feature_dim <= 0 || bit_token_count <= 0 || bit_head_count <= 0 ||
        bit_head_dim <= 0)
        throw ConfigError("BIT dimensions must be positive");
    if (!(attention_lambda > 0)) throw ConfigError("attention_lambda must be > 0");
}

// ---- Model base ---------------------------------------------------------

template <typename S>
int64_t Model<S>::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

template <typename S>
void Model<S>::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

template <typename S>
void Model<S>::copy_from(const Model<S>& other) {
    if (other.params_.size() != params_.size())
        throw ContractError("copy_from: parameter lists differ in length");
    for (size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].first != other.params_[i].first ||
            params_[i].second.shape() != other.params_[i].second.shape())
            throw ContractError("copy_from: parameter mismatch at " +
                                params_[i].first);
        params_[i].second.value() = other.params_[i].second.value();
    }
}

template <typename S>
void Model<S>::check_pair(const Tensor<S>& pre, const Tensor<S>& post) const {
    if (pre.rank() != 4 || post.rank() != 4)
        throw ShapeError(kind() + ": inputs must be [B,C0,H,W]");
    if (pre.shape() != post.shape())
        throw ShapeError(kind() + ": pre/post shapes differ: " +
                         shape_str(pre.shape()) + " vs " + shape_str(post.shape()));
    if (pre.dim(1) != config_.input_channels)
        throw ShapeError(kind() + ": expected " +
                         std::to_string(config_.input_channels) +
                         " input channels, got " + std::to_string(pre.dim(1)));
    if (pre.dim(2) % 16 != 0 || pre.dim(3) % 16 != 0)
        throw ShapeError(kind() + ": spatial size must be divisible by 16, got " +
                         shape_str(pre.shape()));
}

template <typename S>
Tensor<S> Model<S>::add_weight(const std::string& name, std::vector<int64_t> shape,
                               Rng& rng) {
    int64_t fan_in, fan_out;
    if (shape.size() == 4) {
        fan_in = shape[1] * shape[2] * shape[3];
        fan_out = shape[0] * shape[2] * shape[3];
    } else if (shape.size() == 2) {
        fan_in = shape[0];
        fan_out = shape[1];
    } else {
        throw ContractError("add_weight: unsupported rank for " + name);
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor<S> t = Tensor<S>::zeros(std::move(shape), true);
    for (S& v : t.value()) v = static_cast<S>(rng.uniform(-limit, limit));
    params_.emplace_back(name, t);
    return t;
}

template <typename S>
Tensor<S> Model<S>::add_bias(const std::string& name, int64_t n) {
    Tensor<S> t = Tensor<S>::zeros({n}, true);
    params_.emplace_back(name, t);
    return t;
}

// ---- UNet ---------------------------------------------------------------

template <typename S>
UNet<S>::UNet(const ModelConfig& config, uint64_t seed) : Model<S>(config) {
    Rng rng(seed);
    const auto& ch = config.encoder_channels;
    auto make_unit = [&](const std::string& prefix, int64_t cin, int64_t cout) {
        ConvUnit u;
        u.w1 = this->add_weight(prefix + ".conv1.weight", {cout, cin, 3, 3}, rng);
        u.b1 = this->add_bias(prefix + ".conv1.bias", cout);
        u.w2 = this->add_weight(prefix + ".conv2.weight", {cout, cout, 3, 3}, rng);
        u.b2 = this->add_bias(prefix + ".conv2.bias", cout);
        return u;
    };
    for (int i = 0; i < 5; ++i) {
        const int64_t cin = i == 0 ? 2 * config.input_channels
                                   : ch[static_cast<size_t>(i - 1)];
        enc_[i] = make_unit("enc" + std::to_string(i + 1), cin,
                            ch[static_cast<size_t>(i)]);
    }
    for (int s = 4; s >= 1; --s) {
        const std::string prefix = "dec" + std::to_string(s);
        DecoderStage st;
        const int64_t cin = ch[static_cast<size_t>(s)];
        const int64_t cout = ch[static_cast<size_t>(s - 1)];
        st.up_w = this->add_weight(prefix + ".up.weight", {cout, cin, 3, 3}, rng);
        st.up_b = this->add_bias(prefix + ".up.bias", cout);
        st.unit = make_unit(prefix, 2 * cout, cout);
        dec_[static_cast<size_t>(4 - s)] = st;
    }
    head_w_ = this->add_weight("head.weight", {config.class_count, ch[0], 1, 1}, rng);
    head_b_ = this->add_bias("head.bias", config.class_count);
}

template <typename S>
Tensor<S> UNet<S>::run_unit(Tape<S>& tape, const ConvUnit& u, const Tensor<S>& x) {
    Tensor<S> a = relu(tape, conv2d(tape, x, u.w1, u.b1));
    return relu(tape, conv2d(tape, a, u.w2, u.b2));
}

template <typename S>
Tensor<S> UNet<S>::forward(Tape<S>& tape, const Tensor<S>& pre,
                           const Tensor<S>& post) {
    this->check_pair(pre, post);
    Tensor<S> e[5];
    e[0] = run_unit(tape, enc_[0], concat_dim1(tape, {pre, post}));
    for (int i = 1; i < 5; ++i)
        e[i] = run_unit(tape, enc_[i], max_pool2(tape, e[i - 1]));

    Tensor<S> d = e[4];
    for (int s = 4; s >= 1; --s) {
        const DecoderStage& st = dec_[static_cast<size_t>(4 - s)];
        Tensor<S> up = conv2d(tape, upsample_nearest2(tape, d), st.up_w, st.up_b);
        Tensor<S> skip = attend_skip(tape, e[s - 1]);
        d = run_unit(tape, st.unit, concat_dim1(tape, {skip, up}));
    }
    return conv2d(tape, d, head_w_, head_b_, 0);
}

// ---- BIT ----------------------------------------------------------------

template <typename S>
TransformerLayerParams<S> BitModel<S>::make_layer(const std::string& prefix,
                                                  Rng& rng) {
    const int64_t C = this->config_.bit_feature_dim;
    const int64_t h = this->config_.bit_head_count;
    const int64_t d = this->config_.bit_head_dim;
    TransformerLayerParams<S> p;
    for (int64_t j = 0; j < h; ++j) {
        const std::string hp = prefix + ".head" + std::to_string(j);
        p.wq.push_back(this->add_weight(hp + ".wq", {C, d}, rng));
        p.wk.push_back(this->add_weight(hp + ".wk", {C, d}, rng));
        p.wv.push_back(this->add_weight(hp + ".wv", {C, d}, rng));
    }
    p.wo = this->add_weight(prefix + ".wo", {h * d, C}, rng);
    p.mlp_w1 = this->add_weight(prefix + ".mlp1.weight", {C, 2 * C}, rng);
    p.mlp_b1 = this->add_bias(prefix + ".mlp1.bias", 2 * C);
    p.mlp_w2 = this->add_weight(prefix + ".mlp2.weight", {2 * C, C}, rng);
    p.mlp_b2 = this->add_bias(prefix + ".mlp2.bias", C);
    return p;
}

template <typename S>
BitModel<S>::BitModel(const ModelConfig& config, uint64_t seed) : Model<S>(config) {
    Rng rng(seed);
    const int64_t C0 = config.input_channels;
    const int64_t C = config.bit_feature_dim;
    const int64_t L = config.bit_token_count;
    stem_w1_ = this->add_weight("stem.conv1.weight", {C, C0, 3, 3}, rng);
    stem_b1_ = this->add_bias("stem.conv1.bias", C);
    stem_w2_ = this->add_weight("stem.conv2.weight", {C, C, 3, 3}, rng);
    stem_b2_ = this->add_bias("stem.conv2.bias", C);
    token_w_ = this->add_weight("token.weight", {L, C, 1, 1}, rng);
    enc_layer_ = make_layer("enc", rng);
    dec_layer_ = make_layer("dec", rng);
    head_w1_ = this->add_weight("head.conv1.weight", {C, C, 3, 3}, rng);
    head_b1_ = this->add_bias("head.conv1.bias", C);
    head_w2_ = this->add_weight("head.conv2.weight", {4, C, 3, 3}, rng);
    head_b2_ = this->add_bias("head.conv2.bias", 4);
}

template <typename S>
Tensor<S> BitModel<S>::forward(Tape<S>& tape, const Tensor<S>& pre,
                               const Tensor<S>& post) {
    this->check_pair(pre, post);
    const int64_t L = this->config_.bit_token_count;

    auto stem = [&](const Tensor<S>& x) {
        Tensor<S> a = relu(tape, conv2d(tape, x, stem_w1_, stem_b1_));
        return relu(tape, conv2d(tape, a, stem_w2_, stem_b2_));
    };
    Tensor<S> f_pre = stem(pre);
    Tensor<S> f_post = stem(post);

    Tensor<S> t_pre = tokenize(tape, f_pre, token_w_);
    Tensor<S> t_post = tokenize(tape, f_post, token_w_);
    Tensor<S> t_new =
        msa_encode(tape, concat_dim1(tape, {t_pre, t_post}), enc_layer_);

    Tensor<S> r_pre =
        ma_decode(tape, f_pre, slice_dim1(tape, t_new, 0, L), dec_layer_);
    Tensor<S> r_post =
        ma_decode(tape, f_post, slice_dim1(tape, t_new, L, L), dec_layer_);

    Tensor<S> diff = abs_val(tape, sub(tape, r_pre, r_post));
    Tensor<S> h = relu(tape, conv2d(tape, diff, head_w1_, head_b1_));
    return conv2d(tape, h, head_w2_, head_b2_);
}

// ---- factory ------------------------------------------------------------

template <typename S>
std::unique_ptr<Model<S>> make_model(const std::string& kind,
                                     const ModelConfig& config, uint64_t seed) {
    if (kind == "unet") return std::make_unique<UNet<S>>(config, seed);
    if (kind == "spaunet") return std::make_unique<SpaUNet<S>>(config, seed);
    if (kind == "bit") return std::make_unique<BitModel<S>>(config, seed);
    throw ConfigError("unknown model kind '" + kind +
                      "' (expected unet, spaunet, or bit)");
}

#define FB_INSTANTIATE_MODELS(S)                 \
    template class Model<S>;                     \
    template class UNet<S>;                      \
    template class SpaUNet<S>;                   \
    template class BitModel<S>;                  \
    template std::unique_ptr<Model<S>> make_model<S>(const std::string&, \
                                                     const ModelConfig&, uint64_t);

FB_INSTANTIATE_MODELS(float)
FB_INSTANTIATE_MODELS(double)

}  // namespace floodbench
