#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"

#include "floodbench/common.hpp"
#include "floodbench/data.hpp"
#include "floodbench/models.hpp"
#include "floodbench/ssl.hpp"

using namespace floodbench;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.encoder_channels = {4, 8, 16, 32, 64};
    c.bit_feature_dim = 8;
    c.bit_token_count = 2;
    c.bit_head_count = 2;
    c.bit_head_dim = 4;
    return c;
}

// Eight 32x32 tiles out of two tiny synthetic scenes.
std::vector<Tile> tiny_tiles(uint64_t seed) {
    SynthConfig sc;
    sc.scene_count = 2;
    sc.extent = 64;
    std::vector<Tile> tiles;
    for (const ScenePair& s : generate_synthetic(sc, seed)) {
        auto t = tile_scene(s, 32, 32);
        tiles.insert(tiles.end(), t.begin(), t.end());
    }
    return tiles;
}

TrainConfig tiny_train(int epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 4;
    tc.lr = 1e-3;
    tc.seed = 9;
    return tc;
}

}  // namespace

TEST_CASE("class distribution is the normalized label histogram") {
    const std::vector<uint8_t> labels{0, 0, 0, 1, 1, 2, 3, 3, 3, 3};
    const ClassDistribution d = class_distribution(labels);
    CHECK(d.p[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(d.p[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(d.p[2] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.p[3] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK_NOTHROW(d.validate());
    CHECK_THROWS_AS(class_distribution({}), ContractError);
}

TEST_CASE("reference buffer evicts oldest entries and averages the rest") {
    ReferenceBuffer buf(3);
    CHECK_THROWS_AS(buf.reference(), ContractError);

    auto point = [](int cls) {
        ClassDistribution d;
        d.p = {0.0, 0.0, 0.0, 0.0};
        d.p[static_cast<size_t>(cls)] = 1.0;
        return d;
    };
    buf.push(point(0));
    CHECK(buf.size() == 1);
    CHECK(buf.reference().p[0] == doctest::Approx(1.0));

    buf.push(point(1));  // partial warm-up mean over two entries
    CHECK(buf.reference().p[0] == doctest::Approx(0.5));
    CHECK(buf.reference().p[1] == doctest::Approx(0.5));

    buf.push(point(2));
    buf.push(point(3));  // evicts the class-0 sentinel
    CHECK(buf.size() == 3);
    CHECK(buf.reference().p[0] == doctest::Approx(0.0));
    CHECK(buf.reference().p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(buf.reference().p[3] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(ReferenceBuffer(0), ContractError);
}

TEST_CASE("strategy codes round-trip and reject out-of-range values") {
    CHECK(strategy_from_int(0) == Strategy::None);
    CHECK(strategy_from_int(1) == Strategy::PseudoUnlabeled);
    CHECK(strategy_from_int(4) == Strategy::Combined);
    CHECK_THROWS_AS(strategy_from_int(5), ConfigError);
    CHECK_THROWS_AS(strategy_from_int(-1), ConfigError);
    CHECK(strategy_name(Strategy::GroundTruth) == "ground-truth");
}

TEST_CASE("channel argmax resolves exact ties to the lowest class") {
    // Shape [1,4,1,2]: pixel 0 has classes 1 and 2 tied; pixel 1 favors 3.
    const std::vector<float> v{0.1f, 0.0f, 0.4f, 0.1f, 0.4f, 0.2f, 0.1f, 0.7f};
    const std::vector<uint8_t> got = argmax_channels(v, {1, 4, 1, 2});
    REQUIRE(got.size() == 2);
    CHECK(got[0] == 1);
    CHECK(got[1] == 3);
}

TEST_CASE("prediction maps equal softmax argmax of the forward pass") {
    const std::vector<Tile> tiles = tiny_tiles(51);
    std::vector<size_t> order{0, 1, 2};
    Tensor<float> pre, post;
    std::vector<uint8_t> labels;
    make_batch(tiles, order, 0, 3, pre, post, labels);
    auto model = make_model<float>("spaunet", tiny_config(), 3);

    const std::vector<uint8_t> got = predict_labels(*model, pre, post);
    Tape<float> tape;
    tape.set_recording(false);
    Tensor<float> probs = softmax_channels(tape, model->forward(tape, pre, post));
    const std::vector<uint8_t> want = argmax_channels(probs.value(), probs.shape());
    CHECK(got == want);
}

TEST_CASE("supervised training is deterministic and reduces the loss") {
    const std::vector<Tile> tiles = tiny_tiles(52);
    TrainConfig tc = tiny_train(6);
    tc.weights = inverse_frequency_weights(label_histogram(tiles));

    auto a = make_model<float>("unet", tiny_config(), 15);
    auto b = make_model<float>("unet", tiny_config(), 15);
    const TrainHistory ha = pretrain(*a, tiles, tc);
    const TrainHistory hb = pretrain(*b, tiles, tc);

    CHECK(ha.csv() == hb.csv());
    for (size_t i = 0; i < a->parameters().size(); ++i)
        CHECK(a->parameters()[i].second.value() == b->parameters()[i].second.value());

    REQUIRE(ha.epochs.size() == 6);
    CHECK(ha.epochs.back().l_s < ha.epochs.front().l_s);
    CHECK(ha.epochs.front().lr == doctest::Approx(1e-3));
}

TEST_CASE("zero auxiliary weights reduce ssl to plain supervised training") {
    const std::vector<Tile> labeled = tiny_tiles(53);
    const std::vector<Tile> unlabeled = tiny_tiles(54);

    TrainConfig tc = tiny_train(3);
    tc.alpha = 0.0;
    tc.betas = {0.0, 0.0, 0.0};
    tc.weights = inverse_frequency_weights(label_histogram(labeled));

    auto plain = make_model<float>("spaunet", tiny_config(), 23);
    auto semi = make_model<float>("spaunet", tiny_config(), 23);
    const TrainHistory hp = pretrain(*plain, labeled, tc);
    const TrainHistory hs =
        ssl_train(*semi, labeled, unlabeled, Strategy::PseudoUnlabeled, tc);

    REQUIRE(hp.epochs.size() == hs.epochs.size());
    for (size_t e = 0; e < hp.epochs.size(); ++e) {
        CHECK(hp.epochs[e].l_s == hs.epochs[e].l_s);
        CHECK(hs.epochs[e].l_kl == 0.0);
    }
    for (size_t i = 0; i < plain->parameters().size(); ++i)
        CHECK(plain->parameters()[i].second.value() ==
              semi->parameters()[i].second.value());
}

TEST_CASE("combined strategy logs raw per-stream KL terms") {
    const std::vector<Tile> labeled = tiny_tiles(55);
    const std::vector<Tile> unlabeled = tiny_tiles(56);
    TrainConfig tc = tiny_train(2);
    tc.betas = {0.5, 0.25, 0.125};
    tc.weights = inverse_frequency_weights(label_histogram(labeled));

    auto model = make_model<float>("unet", tiny_config(), 33);
    pretrain(*model, labeled, tc);
    const TrainHistory h = ssl_train(*model, labeled, unlabeled,
                                     Strategy::Combined, tc);
    REQUIRE(h.epochs.size() == 2);
    for (const EpochStats& e : h.epochs) {
        // Raw streams are positive and recombine into the weighted term
        // within float forward precision.
        double weighted = 0.0;
        for (size_t k = 0; k < 3; ++k) {
            CHECK(e.kl_terms[k] > 0.0);
            weighted += tc.betas[k] * e.kl_terms[k];
        }
        CHECK(std::fabs(e.l_kl - weighted) < 1e-5);
    }

    // Single-reference strategies leave the raw stream columns at zero.
    auto single = make_model<float>("unet", tiny_config(), 33);
    pretrain(*single, labeled, tc);
    const TrainHistory hs = ssl_train(*single, labeled, unlabeled,
                                      Strategy::GroundTruth, tc);
    for (const EpochStats& e : hs.epochs)
        for (double v : e.kl_terms) CHECK(v == 0.0);
}

TEST_CASE("history csv layouts match their documented columns") {
    TrainHistory h;
    h.strategy = Strategy::PseudoUnlabeled;
    h.label_ratio = 0.1;
    h.seed = 7;
    EpochStats e;
    e.epoch = 0;
    e.l_s = 0.5;
    e.l_entropy = 0.25;
    e.l_kl = 0.125;
    e.total = 0.675;
    e.lr = 0.0003;
    h.epochs.push_back(e);
    CHECK(h.csv() ==
          "epoch,L_s,L_entropy,L_kl,total,lr,strategy,label_ratio,seed\n"
          "0,0.5,0.25,0.125,0.675,0.0003,1,0.1,7\n");

    h.strategy = Strategy::Combined;
    h.epochs[0].kl_terms = {0.5, 0.25, 0.125};
    CHECK(h.csv() ==
          "epoch,L_s,L_entropy,L_kl,L_kl1,L_kl2,L_kl3,total,lr,strategy,"
          "label_ratio,seed\n"
          "0,0.5,0.25,0.125,0.5,0.25,0.125,0.675,0.0003,4,0.1,7\n");
}

TEST_CASE("ssl rejects degenerate setups") {
    const std::vector<Tile> tiles = tiny_tiles(57);
    TrainConfig tc = tiny_train(1);
    auto model = make_model<float>("unet", tiny_config(), 1);
    CHECK_THROWS_AS(ssl_train(*model, tiles, tiles, Strategy::None, tc), ConfigError);
    CHECK_THROWS_AS(ssl_train(*model, {}, tiles, Strategy::GroundTruth, tc),
                    ConfigError);
    CHECK_THROWS_AS(ssl_train(*model, tiles, {}, Strategy::GroundTruth, tc),
                    ConfigError);

    TrainConfig bad = tiny_train(1);
    bad.lr = 0.0;
    CHECK_THROWS_AS(pretrain(*model, tiles, bad), ConfigError);
    bad = tiny_train(0);
    CHECK_THROWS_AS(pretrain(*model, tiles, bad), ConfigError);
}

TEST_CASE("learning rate steps down by fifths every sixty epochs") {
    CHECK(lr_schedule(1e-3, 0) == doctest::Approx(1e-3));
    CHECK(lr_schedule(1e-3, 59) == doctest::Approx(1e-3));
    CHECK(lr_schedule(1e-3, 60) == doctest::Approx(2e-4));
    CHECK(lr_schedule(1e-3, 120) == doctest::Approx(4e-5));
}
