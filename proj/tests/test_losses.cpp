#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"

#include "floodbench/common.hpp"
#include "floodbench/losses.hpp"

using namespace floodbench;

namespace {

// Random softmax-normalized [B,4,H,W] probability map.
Tensor<double> rand_probs(int64_t b, int64_t h, int64_t w, Rng& rng) {
    const int64_t n = h * w;
    std::vector<double> v(static_cast<size_t>(b * 4 * n));
    for (int64_t i = 0; i < b * n; ++i) {
        std::array<double, 4> raw{};
        double z = 0.0;
        for (auto& x : raw) {
            x = std::exp(rng.uniform(-2.0, 2.0));
            z += x;
        }
        const int64_t row = i / n, col = i % n;
        for (int64_t c = 0; c < 4; ++c)
            v[static_cast<size_t>((row * 4 + c) * n + col)] = raw[static_cast<size_t>(c)] / z;
    }
    return Tensor<double>::from({b, 4, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("uniform predictions score ln 4 in both cross entropy and entropy") {
    const int64_t B = 2, H = 3, W = 3;
    Tensor<double> probs =
        Tensor<double>::from({B, 4, H, W}, std::vector<double>(static_cast<size_t>(B * 4 * H * W), 0.25));
    std::vector<uint8_t> labels(static_cast<size_t>(B * H * W));
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<uint8_t>(i % 4);
    Tape<double> tape;
    Tensor<double> ce = weighted_cross_entropy(tape, probs, labels, ClassWeights{});
    Tensor<double> ent = entropy_loss(tape, probs);
    CHECK(std::fabs(ce.item() - std::log(4.0)) < 1e-9);
    CHECK(std::fabs(ent.item() - std::log(4.0)) < 1e-9);
}

TEST_CASE("KL of a distribution against itself vanishes") {
    Rng rng(401);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 4> p{};
        double z = 0.0;
        for (auto& x : p) {
            x = rng.uniform(0.01, 1.0);
            z += x;
        }
        for (auto& x : p) x /= z;
        CHECK(std::fabs(kl_divergence(p, p)) < 1e-9);
    }
}

TEST_CASE("disjoint-support hand case equals ln 2") {
    const std::array<double, 4> p{1.0, 0.0, 0.0, 0.0};
    const std::array<double, 4> q{0.5, 0.5, 0.0, 0.0};
    CHECK(std::fabs(kl_divergence(p, q) - std::log(2.0)) < 1e-6);
    // The reverse direction differs: KL is not symmetric.
    CHECK(std::fabs(kl_divergence(q, p) - kl_divergence(p, q)) > 1e-3);
}

TEST_CASE("KL matches the smoothing oracle on random pairs") {
    Rng rng(402);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 4> p{}, q{};
        double zp = 0.0, zq = 0.0;
        for (int c = 0; c < 4; ++c) {
            p[static_cast<size_t>(c)] = rng.uniform(0.0, 1.0);
            q[static_cast<size_t>(c)] = rng.uniform(0.0, 1.0);
            zp += p[static_cast<size_t>(c)];
            zq += q[static_cast<size_t>(c)];
        }
        for (int c = 0; c < 4; ++c) {
            p[static_cast<size_t>(c)] /= zp;
            q[static_cast<size_t>(c)] /= zq;
        }
        CHECK(std::fabs(kl_divergence(p, q) - oracles::smoothed_kl(p, q)) < 1e-12);
        CHECK(kl_divergence(p, q) >= -1e-12);
    }
}

TEST_CASE("KL validates that inputs are distributions") {
    const std::array<double, 4> p{0.7, 0.2, 0.2, 0.2};  // sums to 1.3
    const std::array<double, 4> q{0.25, 0.25, 0.25, 0.25};
    CHECK_THROWS_AS(kl_divergence(p, q), ContractError);
    CHECK_THROWS_AS(kl_divergence(q, p), ContractError);
}

TEST_CASE("weighted cross entropy matches the counting oracle") {
    Rng rng(403);
    const int64_t B = 2, H = 4, W = 4;
    Tensor<double> probs = rand_probs(B, H, W, rng);
    std::vector<uint8_t> labels(static_cast<size_t>(B * H * W));
    for (auto& l : labels) l = static_cast<uint8_t>(rng.index(4));
    ClassWeights w;
    w.w = {0.5, 2.0, 1.5, 4.0};
    Tape<double> tape;
    Tensor<double> loss = weighted_cross_entropy(tape, probs, labels, w);
    const double want = oracles::weighted_ce(probs.value(), B, H, W, labels, w.w);
    CHECK(loss.item() == doctest::Approx(want).epsilon(1e-12));

    // Unit weights reduce to the plain cross entropy.
    Tensor<double> plain = weighted_cross_entropy(tape, probs, labels, ClassWeights{});
    const double plain_want =
        oracles::weighted_ce(probs.value(), B, H, W, labels, {1.0, 1.0, 1.0, 1.0});
    CHECK(std::fabs(plain.item() - plain_want) < 1e-9);
}

TEST_CASE("cross entropy survives exact zero probabilities via the clamp") {
    const int64_t B = 1, H = 1, W = 2;
    // Pixel 0 assigns zero mass to its label; the clamp caps the penalty.
    Tensor<double> probs = Tensor<double>::from(
        {B, 4, H, W}, {0.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0});
    std::vector<uint8_t> labels{0, 0};
    Tape<double> tape;
    Tensor<double> loss = weighted_cross_entropy(tape, probs, labels, ClassWeights{});
    const double want = (-std::log(1e-12) - std::log(1.0)) / 2.0;
    CHECK(std::isfinite(loss.item()));
    CHECK(loss.item() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("entropy of random maps stays within its analytic range") {
    Rng rng(404);
    Tape<double> tape;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor<double> probs = rand_probs(1, 3, 5, rng);
        Tensor<double> ent = entropy_loss(tape, probs);
        CHECK(ent.item() >= -1e-12);
        CHECK(ent.item() <= std::log(4.0) + 1e-12);
        CHECK(ent.item() == doctest::Approx(oracles::mean_entropy(probs.value(), 1, 3, 5))
                                .epsilon(1e-12));
    }
}

TEST_CASE("inverse frequency weights normalize to mean one") {
    const ClassWeights w = inverse_frequency_weights({900, 50, 40, 10});
    double mean = 0.0;
    for (double x : w.w) mean += x / 4.0;
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.w[3] > w.w[2]);
    CHECK(w.w[2] > w.w[1]);
    CHECK(w.w[1] > w.w[0]);

    // A zero count is lifted to one pixel rather than dividing by zero.
    const ClassWeights z = inverse_frequency_weights({10, 0, 5, 5});
    for (double x : z.w) CHECK(std::isfinite(x));
    CHECK(z.w[1] > z.w[2]);
}

TEST_CASE("mean KL over rows equals the scalar KL averaged by hand") {
    Rng rng(405);
    const int64_t N = 6;
    std::vector<double> rows(static_cast<size_t>(N * 4));
    std::vector<std::array<double, 4>> as_arrays(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) {
        std::array<double, 4> p{};
        double z = 0.0;
        for (auto& x : p) {
            x = rng.uniform(0.05, 1.0);
            z += x;
        }
        for (int c = 0; c < 4; ++c) {
            p[static_cast<size_t>(c)] /= z;
            rows[static_cast<size_t>(i * 4 + c)] = p[static_cast<size_t>(c)];
        }
        as_arrays[static_cast<size_t>(i)] = p;
    }
    const std::array<double, 4> q{0.7, 0.1, 0.15, 0.05};
    Tensor<double> dists = Tensor<double>::from({N, 4}, rows);
    Tape<double> tape;
    Tensor<double> got = mean_kl(tape, dists, q);
    double want = 0.0;
    for (const auto& p : as_arrays) want += kl_divergence(p, q) / static_cast<double>(N);
    CHECK(std::fabs(got.item() - want) < 1e-12);
}

TEST_CASE("consistency loss is the beta-weighted sum of stream KLs") {
    Rng rng(406);
    const int64_t N = 4;
    std::vector<double> rows(static_cast<size_t>(N * 4));
    for (int64_t i = 0; i < N; ++i) {
        double z = 0.0;
        for (int c = 0; c < 4; ++c) {
            rows[static_cast<size_t>(i * 4 + c)] = rng.uniform(0.05, 1.0);
            z += rows[static_cast<size_t>(i * 4 + c)];
        }
        for (int c = 0; c < 4; ++c) rows[static_cast<size_t>(i * 4 + c)] /= z;
    }
    Tensor<double> dists = Tensor<double>::from({N, 4}, rows);
    const std::vector<std::array<double, 4>> refs{
        {0.9, 0.05, 0.03, 0.02}, {0.25, 0.25, 0.25, 0.25}, {0.1, 0.6, 0.2, 0.1}};
    const std::vector<double> betas{0.5, 0.25, 2.0};
    Tape<double> tape;
    Tensor<double> got = consistency_loss(tape, dists, refs, betas);
    double want = 0.0;
    for (size_t k = 0; k < refs.size(); ++k) {
        Tensor<double> term = mean_kl(tape, dists, refs[k]);
        want += betas[k] * term.item();
    }
    CHECK(std::fabs(got.item() - want) < 1e-12);

    CHECK_THROWS_AS(consistency_loss(tape, dists, {}, {}), ContractError);
    CHECK_THROWS_AS(consistency_loss(tape, dists, refs, {0.5}), ContractError);
}

TEST_CASE("total loss composes the three terms linearly") {
    Tape<double> tape;
    Tensor<double> l_s = Tensor<double>::scalar(1.25);
    Tensor<double> l_ent = Tensor<double>::scalar(0.5);
    Tensor<double> l_kl = Tensor<double>::scalar(0.125);
    Tensor<double> total = total_ssl_loss(tape, l_s, l_ent, l_kl, 0.001);
    CHECK(total.item() == doctest::Approx(1.25 + 0.001 * 0.5 + 0.125).epsilon(1e-15));
}
