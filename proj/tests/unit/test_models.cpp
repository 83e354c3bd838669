#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "odor/core/grad_check.hpp"
#include "odor/core/seed.hpp"
#include "odor/nn/models.hpp"
#include "unit/test_support.hpp"

using namespace odor;
using namespace odor::nn;
using odor::test::projection_loss;
using odor::test::random_tensor;

namespace {

// Shape-propagation oracle.
std::size_t conv_len(std::size_t l, std::size_t k, std::size_t s, std::size_t p) {
    return (l + 2 * p - k) / s + 1;
}
std::size_t pool_len(std::size_t l, std::size_t k) {
    return (l - k) / k + 1;
}

// Lengths after every trunk layer that changes or keeps the temporal axis.
std::vector<std::size_t> trunk_lengths(Model<double>& model, std::size_t batch) {
    std::mt19937_64 rng(0);
    auto h = random_tensor<double>({batch, 32, 129}, rng);
    ForwardContext ctx;
    std::vector<std::size_t> lengths;
    auto& trunk = model.trunk();
    for (std::size_t i = 0; i + 1 < trunk.size(); ++i) {
        h = trunk[i].forward(h, ctx);
        const auto kind = trunk[i].spec().kind;
        if (kind == LayerKind::maxpool1d || kind == LayerKind::conv1d || kind == LayerKind::residual_block)
            lengths.push_back(h.dim(2));
    }
    return lengths;
}

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k, bool bias) {
    return in * out * k + (bias ? out : 0);
}

}  // namespace

TEST_CASE("attention CNN shapes and parameter count") {
    auto model = build_attention_cnn<double>(1);
    const std::size_t l1 = pool_len(129, 2), l2 = pool_len(conv_len(l1, 3, 1, 1), 4),
                      l3 = pool_len(conv_len(l2, 3, 1, 1), 4);
    CHECK(std::vector<std::size_t>{l1, l2, l3} == std::vector<std::size_t>{64, 16, 4});
    CHECK(trunk_lengths(model, 2) == std::vector<std::size_t>{l1, l1, l2, l2, l3});

    std::mt19937_64 rng(2);
    ForwardContext ctx;
    const auto out = model.forward(random_tensor<double>({8, 32, 129}, rng), ctx);
    CHECK(out.logits.shape() == Shape{8, 2});
    CHECK(out.features.shape() == Shape{8, 192});
    CHECK(model.feature_dim() == 192);

    const std::size_t expected = conv_params(32, 64, 3, false) + 2 * 64 + conv_params(64, 128, 3, false) + 2 * 128 +
                                 conv_params(128, 64, 1, true) + conv_params(128, 64, 3, true) +
                                 conv_params(128, 64, 5, true) + 192 * 24 + 24 * 192 + conv_params(2, 1, 7, true) +
                                 (192 * 256 + 256) + (256 * 2 + 2);
    CHECK(model.parameter_count() == expected);
    CHECK(expected == 164177);
    CHECK(build_attention_cnn<double>(99).parameter_count() == expected);
}

TEST_CASE("residual CNN shapes and parameter count") {
    auto model = build_res_cnn<double>(1);
    const std::size_t a = pool_len(129, 2), b = conv_len(a, 7, 2, 3), c = pool_len(b, 4), d = conv_len(c, 3, 1, 1),
                      e = pool_len(d, 2);
    CHECK(std::vector<std::size_t>{a, b, c, c, c, c, d, e, e, e} ==
          std::vector<std::size_t>{64, 32, 8, 8, 8, 8, 8, 4, 4, 4});
    CHECK(trunk_lengths(model, 2) == std::vector<std::size_t>{a, b, c, c, c, c, d, e, e, e});

    std::mt19937_64 rng(3);
    ForwardContext ctx;
    const auto out = model.forward(random_tensor<double>({8, 32, 129}, rng), ctx);
    CHECK(out.logits.shape() == Shape{8, 2});
    CHECK(out.features.shape() == Shape{8, 128});

    auto residual = [](std::size_t ch) { return 2 * conv_params(ch, ch, 3, false) + 2 * 2 * ch; };
    const std::size_t expected = conv_params(32, 64, 7, false) + 2 * 64 + 3 * residual(64) +
                                 conv_params(64, 128, 3, false) + 2 * 128 + 2 * residual(128) + (128 * 2 + 2);
    CHECK(model.parameter_count() == expected);
}

TEST_CASE("zero classifier gives even odds") {
    auto model = build_res_cnn<double>(4);
    auto& linear = dynamic_cast<Linear<double>&>(model.head()[1]);
    for (auto& v : linear.weight.value.mutable_data()) v = 0.0;
    std::mt19937_64 rng(5);
    ForwardContext ctx;
    const auto out = model.forward(random_tensor<double>({3, 32, 129}, rng), ctx);
    for (double v : out.logits.data()) CHECK(v == 0.0);
    const auto probs = softmax_rows(out.logits);
    for (double p : probs.data()) CHECK(p == 0.5);
}

TEST_CASE("forward determinism and input contract") {
    for (auto arch : {Architecture::attention_cnn, Architecture::res_cnn}) {
        auto model = build_model<float>(arch, 11);
        std::mt19937_64 rng(6);
        const auto x = random_tensor<float>({4, 32, 129}, rng, -3.0, 3.0);
        ForwardContext eval;
        const auto a = model.forward(x, eval).logits, b = model.forward(x, eval).logits;
        CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
        for (float v : a.data()) CHECK(std::isfinite(v));

        auto fresh_a = build_model<float>(arch, 11), fresh_b = build_model<float>(arch, 11);
        std::mt19937_64 ra(8), rb(8);
        ForwardContext ta{Mode::train, &ra}, tb{Mode::train, &rb};
        const auto la = fresh_a.forward(x, ta).logits, lb = fresh_b.forward(x, tb).logits;
        CHECK(std::equal(la.data().begin(), la.data().end(), lb.data().begin()));

        CHECK_THROWS_AS(model.forward(random_tensor<float>({4, 31, 129}, rng), eval), ShapeError);
        CHECK_THROWS_AS(model.forward(random_tensor<float>({4, 32, 128}, rng), eval), ShapeError);
    }
}

TEST_CASE("checkpoint round trip and architecture guard") {
    auto res = build_res_cnn<float>(21);
    std::mt19937_64 rng(9);
    const auto x = random_tensor<float>({4, 32, 129}, rng);
    ForwardContext train{Mode::train, &rng};
    res.forward(x, train);  // moves running stats away from their init

    const auto ck = to_checkpoint(res, Precision::f32);
    const auto decoded = decode_checkpoint(encode_checkpoint(ck));
    auto restored = build_res_cnn<float>(22);
    load_state(restored, decoded);
    ForwardContext eval;
    const auto a = res.forward(x, eval).logits, b = restored.forward(x, eval).logits;
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));

    auto wide = build_res_cnn<double>(1);
    load_state(wide, decoded);
    const auto xd = Tensor<double>::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
    const auto c = wide.forward(xd, eval).logits;
    for (std::size_t i = 0; i < c.numel(); ++i) CHECK(c.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-4));

    auto other = build_attention_cnn<float>(1);
    CHECK_THROWS_AS(load_state(other, decoded), InvalidArgument);
    auto narrow = build_res_cnn<float>(1, 16, 129);
    CHECK_THROWS_AS(load_state(narrow, decoded), InvalidArgument);

    auto missing = ck;
    missing.entries.pop_back();
    CHECK_THROWS_AS(load_state(restored, missing), InvalidArgument);
}

// Batch statistics couple every input coordinate to every normalized unit, so
// a few probes per hundred instances straddle a ReLU or pooling branch change;
// the central difference is no oracle there. Those coordinates are skipped and
// counted, and must stay rare.
TEST_CASE("full-model gradient check, batch statistics, dropout off") {
    for (auto arch : {Architecture::attention_cnn, Architecture::res_cnn}) {
        double worst = 0.0;
        std::size_t checked = 0, skipped = 0;
        const auto start = std::chrono::steady_clock::now();
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto model = build_model<double>(arch, derive_seed(seed, "gc-model"));
            std::mt19937_64 rng(derive_seed(seed, "gc-input"));
            const auto x = random_tensor<double>({4, 32, 129}, rng, -2.0, 2.0);
            const std::vector<int> labels{static_cast<int>(rng() % 2), 1, 0, static_cast<int>(rng() % 2)};
            auto fn = [&](const Tensor<double>& batch) {
                ForwardContext ctx{Mode::train, nullptr, false};
                return cross_entropy(model.forward(batch, ctx).logits, std::span<const int>(labels));
            };
            const auto r = grad_check_report(fn, x, {.step = 1e-5, .max_elements = 96, .seed = seed, .skip_nonsmooth = true});
            worst = std::max(worst, r.max_error);
            checked += r.checked;
            skipped += r.skipped;
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        MESSAGE(architecture_name(arch) << ": worst relative error " << worst << ", " << checked << " checked, "
                                        << skipped << " non-smooth skipped, " << seconds << " s");
        CHECK(worst <= 1e-4);
        CHECK(skipped * 20 <= checked);
    }
}
