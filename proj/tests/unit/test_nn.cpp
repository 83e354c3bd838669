#include <doctest.h>

#include <cmath>
#include <random>

#include "odor/core/grad_check.hpp"
#include "odor/core/seed.hpp"
#include "odor/nn/layers.hpp"
#include "unit/layer_suite.hpp"
#include "unit/test_support.hpp"

using namespace odor;
using namespace odor::nn;
using odor::test::kink_free_tensor;
using odor::test::projection_loss;
using odor::test::random_tensor;
using odor::test::tie_free_tensor;

namespace {

ForwardContext eval_ctx() {
    return {Mode::eval, nullptr};
}

ForwardContext train_ctx(std::mt19937_64* rng = nullptr) {
    return {Mode::train, rng};
}

}  // namespace

TEST_CASE("conv1d layer") {
    // output-length oracle: floor((L + 2p - K) / s) + 1
    CHECK((129 + 2 * 3 - 7) / 2 + 1 == 65);
    Conv1d<double> conv(32, 64, 7, 2, 3);
    std::mt19937_64 rng(1);
    auto ctx = eval_ctx();
    CHECK(conv.forward(random_tensor<double>({2, 32, 129}, rng), ctx).shape() == Shape{2, 64, 65});
    CHECK_THROWS_AS(conv.forward(random_tensor<double>({2, 31, 129}, rng), ctx), ShapeError);

    Conv1d<double> identity(1, 1, 1);
    identity.weight.value.mutable_data()[0] = 1.0;
    const auto x = random_tensor<double>({3, 1, 10}, rng);
    const auto y = identity.forward(x, ctx);
    CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));

    CHECK_THROWS_AS(Conv1d<double>(1, 1, 3, 0), InvalidArgument);
    CHECK(Conv1d<double>(2, 3, 5, 1, 2, false).spec().describe() == "conv1d(2->3,k5,s1,p2,nobias)");
}

TEST_CASE("batchnorm1d") {
    std::mt19937_64 rng(2);
    SUBCASE("zero-variance channel maps to zero") {
        BatchNorm1d<double> bn(2);
        auto x = Tensor<double>::full({4, 2, 5}, 3.0);
        auto ctx = train_ctx();
        const auto y = bn.forward(x, ctx);
        for (double v : y.data()) CHECK(v == 0.0);
    }
    SUBCASE("training output is standardized per channel") {
        BatchNorm1d<double> bn(3);
        const auto x = random_tensor<double>({8, 3, 20}, rng, -5.0, 9.0);
        auto ctx = train_ctx();
        const auto y = bn.forward(x, ctx);
        for (std::size_t c = 0; c < 3; ++c) {
            double m = 0, v = 0;
            for (std::size_t n = 0; n < 8; ++n)
                for (std::size_t l = 0; l < 20; ++l) m += y.data()[(n * 3 + c) * 20 + l];
            m /= 160.0;
            for (std::size_t n = 0; n < 8; ++n)
                for (std::size_t l = 0; l < 20; ++l) v += std::pow(y.data()[(n * 3 + c) * 20 + l] - m, 2);
            v /= 160.0;
            CHECK(std::abs(m) <= 1e-4);
            CHECK(std::abs(v - 1.0) <= 1e-4);
        }
    }
    SUBCASE("running statistics follow momentum 0.1 with unbiased variance") {
        BatchNorm1d<double> bn(1);
        const auto x = Tensor<double>::from({1, 1, 4}, {1.0, 2.0, 3.0, 6.0});
        auto ctx = train_ctx();
        bn.forward(x, ctx);
        // mean 3, unbiased variance 14/3
        CHECK(bn.running_mean.data()[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(bn.running_var.data()[0] == doctest::Approx(0.9 + 0.1 * 14.0 / 3.0).epsilon(1e-12));
        CHECK_THROWS_AS(bn.forward(Tensor<double>::from({1, 1, 1}, {1.0}), ctx), InvalidArgument);
    }
    SUBCASE("eval before any update uses mean 0, variance 1") {
        BatchNorm1d<double> bn(2);
        const auto x = random_tensor<double>({2, 2, 3}, rng);
        auto ctx = eval_ctx();
        const auto y = bn.forward(x, ctx);
        for (std::size_t i = 0; i < x.numel(); ++i)
            CHECK(y.data()[i] == doctest::Approx(x.data()[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
        CHECK(bn.running_mean.data()[0] == 0.0);
    }
}

TEST_CASE("pooling, linear and dropout") {
    auto ctx = eval_ctx();
    MaxPool1d<double> pool(2);
    const auto y = pool.forward(Tensor<double>::from({1, 1, 4}, {1, 3, 2, 5}), ctx);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{3, 5});
    CHECK_THROWS_AS(MaxPool1d<double>(4).forward(Tensor<double>::zeros({1, 1, 3}), ctx), ShapeError);

    GlobalAvgPool<double> gap;
    const auto g = gap.forward(Tensor<double>::full({2, 3, 7}, 2.5), ctx);
    CHECK(g.shape() == Shape{2, 3});
    for (double v : g.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));

    Linear<double> lin(3, 2);
    auto w = lin.weight.value.mutable_data();
    for (std::size_t i = 0; i < 6; ++i) w[i] = static_cast<double>(i);  // [[0,1],[2,3],[4,5]]
    lin.bias.value.mutable_data()[1] = 10.0;
    const auto o = lin.forward(Tensor<double>::from({1, 3}, {1, 1, 1}), ctx);
    CHECK(o.data()[0] == 6.0);
    CHECK(o.data()[1] == 19.0);

    std::mt19937_64 rng(5);
    const auto x = random_tensor<double>({4, 8}, rng);
    for (double rate : {0.0, 0.3, 0.9}) {
        Dropout<double> d(rate);
        auto e = eval_ctx();
        CHECK(d.forward(x, e).node() == x.node());
    }
    Dropout<double> d0(0.0);
    auto t = train_ctx(&rng);
    CHECK(d0.forward(x, t).node() == x.node());
    CHECK_THROWS_AS(Dropout<double>(1.0), InvalidArgument);
    CHECK_THROWS_AS(Dropout<double>(-0.1), InvalidArgument);
}

TEST_CASE("inverted dropout statistics") {
    std::mt19937_64 rng(77);
    Dropout<double> d(0.5);
    auto ctx = train_ctx(&rng);
    const auto ones = Tensor<double>::full({100000}, 1.0);
    const auto y = d.forward(ones, ctx);
    std::size_t survivors = 0;
    double total = 0;
    for (double v : y.data()) {
        if (v != 0.0) {
            ++survivors;
            CHECK(v == 2.0);
        }
        total += v;
    }
    CHECK(std::abs(static_cast<double>(survivors) / 1e5 - 0.5) <= 0.01);
    CHECK(std::abs(total / 1e5 - 1.0) <= 0.02);

    std::mt19937_64 a(9), b(9);
    auto ca = train_ctx(&a), cb = train_ctx(&b);
    const auto ya = d.forward(ones, ca), yb = d.forward(ones, cb);
    CHECK(std::equal(ya.data().begin(), ya.data().end(), yb.data().begin()));
}

TEST_CASE("attention modules with zero weights halve the input") {
    std::mt19937_64 rng(6);
    const auto x = random_tensor<double>({2, 16, 9}, rng);
    auto ctx = eval_ctx();
    SEAttention<double> se(16, 8);
    CHECK(se.hidden() == 2);
    const auto s = se.forward(x, ctx);
    CHECK(s.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(s.data()[i] == 0.5 * x.data()[i]);
    CHECK(SEAttention<double>(4, 8).hidden() == 1);

    SpatialAttention<double> sa(7);
    const auto a = sa.forward(x, ctx);
    CHECK(a.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(a.data()[i] == 0.5 * x.data()[i]);
    // same padding keeps short sequences valid
    CHECK(sa.forward(random_tensor<double>({1, 3, 4}, rng), ctx).shape() == Shape{1, 3, 4});
    CHECK_THROWS_AS(SpatialAttention<double>(6), InvalidArgument);
}

TEST_CASE("residual block with zero convs is relu of the input") {
    std::mt19937_64 rng(7);
    ResidualBlock<double> block(4);
    const auto x = random_tensor<double>({2, 4, 6}, rng);
    auto ctx = eval_ctx();
    const auto y = block.forward(x, ctx);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == std::max(0.0, x.data()[i]));
    CHECK_THROWS_AS(block.forward(random_tensor<double>({2, 3, 6}, rng), ctx), ShapeError);
}

TEST_CASE("every layer passes grad_check on 100 seeded instances") {
    for (const auto& layer : odor::test::layer_suite()) {
        const double worst = layer.run(100);
        CHECK_MESSAGE(worst <= 1e-4, layer.name << ": worst relative error " << worst);
    }
}

TEST_CASE("initialization is seeded by parameter path") {
    auto build = [](std::uint64_t seed) {
        Sequential<float> s;
        s.emplace<Conv1d<float>>(3, 4, 3);
        s.emplace<BatchNorm1d<float>>(4);
        s.emplace<Linear<float>>(4, 2);
        initialize<float>(s, "net", seed);
        return s;
    };
    auto a = build(1), b = build(1), c = build(2);
    StateList<float> sa, sb, sc;
    a.collect("net", sa);
    b.collect("net", sb);
    c.collect("net", sc);
    REQUIRE(sa.parameters.size() == 6);
    CHECK(sa.parameters[0].first == "net.0.weight");
    for (std::size_t i = 0; i < sa.parameters.size(); ++i) {
        const auto pa = sa.parameters[i].second->value.data(), pb = sb.parameters[i].second->value.data();
        CHECK(std::equal(pa.begin(), pa.end(), pb.begin()));
    }
    const auto w1 = sa.parameters[0].second->value.data(), w2 = sc.parameters[0].second->value.data();
    CHECK(!std::equal(w1.begin(), w1.end(), w2.begin()));
    // BN affine starts at gamma 1, beta 0
    for (float g : sa.parameters[2].second->value.data()) CHECK(g == 1.0f);
    for (float v : sa.parameters[3].second->value.data()) CHECK(v == 0.0f);

    // Kaiming spread: std close to sqrt(2 / fan_in) over many draws
    Conv1d<double> big(64, 64, 7);
    initialize<double>(big, "big", 3);
    double ss = 0;
    for (double v : big.weight.value.data()) ss += v * v;
    CHECK(std::sqrt(ss / static_cast<double>(big.weight.value.numel())) ==
          doctest::Approx(std::sqrt(2.0 / (64.0 * 7.0))).epsilon(0.02));
}

TEST_CASE("eval-mode forward is deterministic and leaves state untouched") {
    std::mt19937_64 rng(12);
    ResidualBlock<double> block(4);
    initialize<double>(block, "", 5);
    auto train = train_ctx();
    block.forward(random_tensor<double>({3, 4, 6}, rng), train);
    const std::vector<double> before(block.bn1.running_mean.data().begin(), block.bn1.running_mean.data().end());
    const auto x = random_tensor<double>({2, 4, 6}, rng);
    auto ctx = eval_ctx();
    const auto a = block.forward(x, ctx), b = block.forward(x, ctx);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    CHECK(std::equal(before.begin(), before.end(), block.bn1.running_mean.data().begin()));
}
