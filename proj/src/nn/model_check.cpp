#include "odor/nn/model_check.hpp"

#include <algorithm>
#include <random>

#include "odor/core/seed.hpp"

namespace odor::nn {

GradCheckReport model_grad_check(Architecture arch, std::uint64_t seed, std::size_t max_elements) {
    auto model = build_model<double>(arch, derive_seed(seed, "gc-model"));
    std::mt19937_64 rng(derive_seed(seed, "gc-input"));
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> values(4 * 32 * 129);
    for (auto& v : values) v = u(rng);
    const auto x = Tensor<double>::from({4, 32, 129}, std::move(values));
    const std::vector<int> labels{static_cast<int>(rng() % 2), 1, 0, static_cast<int>(rng() % 2)};
    auto fn = [&](const Tensor<double>& batch) {
        ForwardContext ctx{Mode::train, nullptr, false};
        return cross_entropy(model.forward(batch, ctx).logits, std::span<const int>(labels));
    };
    return grad_check_report(fn, x, {.step = 1e-5, .max_elements = max_elements, .seed = seed, .skip_nonsmooth = true});
}

double GradSuiteResult::skipped_fraction() const {
    const std::size_t probed = checked + skipped;
    return probed == 0 ? 0.0 : static_cast<double>(skipped) / static_cast<double>(probed);
}

bool GradSuiteResult::passed() const {
    return checked > 0 && worst <= kGradTolerance && skipped_fraction() <= kMaxSkippedFraction;
}

GradSuiteResult model_grad_suite(Architecture arch, std::size_t instances, std::uint64_t first_seed,
                                 std::size_t max_elements) {
    GradSuiteResult r;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto one = model_grad_check(arch, first_seed + i, max_elements);
        r.worst = std::max(r.worst, one.max_error);
        r.checked += one.checked;
        r.skipped += one.skipped;
    }
    return r;
}

}  // namespace odor::nn
