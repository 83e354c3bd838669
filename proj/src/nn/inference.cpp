#include "odor/nn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace odor::nn {

template <typename T>
Tensor<T> make_batch(std::span<const SpectralFeatures> set, std::span<const std::size_t> indices) {
    if (indices.empty()) throw InvalidArgument("make_batch: empty selection");
    const std::size_t channels = set[indices[0]].channels;
    const std::size_t bins = set[indices[0]].bins;
    const std::size_t stride = channels * bins;
    std::vector<T> values(indices.size() * stride);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& s = set[indices[r]];
        if (s.channels != channels || s.bins != bins || s.values.size() != stride)
            throw ShapeError("make_batch: trial " + s.trial_id + " has a different shape");
        std::transform(s.values.begin(), s.values.end(), values.begin() + r * stride,
                       [](double v) { return static_cast<T>(v); });
    }
    return Tensor<T>::from({indices.size(), channels, bins}, std::move(values));
}

std::vector<int> batch_labels(std::span<const SpectralFeatures> set, std::span<const std::size_t> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(static_cast<int>(set[i].label));
    return out;
}

template <typename T>
Predictions predict(Model<T>& model, std::span<const SpectralFeatures> set, std::size_t batch_size) {
    if (batch_size == 0) throw InvalidArgument("predict: batch_size must be positive");
    NoGradGuard<T> no_grad;
    ForwardContext ctx{Mode::eval, nullptr};
    Predictions out;
    out.feature_dim = model.feature_dim();
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < set.size(); begin += batch_size) {
        std::vector<std::size_t> idx(std::min(batch_size, set.size() - begin));
        std::iota(idx.begin(), idx.end(), begin);
        const auto result = model.forward(make_batch<T>(set, idx), ctx);
        const auto logits = result.logits.data();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            // Two-class softmax in double from the logit difference.
            const double d = static_cast<double>(logits[2 * r + 1]) - static_cast<double>(logits[2 * r]);
            const double p_odor = 1.0 / (1.0 + std::exp(-d));
            out.probs.push_back({1.0 - p_odor, p_odor});
            const bool odor = set[idx[r]].label == Label::odor;
            // -log softmax of the true class, stable for large |d|.
            const double margin = odor ? d : -d;
            out.mean_loss += margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
            correct += (p_odor > 0.5) == odor ? 1 : 0;
        }
        const auto f = result.features.data();
        out.features.insert(out.features.end(), f.begin(), f.end());
    }
    if (!set.empty()) {
        out.mean_loss /= static_cast<double>(set.size());
        out.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
    }
    return out;
}

template Tensor<float> make_batch<float>(std::span<const SpectralFeatures>, std::span<const std::size_t>);
template Tensor<double> make_batch<double>(std::span<const SpectralFeatures>, std::span<const std::size_t>);
template Predictions predict<float>(Model<float>&, std::span<const SpectralFeatures>, std::size_t);
template Predictions predict<double>(Model<double>&, std::span<const SpectralFeatures>, std::size_t);

}  // namespace odor::nn
