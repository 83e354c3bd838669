#pragma once

#include <array>
#include <span>
#include <vector>

#include "odor/data/records.hpp"
#include "odor/nn/models.hpp"

namespace odor::nn {

/// Stacks the selected spectra into an (N, channels, bins) tensor.
template <typename T>
Tensor<T> make_batch(std::span<const SpectralFeatures> set, std::span<const std::size_t> indices);

/// Class labels of the selected spectra as cross-entropy targets.
std::vector<int> batch_labels(std::span<const SpectralFeatures> set, std::span<const std::size_t> indices);

struct Predictions {
    std::vector<std::array<double, 2>> probs;  // softmax rows
    std::vector<double> features;              // N x feature_dim, row-major
    std::size_t feature_dim = 0;
    double mean_loss = 0.0;                    // cross-entropy against the stored labels
    double accuracy = 0.0;
};

/// Eval-mode pass without recording, in chunks of batch_size.
template <typename T>
Predictions predict(Model<T>& model, std::span<const SpectralFeatures> set, std::size_t batch_size = 64);

}  // namespace odor::nn
