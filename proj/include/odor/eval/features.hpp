#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "odor/nn/inference.hpp"

namespace odor::eval {

/// Writes trial_id,label,f0..f{D-1} with the eval-mode penultimate features
/// (the pooled trunk output). Returns the feature matrix that was written.
template <typename T>
nn::Predictions export_features(nn::Model<T>& model, std::span<const SpectralFeatures> set,
                                const std::filesystem::path& path);

struct Separation {
    double centroid_distance = 0.0;  // Euclidean distance between class centroids
    double within_class = 0.0;       // mean distance of each row to its class centroid
};

/// Throws when either class is absent.
Separation feature_separation(std::span<const double> features, std::size_t dim, std::span<const Label> labels);

}  // namespace odor::eval
