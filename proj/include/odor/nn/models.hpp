#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "odor/core/checkpoint.hpp"
#include "odor/nn/layers.hpp"

namespace odor::nn {

enum class Architecture { attention_cnn, res_cnn };

std::string_view architecture_name(Architecture arch);
Architecture parse_architecture(std::string_view text);

/// A trunk ending in global average pooling (the exported features) and a
/// classification head producing two logits.
template <typename T>
class Model {
public:
    struct Output {
        Tensor<T> logits;    // (N, 2)
        Tensor<T> features;  // (N, feature_dim)
    };

    Model(Architecture arch, std::size_t channels, std::size_t bins, std::size_t feature_dim,
          std::unique_ptr<Sequential<T>> trunk, std::unique_ptr<Sequential<T>> head);

    /// batch: (N, channels, bins).
    Output forward(const Tensor<T>& batch, ForwardContext& ctx);

    Architecture architecture() const { return arch_; }
    std::size_t channels() const { return channels_; }
    std::size_t bins() const { return bins_; }
    std::size_t feature_dim() const { return feature_dim_; }

    /// Architecture guard stored in checkpoints.
    std::string descriptor() const;
    StateList<T> state();
    std::vector<Tensor<T>> parameters();
    std::size_t parameter_count();
    void initialize(std::uint64_t seed);

    Sequential<T>& trunk() { return *trunk_; }
    Sequential<T>& head() { return *head_; }

private:
    Architecture arch_;
    std::size_t channels_;
    std::size_t bins_;
    std::size_t feature_dim_;
    std::unique_ptr<Sequential<T>> trunk_;
    std::unique_ptr<Sequential<T>> head_;
};

template <typename T>
Model<T> build_attention_cnn(std::uint64_t seed, std::size_t channels = 32, std::size_t bins = 129);
template <typename T>
Model<T> build_res_cnn(std::uint64_t seed, std::size_t channels = 32, std::size_t bins = 129);
template <typename T>
Model<T> build_model(Architecture arch, std::uint64_t seed, std::size_t channels = 32, std::size_t bins = 129);

/// Parameters and BN running statistics, keyed by path.
template <typename T>
Checkpoint to_checkpoint(Model<T>& model, Precision precision);

/// Throws InvalidArgument when the descriptor or any entry disagrees with the
/// model. Values convert between float and double as needed.
template <typename T>
void load_state(Model<T>& model, const Checkpoint& checkpoint);

/// Rebuilds the architecture named by the checkpoint descriptor and loads its
/// state. Throws InvalidArgument for an unrecognized descriptor.
template <typename T>
Model<T> build_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace odor::nn
