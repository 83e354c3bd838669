#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "odor/core/tensor.hpp"

namespace odor::nn {

enum class Mode { train, eval };

struct ForwardContext {
    Mode mode = Mode::eval;
    std::mt19937_64* rng = nullptr;  // consumed by dropout in train mode
    bool dropout = true;             // false: dropout is identity even in train mode

    bool training() const { return mode == Mode::train; }
};

enum class InitRule { kaiming_normal, ones, zeros };

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    InitRule init = InitRule::zeros;
    std::size_t fan_in = 1;
};

/// Flat view of a module tree's state with dotted path names.
template <typename T>
struct StateList {
    std::vector<std::pair<std::string, Parameter<T>*>> parameters;
    std::vector<std::pair<std::string, Tensor<T>*>> buffers;
};

enum class LayerKind {
    conv1d,
    batchnorm1d,
    relu,
    maxpool1d,
    global_avg_pool,
    linear,
    dropout,
    se_attention,
    spatial_attention,
    residual_block,
    concat_branches,
    sequential,
};

std::string_view kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t reduction = 0;
    double rate = 0.0;
    bool bias = true;

    /// Throws InvalidArgument when a hyperparameter is invalid for the kind.
    void validate() const;
    std::string describe() const;
};

template <typename T>
class Module {
public:
    virtual ~Module() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) = 0;
    virtual LayerSpec spec() const = 0;
    virtual void collect(const std::string& prefix, StateList<T>& out);
    /// Spec of this layer and its children; the architecture guard string.
    virtual std::string describe() const;
};

template <typename T>
using ModulePtr = std::unique_ptr<Module<T>>;

template <typename T>
class Conv1d : public Module<T> {
public:
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
           std::size_t padding = 0, bool bias = true);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return spec_; }
    void collect(const std::string& prefix, StateList<T>& out) override;

    Parameter<T> weight;  // (out, in, kernel)
    Parameter<T> bias;    // (out); unused when the layer has no bias

private:
    LayerSpec spec_;
};

/// Per-channel normalization over (N, L). Running variance uses the unbiased
/// batch estimate; normalization uses the biased one.
template <typename T>
class BatchNorm1d : public Module<T> {
public:
    static constexpr double kEpsilon = 1e-5;
    static constexpr double kMomentum = 0.1;

    explicit BatchNorm1d(std::size_t channels);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override;
    void collect(const std::string& prefix, StateList<T>& out) override;

    Parameter<T> gamma;
    Parameter<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;

private:
    std::size_t channels_;
};

template <typename T>
class ReLU : public Module<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return {LayerKind::relu}; }
};

template <typename T>
class MaxPool1d : public Module<T> {
public:
    /// Kernel defaults to the stride.
    explicit MaxPool1d(std::size_t stride, std::size_t kernel = 0);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return spec_; }

private:
    LayerSpec spec_;
};

/// (N, C, L) -> (N, C), mean over L.
template <typename T>
class GlobalAvgPool : public Module<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return {LayerKind::global_avg_pool}; }
};

/// y = x W + b with W of shape (in, out).
template <typename T>
class Linear : public Module<T> {
public:
    Linear(std::size_t in_features, std::size_t out_features);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return spec_; }
    void collect(const std::string& prefix, StateList<T>& out) override;

    Parameter<T> weight;
    Parameter<T> bias;

private:
    LayerSpec spec_;
};

/// Inverted dropout; identity in eval mode or at rate 0.
template <typename T>
class Dropout : public Module<T> {
public:
    explicit Dropout(double rate);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return spec_; }

private:
    LayerSpec spec_;
};

/// Squeeze-and-excitation: s = sigmoid(W2 relu(W1 gap(x))), bias-free, and
/// each channel of x is scaled by s.
template <typename T>
class SEAttention : public Module<T> {
public:
    SEAttention(std::size_t channels, std::size_t reduction);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return spec_; }
    void collect(const std::string& prefix, StateList<T>& out) override;

    std::size_t hidden() const { return hidden_; }

    Parameter<T> squeeze;  // (channels, hidden)
    Parameter<T> excite;   // (hidden, channels)

private:
    LayerSpec spec_;
    std::size_t hidden_;
};

/// Gate over positions from a 2->1 convolution of the channel-mean and
/// channel-max maps (same padding).
template <typename T>
class SpatialAttention : public Module<T> {
public:
    explicit SpatialAttention(std::size_t kernel = 7);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return spec_; }
    void collect(const std::string& prefix, StateList<T>& out) override;

    Conv1d<T> conv;

private:
    LayerSpec spec_;
};

/// relu(BN2(conv2(relu(BN1(conv1(x))))) + x); convs k3, s1, p1, bias-free.
template <typename T>
class ResidualBlock : public Module<T> {
public:
    explicit ResidualBlock(std::size_t channels);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override;
    void collect(const std::string& prefix, StateList<T>& out) override;
    std::string describe() const override;

    Conv1d<T> conv1;
    BatchNorm1d<T> bn1;
    Conv1d<T> conv2;
    BatchNorm1d<T> bn2;

private:
    std::size_t channels_;
};

/// Runs each branch on the same input and concatenates along channels.
template <typename T>
class ConcatBranches : public Module<T> {
public:
    explicit ConcatBranches(std::vector<ModulePtr<T>> branches);
    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return {LayerKind::concat_branches}; }
    void collect(const std::string& prefix, StateList<T>& out) override;
    std::string describe() const override;

private:
    std::vector<ModulePtr<T>> branches_;
};

template <typename T>
class Sequential : public Module<T> {
public:
    Sequential() = default;
    Sequential& add(ModulePtr<T> layer);
    template <typename Layer, typename... Args>
    Sequential& emplace(Args&&... args) {
        return add(std::make_unique<Layer>(std::forward<Args>(args)...));
    }

    Tensor<T> forward(const Tensor<T>& x, ForwardContext& ctx) override;
    LayerSpec spec() const override { return {LayerKind::sequential}; }
    void collect(const std::string& prefix, StateList<T>& out) override;
    std::string describe() const override;

    std::size_t size() const { return layers_.size(); }
    Module<T>& operator[](std::size_t i) { return *layers_[i]; }

private:
    std::vector<ModulePtr<T>> layers_;
};

/// Seeds every parameter from (seed, its path): Kaiming-normal with std
/// sqrt(2 / fan_in) for weights, ones/zeros for BN affine and biases. BN
/// running statistics reset to mean 0, variance 1.
template <typename T>
void initialize(Module<T>& module, const std::string& prefix, std::uint64_t seed);

template <typename T>
std::size_t parameter_count(Module<T>& module);

}  // namespace odor::nn
