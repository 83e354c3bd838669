#pragma once

#include <cstddef>
#include <vector>

#include "odor/core/tensor.hpp"

namespace odor::train {

struct AdamWConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;

    void validate() const;
};

enum class StepStatus { applied, aborted_nonfinite };

/// Decoupled weight decay:
///   w <- w - lr * m_hat / (sqrt(v_hat) + eps) - lr * weight_decay * w
/// Moments are kept in double regardless of the parameter type.
template <typename T>
class AdamW {
public:
    AdamW(std::vector<Tensor<T>> params, AdamWConfig config = {});

    /// Applies one update from the parameters' current gradients at the given
    /// learning rate. A parameter without a gradient counts as g = 0. If any
    /// gradient is non-finite nothing changes and the step is not counted.
    StepStatus step(double lr);
    StepStatus step() { return step(config_.lr); }

    void zero_grad();

    std::size_t steps() const { return t_; }
    const AdamWConfig& config() const { return config_; }
    const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
    const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

private:
    std::vector<Tensor<T>> params_;
    AdamWConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
};

}  // namespace odor::train
