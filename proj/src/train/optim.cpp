#include "odor/train/optim.hpp"

#include <cmath>

namespace odor::train {

void AdamWConfig::validate() const {
    if (!(lr >= 0.0)) throw InvalidArgument("adamw: lr must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidArgument("adamw: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw InvalidArgument("adamw: eps must be > 0");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("adamw: weight_decay must be >= 0");
}

template <typename T>
AdamW<T>::AdamW(std::vector<Tensor<T>> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    config_.validate();
    for (const auto& p : params_) {
        if (!p.is_leaf()) throw InvalidArgument("adamw: parameters must be leaf tensors");
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

template <typename T>
StepStatus AdamW<T>::step(double lr) {
    for (const auto& p : params_)
        for (T g : p.grad())
            if (!std::isfinite(g)) return StepStatus::aborted_nonfinite;

    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto w = params_[k].mutable_data();
        const auto grad = params_[k].grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            const double old = static_cast<double>(w[i]);
            w[i] = static_cast<T>(old - lr * m_hat / (std::sqrt(v_hat) + config_.eps) - lr * config_.weight_decay * old);
        }
    }
    return StepStatus::applied;
}

template <typename T>
void AdamW<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace odor::train
