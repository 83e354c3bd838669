#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "odor/core/tensor.hpp"

namespace odor {

struct GradCheckOptions {
    double step = 1e-5;
    /// Check only this many randomly chosen coordinates (0 = all of them).
    std::size_t max_elements = 0;
    std::uint64_t seed = 0;
    /// Skip coordinates whose probe interval crosses a ReLU/max branch change
    /// (the central difference is not an oracle there) and count them.
    bool skip_nonsmooth = false;
};

struct GradCheckReport {
    double max_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // non-smooth probe intervals
};

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

/// Max over checked coordinates of
///   |analytic - central| / max(|analytic|, |central|, 1e-8).
/// Only available at 64-bit precision. Throws InvalidArgument when `fn` is
/// not deterministic or the step lies outside [1e-6, 1e-4].
double grad_check(const ScalarFn& fn, const Tensor<double>& x, const GradCheckOptions& options = {});
GradCheckReport grad_check_report(const ScalarFn& fn, const Tensor<double>& x, const GradCheckOptions& options = {});

using LossFn = std::function<Tensor<double>()>;

/// Same metric for a loss that closes over several leaves (an input and a
/// module's parameters). Leaves are perturbed in place and restored; their
/// grads are zeroed afterwards. With max_elements set, that many coordinates
/// are sampled from the union of all leaves.
double grad_check_leaves(const LossFn& fn, std::vector<Tensor<double>> leaves, const GradCheckOptions& options = {});

}  // namespace odor
