#pragma once

#include <cstddef>
#include <cstdint>

#include "odor/core/grad_check.hpp"
#include "odor/nn/models.hpp"

namespace odor::nn {

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kMaxSkippedFraction = 0.05;

/// Gradient of the cross-entropy loss of a freshly initialized model with
/// respect to a random (4, 32, 129) input batch in [-2, 2]: 64-bit, batch
/// statistics, dropout off. Probes that straddle a branch change are skipped.
GradCheckReport model_grad_check(Architecture arch, std::uint64_t seed, std::size_t max_elements = 96);

struct GradSuiteResult {
    double worst = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;

    double skipped_fraction() const;
    bool passed() const;
};

/// model_grad_check over seeds first_seed .. first_seed + instances - 1.
GradSuiteResult model_grad_suite(Architecture arch, std::size_t instances, std::uint64_t first_seed = 0,
                                 std::size_t max_elements = 96);

}  // namespace odor::nn
