#pragma once

#include <cstddef>
#include <string_view>

namespace odor::train {

enum class Schedule { cosine_warm_restarts, one_cycle };

std::string_view schedule_name(Schedule s);
Schedule parse_schedule(std::string_view text);

struct WarmRestartConfig {
    double t0 = 10.0;  // first cycle length in epochs
    double t_mult = 2.0;
    double lr_max = 5e-4;
    double lr_min = 0.0;
};

/// Epoch may be fractional (per-batch updates). Cycles last t0, t0*t_mult, ...
double lr_cosine_warm_restarts(double epoch, const WarmRestartConfig& config = {});

struct OneCycleConfig {
    double lr_max = 5e-4;
    double pct_start = 0.3;
    double div = 25.0;          // start at lr_max / div
    double final_div = 1e4;     // end at lr_max / final_div
};

/// Cosine ramp from lr_max/div to lr_max at step pct_start*total_steps, then
/// cosine anneal to lr_max/final_div at the last step.
double lr_one_cycle(std::size_t step, std::size_t total_steps, const OneCycleConfig& config = {});

}  // namespace odor::train
