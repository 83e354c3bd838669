#include "odor/train/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "odor/core/errors.hpp"

namespace odor::train {

std::string_view schedule_name(Schedule s) {
    return s == Schedule::one_cycle ? "one_cycle" : "cosine_warm_restarts";
}

Schedule parse_schedule(std::string_view text) {
    if (text == "one_cycle" || text == "onecycle") return Schedule::one_cycle;
    if (text == "cosine_warm_restarts" || text == "cosine") return Schedule::cosine_warm_restarts;
    throw InvalidArgument("unknown schedule '" + std::string(text) + "'");
}

namespace {

double cosine_between(double from, double to, double fraction) {
    return to + 0.5 * (from - to) * (1.0 + std::cos(std::numbers::pi * fraction));
}

}  // namespace

double lr_cosine_warm_restarts(double epoch, const WarmRestartConfig& c) {
    if (!(epoch >= 0.0)) throw InvalidArgument("lr_cosine_warm_restarts: epoch must be >= 0");
    if (!(c.t0 > 0.0) || !(c.t_mult >= 1.0)) throw InvalidArgument("lr_cosine_warm_restarts: bad cycle lengths");
    double t_cur = epoch;
    double t_i = c.t0;
    while (t_cur >= t_i) {
        t_cur -= t_i;
        t_i *= c.t_mult;
    }
    return cosine_between(c.lr_max, c.lr_min, t_cur / t_i);
}

double lr_one_cycle(std::size_t step, std::size_t total_steps, const OneCycleConfig& c) {
    if (step >= total_steps) throw InvalidArgument("lr_one_cycle: step must be < total_steps");
    if (!(c.pct_start > 0.0 && c.pct_start < 1.0) || !(c.div >= 1.0) || !(c.final_div >= 1.0))
        throw InvalidArgument("lr_one_cycle: bad configuration");
    const double lr_start = c.lr_max / c.div;
    const double lr_end = c.lr_max / c.final_div;
    const double peak = c.pct_start * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (s <= peak) return cosine_between(lr_start, c.lr_max, s / peak);
    const double last = static_cast<double>(total_steps - 1);
    if (last <= peak) return c.lr_max;
    return cosine_between(c.lr_max, lr_end, (s - peak) / (last - peak));
}

}  // namespace odor::train
