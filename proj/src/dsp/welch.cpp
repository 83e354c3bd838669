#include "odor/dsp/welch.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "odor/core/errors.hpp"

namespace odor::dsp {

namespace {

// FFTW planning is not thread-safe; execution on fresh fftw_malloc buffers is.
class PlanCache {
public:
    fftw_plan get(std::size_t n) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        auto* in = fftw_alloc_real(n);
        auto* out = fftw_alloc_complex(n / 2 + 1);
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        plans_.emplace(n, plan);
        return plan;
    }
    ~PlanCache() {
        for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    std::mutex mutex_;
    std::map<std::size_t, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

std::vector<double> hann_window(std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t i = 0; i < length; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(length));
    return w;
}

std::size_t welch_segment_count(std::size_t signal_length, const WelchConfig& config) {
    const auto overlap = static_cast<std::size_t>(std::floor(static_cast<double>(config.segment_length) * config.overlap));
    const std::size_t step = config.segment_length - overlap;
    if (signal_length < config.segment_length) return 0;
    return (signal_length - config.segment_length) / step + 1;
}

Spectrum welch_psd(std::span<const double> signal, const WelchConfig& config) {
    const std::size_t n = config.segment_length;
    if (n < 2) throw InvalidArgument("welch: segment length must be >= 2");
    if (!(config.overlap >= 0.0 && config.overlap < 1.0)) throw InvalidArgument("welch: overlap must be in [0, 1)");
    if (!(config.sample_rate_hz > 0.0)) throw InvalidArgument("welch: sample rate must be positive");
    if (signal.size() < n)
        throw InvalidArgument("welch: signal of " + std::to_string(signal.size()) + " samples shorter than segment " +
                              std::to_string(n));

    const auto overlap = static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.overlap));
    const std::size_t step = n - overlap;
    const std::size_t segments = welch_segment_count(signal.size(), config);
    const std::size_t bins = n / 2 + 1;

    const auto window = hann_window(n);
    double window_power = 0.0;
    for (double w : window) window_power += w * w;
    const double scale = 1.0 / (config.sample_rate_hz * window_power);

    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(bins));
    const fftw_plan plan = plan_cache().get(n);

    Spectrum result;
    result.density.assign(bins, 0.0);
    result.bin_hz = config.sample_rate_hz / static_cast<double>(n);
    result.segments = segments;

    for (std::size_t seg = 0; seg < segments; ++seg) {
        const double* x = signal.data() + seg * step;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x[i];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) in.get()[i] = (x[i] - mean) * window[i];
        fftw_execute_dft_r2c(plan, in.get(), out.get());
        for (std::size_t k = 0; k < bins; ++k) {
            const double re = out.get()[k][0];
            const double im = out.get()[k][1];
            result.density[k] += re * re + im * im;
        }
    }
    const bool even = n % 2 == 0;
    for (std::size_t k = 0; k < bins; ++k) {
        const bool edge = k == 0 || (even && k == bins - 1);
        result.density[k] *= scale * (edge ? 1.0 : 2.0) / static_cast<double>(segments);
    }
    return result;
}

}  // namespace odor::dsp
