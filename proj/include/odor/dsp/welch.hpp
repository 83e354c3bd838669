#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace odor::dsp {

struct WelchConfig {
    double sample_rate_hz = 1000.0;
    std::size_t segment_length = 256;
    double overlap = 0.5;
};

struct Spectrum {
    std::vector<double> density;  // one-sided, units^2 / Hz
    double bin_hz = 0.0;
    std::size_t segments = 0;
};

/// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

std::size_t welch_segment_count(std::size_t signal_length, const WelchConfig& config);

/// Welch PSD: Hann-windowed, mean-detrended segments, one-sided density
/// scaling 1 / (fs * sum(w^2)); interior bins doubled, DC and Nyquist not.
Spectrum welch_psd(std::span<const double> signal, const WelchConfig& config);

}  // namespace odor::dsp
