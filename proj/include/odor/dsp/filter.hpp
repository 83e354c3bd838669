#pragma once

#include <complex>
#include <span>
#include <vector>

namespace odor::dsp {

/// Second-order section, a0 normalized to 1:
///   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;

    std::complex<double> response(std::complex<double> z) const;
    bool stable() const;
};

struct BiquadCascade {
    std::vector<Biquad> sections;
    int order = 0;
    double low_hz = 0;
    double high_hz = 0;
    double sample_rate_hz = 0;

    std::complex<double> response(double frequency_hz) const;
    double magnitude_db(double frequency_hz) const;
};

/// Butterworth bandpass of the given prototype order (2*order poles) as a
/// biquad cascade: analog prototype, lowpass-to-bandpass transform, and a
/// pre-warped bilinear transform. Unity gain at the band center.
BiquadCascade design_butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz);

/// Single causal pass, zero initial state.
std::vector<double> filter_causal(const BiquadCascade& cascade, std::span<const double> signal);

/// Forward-backward application with odd reflective padding of
/// 3 * (2 * order) samples and steady-state initial conditions on each pass.
std::vector<double> filter_zero_phase(const BiquadCascade& cascade, std::span<const double> signal);

std::size_t zero_phase_padding(const BiquadCascade& cascade);

/// Keeps every factor-th sample starting at index 0; floor(N / factor) samples.
std::vector<double> decimate(std::span<const double> signal, std::size_t factor);

}  // namespace odor::dsp
