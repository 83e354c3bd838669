#include "odor/dsp/preprocess.hpp"

#include <cmath>

#include "odor/core/errors.hpp"

namespace odor::dsp {

BiquadCascade PreprocessConfig::design() const {
    return design_butterworth_bandpass(order, low_hz, high_hz, input_rate_hz);
}

SpectralFeatures compute_spectra(const TrialRecord& raw, const BiquadCascade& cascade,
                                 const PreprocessConfig& config) {
    raw.validate();
    if (raw.channels != config.channels)
        throw InvalidArgument("trial " + raw.trial_id + ": expected " + std::to_string(config.channels) +
                              " channels, got " + std::to_string(raw.channels));
    if (std::abs(raw.sample_rate_hz - config.input_rate_hz) > 1e-9 * config.input_rate_hz)
        throw InvalidArgument("trial " + raw.trial_id + ": sample rate " + std::to_string(raw.sample_rate_hz) +
                              " Hz does not match configured " + std::to_string(config.input_rate_hz) + " Hz");
    if (raw.onset_offset_samples + config.window_samples > raw.samples)
        throw InvalidArgument("trial " + raw.trial_id + ": needs " + std::to_string(config.window_samples) +
                              " samples from onset offset " + std::to_string(raw.onset_offset_samples) + ", has " +
                              std::to_string(raw.samples));
    if (cascade.sample_rate_hz != config.input_rate_hz)
        throw InvalidArgument("filter was designed for a different sample rate");

    const auto welch = config.welch();
    SpectralFeatures out;
    out.trial_id = raw.trial_id;
    out.label = raw.label;
    out.channels = raw.channels;
    out.bins = config.segment_length / 2 + 1;
    out.bin_hz = welch.sample_rate_hz / static_cast<double>(config.segment_length);
    out.values.reserve(out.channels * out.bins);

    std::vector<double> window(config.window_samples);
    for (std::size_t c = 0; c < raw.channels; ++c) {
        const float* src = raw.channel(c) + raw.onset_offset_samples;
        for (std::size_t i = 0; i < window.size(); ++i) window[i] = src[i];
        const auto filtered = filter_zero_phase(cascade, window);
        const auto reduced = decimate(filtered, config.decimate);
        const auto spectrum = welch_psd(reduced, welch);
        out.values.insert(out.values.end(), spectrum.density.begin(), spectrum.density.end());
    }
    return out;
}

SpectralFeatures preprocess_trial(const TrialRecord& raw, const BiquadCascade& cascade, const ScalerParams& scaler,
                                  const PreprocessConfig& config) {
    return apply_scaler(scaler, compute_spectra(raw, cascade, config));
}

}  // namespace odor::dsp
