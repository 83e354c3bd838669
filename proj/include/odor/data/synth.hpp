#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "odor/data/records.hpp"

namespace odor {

/// Synthetic stand-in for multichannel olfactory-bulb LFP. Blank trials are
/// 1/f noise; odor trials add a Hann-enveloped 40-80 Hz burst and a smaller
/// 15-30 Hz burst from onset. At snr = s the burst adds 2 s^2 times the
/// background gamma-band power (beta: 0.5 s^2), so amplitudes scale with s.
struct SynthConfig {
    std::size_t n_trials = 400;
    double snr = 1.0;
    std::uint64_t seed = 0;
    double class_balance = 0.5;  // odor fraction
    std::size_t channels = 32;
    std::size_t samples = 60000;
    double sample_rate_hz = 30000.0;
    std::size_t onset_offset_samples = 0;
    double noise_rms_uv = 50.0;
    double burst_seconds = 1.5;
    double trial_gain_sigma = 0.2;   // lognormal spread of per-trial amplitude
    std::size_t mice = 7;

    void validate() const;
};

/// Labels for all trials: exactly round(n * balance) odor trials, shuffled.
std::vector<Label> synth_labels(const SynthConfig& config);

/// Trial `index` alone; a pure function of (config, index).
TrialRecord synth_trial(const SynthConfig& config, std::size_t index);

std::vector<TrialRecord> synth_generate(const SynthConfig& config);

}  // namespace odor
