#pragma once

#include <cstddef>

#include "odor/data/records.hpp"
#include "odor/dsp/filter.hpp"
#include "odor/dsp/scaler.hpp"
#include "odor/dsp/welch.hpp"

namespace odor::dsp {

struct PreprocessConfig {
    std::size_t channels = 32;
    int order = 5;
    double low_hz = 0.5;
    double high_hz = 100.0;
    double input_rate_hz = 30000.0;
    std::size_t decimate = 30;
    std::size_t window_samples = 60000;  // analysis window, starting at the onset offset
    std::size_t segment_length = 256;
    double overlap = 0.5;

    double output_rate_hz() const { return input_rate_hz / static_cast<double>(decimate); }
    WelchConfig welch() const { return {output_rate_hz(), segment_length, overlap}; }
    BiquadCascade design() const;
};

/// Filter -> decimate -> Welch for every channel; unscaled power spectra.
SpectralFeatures compute_spectra(const TrialRecord& raw, const BiquadCascade& cascade,
                                 const PreprocessConfig& config = {});

/// compute_spectra followed by robust scaling.
SpectralFeatures preprocess_trial(const TrialRecord& raw, const BiquadCascade& cascade, const ScalerParams& scaler,
                                  const PreprocessConfig& config = {});

}  // namespace odor::dsp
