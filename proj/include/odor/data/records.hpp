#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace odor {

enum class Label : int { blank = 0, odor = 1 };

std::string_view label_name(Label label);
Label parse_label(std::string_view text);

/// One trial's raw multichannel recording, channel-major, in microvolts.
struct TrialRecord {
    std::string trial_id;
    std::string mouse_id;
    std::size_t channels = 0;
    std::size_t samples = 0;
    double sample_rate_hz = 0.0;
    Label label = Label::blank;
    std::string odorant;
    std::size_t onset_offset_samples = 0;
    std::vector<float> data;  // channels * samples

    const float* channel(std::size_t c) const { return data.data() + c * samples; }
    float* channel(std::size_t c) { return data.data() + c * samples; }
    void validate() const;
};

/// Per-trial power spectra, channels x frequency bins, row-major.
struct SpectralFeatures {
    std::string trial_id;
    Label label = Label::blank;
    std::size_t channels = 0;
    std::size_t bins = 0;
    double bin_hz = 0.0;
    std::vector<double> values;

    double at(std::size_t channel, std::size_t bin) const { return values[channel * bins + bin]; }
    double frequency(std::size_t bin) const { return static_cast<double>(bin) * bin_hz; }
};

}  // namespace odor
