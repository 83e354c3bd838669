#include "odor/data/synth.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>

#include "odor/core/errors.hpp"
#include "odor/core/seed.hpp"

namespace odor {

namespace {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

fftw_plan c2r_plan(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, fftw_plan> plans;
    std::lock_guard lock(mutex);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    ComplexBuffer in(fftw_alloc_complex(n / 2 + 1));
    RealBuffer out(fftw_alloc_real(n));
    auto plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    plans.emplace(n, plan);
    return plan;
}

/// Real Gaussian noise with power density proportional to weight(f), scaled to unit RMS.
template <typename Weight>
std::vector<double> shaped_noise(std::size_t n, double fs, std::mt19937_64& rng, Weight weight) {
    const std::size_t bins = n / 2 + 1;
    ComplexBuffer spec(fftw_alloc_complex(bins));
    RealBuffer out(fftw_alloc_real(n));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(n);
        const double amp = std::sqrt(weight(f));
        if (amp == 0.0) {
            spec[k][0] = spec[k][1] = 0.0;
            continue;
        }
        const double re = gauss(rng), im = gauss(rng);
        spec[k][0] = amp * re;
        spec[k][1] = (k == 0 || 2 * k == n) ? 0.0 : amp * im;
    }
    fftw_execute_dft_c2r(c2r_plan(n), spec.get(), out.get());
    double power = 0;
    for (std::size_t i = 0; i < n; ++i) power += out[i] * out[i];
    const double inv_rms = power > 0 ? 1.0 / std::sqrt(power / static_cast<double>(n)) : 0.0;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = out[i] * inv_rms;
    return x;
}

constexpr double kNoiseFloorHz = 0.5;

double pink_weight(double f) {
    return f < kNoiseFloorHz ? 0.0 : 1.0 / f;
}

/// Share of unit background variance falling in [lo, hi] Hz (expected value).
double band_share(std::size_t n, double fs, double lo, double hi) {
    double band = 0, total = 0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(n);
        const double w = pink_weight(f) * ((2 * k == n) ? 0.5 : 1.0);
        total += w;
        if (f >= lo && f <= hi) band += w;
    }
    return band / total;
}

struct ChannelProfile {
    double gain = 1.0;
    double gamma = 1.0;
    double beta = 1.0;
};

std::vector<ChannelProfile> channel_profiles(const SynthConfig& config) {
    std::vector<ChannelProfile> out(config.channels);
    for (std::size_t c = 0; c < config.channels; ++c) {
        std::mt19937_64 rng(derive_seed(config.seed, "synth-channel", c));
        std::uniform_real_distribution<double> gain(0.7, 1.3), spatial(0.5, 1.5);
        out[c] = {gain(rng), spatial(rng), spatial(rng)};
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_trials < 2) throw InvalidArgument("synth: n_trials must be >= 2");
    if (!(snr >= 0.0) || !std::isfinite(snr)) throw InvalidArgument("synth: snr must be >= 0");
    if (!(class_balance > 0.0 && class_balance < 1.0)) throw InvalidArgument("synth: class balance must be in (0, 1)");
    if (channels == 0) throw InvalidArgument("synth: channels must be positive");
    if (samples < 256) throw InvalidArgument("synth: need at least 256 samples");
    if (!(sample_rate_hz > 200.0)) throw InvalidArgument("synth: sample rate must exceed 200 Hz");
    if (onset_offset_samples >= samples) throw InvalidArgument("synth: onset beyond the trial");
    if (!(noise_rms_uv > 0.0)) throw InvalidArgument("synth: noise level must be positive");
    if (!(burst_seconds > 0.0)) throw InvalidArgument("synth: burst duration must be positive");
    if (!(trial_gain_sigma >= 0.0)) throw InvalidArgument("synth: trial gain spread must be >= 0");
    if (mice == 0) throw InvalidArgument("synth: need at least one mouse");
    const auto n_odor = static_cast<std::size_t>(std::llround(static_cast<double>(n_trials) * class_balance));
    if (n_odor == 0 || n_odor == n_trials) throw InvalidArgument("synth: configuration yields a single class");
}

std::vector<Label> synth_labels(const SynthConfig& config) {
    config.validate();
    const auto n_odor = static_cast<std::size_t>(std::llround(static_cast<double>(config.n_trials) * config.class_balance));
    std::vector<Label> labels(config.n_trials, Label::blank);
    std::fill_n(labels.begin(), n_odor, Label::odor);
    std::mt19937_64 rng(derive_seed(config.seed, "synth-labels"));
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

TrialRecord synth_trial(const SynthConfig& config, std::size_t index) {
    config.validate();
    if (index >= config.n_trials) throw InvalidArgument("synth: trial index out of range");
    const auto labels = synth_labels(config);
    const auto profiles = channel_profiles(config);
    const std::size_t n = config.samples;
    const double fs = config.sample_rate_hz;

    TrialRecord t;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", index);
    t.trial_id = id;
    t.mouse_id = "m" + std::to_string(index % config.mice + 1);
    t.channels = config.channels;
    t.samples = n;
    t.sample_rate_hz = fs;
    t.label = labels[index];
    t.odorant = t.label == Label::odor ? "synthetic" : "";
    t.onset_offset_samples = config.onset_offset_samples;
    t.data.resize(config.channels * n);

    // Every trial consumes the same random draws regardless of label, so at
    // snr = 0 the two classes are identically distributed.
    std::mt19937_64 rng(derive_seed(config.seed, "synth-trial", index));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> jitter(0.6, 1.4);
    const double trial_gain = std::exp(config.trial_gain_sigma * gauss(rng));
    const double burst_gain = jitter(rng);

    const std::size_t onset = config.onset_offset_samples;
    const std::size_t burst = std::min(n - onset, static_cast<std::size_t>(std::llround(config.burst_seconds * fs)));
    std::vector<double> envelope(n, 0.0);
    double env_power = 0;
    for (std::size_t i = 0; i < burst; ++i) {
        const double w = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(burst));
        envelope[onset + i] = w * w;
        env_power += envelope[onset + i] * envelope[onset + i];
    }
    env_power /= static_cast<double>(n - onset);

    auto band = [](double lo, double hi) { return [lo, hi](double f) { return f >= lo && f <= hi ? 1.0 : 0.0; }; };
    const auto gamma = shaped_noise(n, fs, rng, band(40.0, 80.0));
    const auto beta = shaped_noise(n, fs, rng, band(15.0, 30.0));
    const double s = t.label == Label::odor ? config.snr * burst_gain : 0.0;
    const double gamma_amp = s * std::sqrt(2.0 * band_share(n, fs, 40.0, 80.0) / env_power);
    const double beta_amp = s * std::sqrt(0.5 * band_share(n, fs, 15.0, 30.0) / env_power);

    for (std::size_t c = 0; c < config.channels; ++c) {
        const auto background = shaped_noise(n, fs, rng, pink_weight);
        const auto& p = profiles[c];
        const double scale = config.noise_rms_uv * trial_gain * p.gain;
        float* out = t.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            const double burst_term = envelope[i] * (gamma_amp * p.gamma * gamma[i] + beta_amp * p.beta * beta[i]);
            out[i] = static_cast<float>(scale * (background[i] + burst_term));
        }
    }
    return t;
}

std::vector<TrialRecord> synth_generate(const SynthConfig& config) {
    config.validate();
    std::vector<TrialRecord> out;
    out.reserve(config.n_trials);
    for (std::size_t i = 0; i < config.n_trials; ++i) out.push_back(synth_trial(config, i));
    return out;
}

}  // namespace odor
