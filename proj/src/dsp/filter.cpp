#include "odor/dsp/filter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "odor/core/errors.hpp"

namespace odor::dsp {

using cplx = std::complex<double>;

std::complex<double> Biquad::response(cplx z) const {
    const cplx zi = 1.0 / z;
    return (b0 + zi * (b1 + zi * b2)) / (1.0 + zi * (a1 + zi * a2));
}

bool Biquad::stable() const {
    // roots of z^2 + a1 z + a2 strictly inside the unit circle
    const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a2, 0.0));
    const cplx r1 = (-a1 + disc) / 2.0;
    const cplx r2 = (-a1 - disc) / 2.0;
    return std::abs(r1) < 1.0 && std::abs(r2) < 1.0;
}

std::complex<double> BiquadCascade::response(double frequency_hz) const {
    const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * frequency_hz / sample_rate_hz);
    cplx h = 1.0;
    for (const auto& s : sections) h *= s.response(z);
    return h;
}

double BiquadCascade::magnitude_db(double frequency_hz) const {
    return 20.0 * std::log10(std::abs(response(frequency_hz)));
}

BiquadCascade design_butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz) {
    if (order < 1) throw InvalidArgument("butterworth: order must be >= 1");
    if (!(sample_rate_hz > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < sample_rate_hz / 2.0))
        throw InvalidArgument("butterworth: require 0 < low < high < fs/2");

    const double pi = std::numbers::pi;
    const double k = 2.0 * sample_rate_hz;
    const double w_low = k * std::tan(pi * low_hz / sample_rate_hz);
    const double w_high = k * std::tan(pi * high_hz / sample_rate_hz);
    const double bandwidth = w_high - w_low;
    const double center_sq = w_low * w_high;

    auto to_z = [k](cplx s) { return (k + s) / (k - s); };
    // Each lowpass prototype pole p maps to the two roots of s^2 - p*B*s + W0^2.
    auto bandpass_roots = [&](cplx p) {
        const cplx disc = std::sqrt(p * p * bandwidth * bandwidth - 4.0 * center_sq);
        return std::pair{(p * bandwidth + disc) / 2.0, (p * bandwidth - disc) / 2.0};
    };
    auto section_from = [](cplx za, cplx zb) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;  // zeros at z = +1 (DC) and z = -1 (Nyquist)
        s.a1 = -(za + zb).real();
        s.a2 = (za * zb).real();
        return s;
    };

    BiquadCascade cascade;
    cascade.order = order;
    cascade.low_hz = low_hz;
    cascade.high_hz = high_hz;
    cascade.sample_rate_hz = sample_rate_hz;

    for (int i = 1; i <= order; ++i) {
        const cplx p = std::polar(1.0, pi * (2.0 * i + order - 1.0) / (2.0 * order));
        if (p.imag() > 1e-12) {
            const auto [s1, s2] = bandpass_roots(p);
            cascade.sections.push_back(section_from(to_z(s1), std::conj(to_z(s1))));
            cascade.sections.push_back(section_from(to_z(s2), std::conj(to_z(s2))));
        } else if (std::abs(p.imag()) <= 1e-12) {
            const auto [s1, s2] = bandpass_roots(cplx(p.real(), 0.0));
            cascade.sections.push_back(section_from(to_z(s1), to_z(s2)));
        }
    }

    // Unity gain per section at the digital image of the analog center.
    const double center_hz = sample_rate_hz / pi * std::atan(std::sqrt(center_sq) / k);
    const cplx zc = std::polar(1.0, 2.0 * pi * center_hz / sample_rate_hz);
    for (auto& s : cascade.sections) {
        const double g = 1.0 / std::abs(s.response(zc));
        s.b0 *= g;
        s.b1 *= g;
        s.b2 *= g;
        if (!s.stable()) throw Error("butterworth: designed section is unstable");
    }
    return cascade;
}

namespace {

// Transposed direct form II, in place.
struct SectionState {
    double z1 = 0, z2 = 0;
};

// All sections advance per sample so their recurrences overlap in the pipeline.
template <std::size_t N>
void run_fixed(const Biquad* s, SectionState* state, std::vector<double>& x) {
    std::array<SectionState, N> z;
    for (std::size_t k = 0; k < N; ++k) z[k] = state[k];
    for (double& v : x) {
        double in = v;
        for (std::size_t k = 0; k < N; ++k) {
            const double out = s[k].b0 * in + z[k].z1;
            z[k].z1 = s[k].b1 * in - s[k].a1 * out + z[k].z2;
            z[k].z2 = s[k].b2 * in - s[k].a2 * out;
            in = out;
        }
        v = in;
    }
}

void run_cascade(const BiquadCascade& cascade, std::vector<SectionState> state, std::vector<double>& x) {
    const auto* s = cascade.sections.data();
    switch (cascade.sections.size()) {
        case 1: return run_fixed<1>(s, state.data(), x);
        case 2: return run_fixed<2>(s, state.data(), x);
        case 3: return run_fixed<3>(s, state.data(), x);
        case 4: return run_fixed<4>(s, state.data(), x);
        case 5: return run_fixed<5>(s, state.data(), x);
        case 6: return run_fixed<6>(s, state.data(), x);
        default:
            for (std::size_t k = 0; k < cascade.sections.size(); ++k) run_fixed<1>(s + k, state.data() + k, x);
    }
}

// Runs the cascade with the state each section would hold after a constant
// input equal to x[0] had been applied forever.
void run_steady_state(const BiquadCascade& cascade, std::vector<double>& x) {
    double level = x.empty() ? 0.0 : x.front();
    std::vector<SectionState> state;
    for (const auto& s : cascade.sections) {
        const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        const double out = dc * level;
        state.push_back({out - s.b0 * level, s.b2 * level - s.a2 * out});
        level = out;
    }
    run_cascade(cascade, std::move(state), x);
}

}  // namespace

std::vector<double> filter_causal(const BiquadCascade& cascade, std::span<const double> signal) {
    std::vector<double> y(signal.begin(), signal.end());
    run_cascade(cascade, std::vector<SectionState>(cascade.sections.size()), y);
    return y;
}

std::size_t zero_phase_padding(const BiquadCascade& cascade) {
    return 3 * static_cast<std::size_t>(2 * cascade.order);
}

std::vector<double> filter_zero_phase(const BiquadCascade& cascade, std::span<const double> signal) {
    const std::size_t pad = zero_phase_padding(cascade);
    const std::size_t n = signal.size();
    if (n <= pad)
        throw InvalidArgument("filter_zero_phase: signal of " + std::to_string(n) + " samples needs more than " +
                              std::to_string(pad));

    std::vector<double> ext(n + 2 * pad);
    const double first = signal.front();
    const double last = signal.back();
    for (std::size_t i = 0; i < pad; ++i) {
        ext[i] = 2.0 * first - signal[pad - i];
        ext[pad + n + i] = 2.0 * last - signal[n - 2 - i];
    }
    std::copy(signal.begin(), signal.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

    run_steady_state(cascade, ext);
    std::reverse(ext.begin(), ext.end());
    run_steady_state(cascade, ext);
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> decimate(std::span<const double> signal, std::size_t factor) {
    if (factor < 1) throw InvalidArgument("decimate: factor must be >= 1");
    std::vector<double> out(signal.size() / factor);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal[i * factor];
    return out;
}

}  // namespace odor::dsp
