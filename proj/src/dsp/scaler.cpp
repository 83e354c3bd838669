#include "odor/dsp/scaler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "odor/core/errors.hpp"

namespace odor::dsp {

std::size_t ScalerParams::degenerate_count() const {
    return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), std::uint8_t{1}));
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw InvalidArgument("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ScalerParams fit_scaler(std::span<const SpectralFeatures> training) {
    std::vector<std::size_t> all(training.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit_scaler(training, all);
}

ScalerParams fit_scaler(std::span<const SpectralFeatures> spectra, std::span<const std::size_t> indices) {
    if (indices.empty()) throw InvalidArgument("fit_scaler: no training spectra");
    if (indices.size() < 4)
        throw InvalidArgument("fit_scaler: need at least 4 training trials, got " + std::to_string(indices.size()));
    const auto& first = spectra[indices.front()];
    ScalerParams p;
    p.channels = first.channels;
    p.bins = first.bins;
    const std::size_t features = p.channels * p.bins;
    for (auto i : indices) {
        if (spectra[i].channels != p.channels || spectra[i].bins != p.bins)
            throw ShapeError("fit_scaler: spectrum " + spectra[i].trial_id + " has a different feature grid");
        p.fit_ids.push_back(spectra[i].trial_id);
    }
    p.median.resize(features);
    p.iqr.resize(features);
    p.degenerate.resize(features);
    std::vector<double> column(indices.size());
    for (std::size_t f = 0; f < features; ++f) {
        for (std::size_t j = 0; j < indices.size(); ++j) column[j] = spectra[indices[j]].values[f];
        std::sort(column.begin(), column.end());
        p.median[f] = quantile_sorted(column, 0.5);
        p.iqr[f] = quantile_sorted(column, 0.75) - quantile_sorted(column, 0.25);
        p.degenerate[f] = p.iqr[f] < ScalerParams::kEpsilon ? 1 : 0;
    }
    return p;
}

SpectralFeatures apply_scaler(const ScalerParams& params, const SpectralFeatures& spectrum) {
    if (spectrum.channels != params.channels || spectrum.bins != params.bins)
        throw ShapeError("apply_scaler: spectrum grid " + std::to_string(spectrum.channels) + "x" +
                         std::to_string(spectrum.bins) + " does not match scaler grid " +
                         std::to_string(params.channels) + "x" + std::to_string(params.bins));
    SpectralFeatures out = spectrum;
    for (std::size_t f = 0; f < out.values.size(); ++f) {
        out.values[f] = params.degenerate[f]
                            ? 0.0
                            : (spectrum.values[f] - params.median[f]) / std::max(params.iqr[f], ScalerParams::kEpsilon);
    }
    return out;
}

void save_scaler(const ScalerParams& params, const std::filesystem::path& path) {
    const nlohmann::json j{{"channels", params.channels}, {"bins", params.bins},     {"median", params.median},
                           {"iqr", params.iqr},           {"degenerate", params.degenerate}, {"fit_ids", params.fit_ids}};
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << j.dump() << '\n';
}

ScalerParams load_scaler(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read scaler " + path.string());
    ScalerParams p;
    try {
        const auto j = nlohmann::json::parse(in);
        p.channels = j.at("channels").get<std::size_t>();
        p.bins = j.at("bins").get<std::size_t>();
        p.median = j.at("median").get<std::vector<double>>();
        p.iqr = j.at("iqr").get<std::vector<double>>();
        p.degenerate = j.at("degenerate").get<std::vector<std::uint8_t>>();
        p.fit_ids = j.at("fit_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("scaler " + path.string() + ": " + e.what());
    }
    const std::size_t n = p.channels * p.bins;
    if (n == 0 || p.median.size() != n || p.iqr.size() != n || p.degenerate.size() != n)
        throw CorruptFileError("scaler " + path.string() + ": statistics do not match the grid");
    return p;
}

}  // namespace odor::dsp
