#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "odor/data/records.hpp"

namespace odor::dsp {

/// Robust per-feature scaling fitted on training spectra: one (median, IQR)
/// pair per (channel, bin). Immutable once fitted.
struct ScalerParams {
    static constexpr double kEpsilon = 1e-12;

    std::size_t channels = 0;
    std::size_t bins = 0;
    std::vector<double> median;
    std::vector<double> iqr;
    std::vector<std::uint8_t> degenerate;  // 1 where iqr < kEpsilon
    std::vector<std::string> fit_ids;      // trials the statistics came from

    std::size_t degenerate_count() const;
};

/// Linear-interpolation quantile (position q * (n - 1)) of sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

ScalerParams fit_scaler(std::span<const SpectralFeatures> training);
ScalerParams fit_scaler(std::span<const SpectralFeatures> spectra, std::span<const std::size_t> indices);

/// (x - median) / max(iqr, eps); degenerate features become 0.
SpectralFeatures apply_scaler(const ScalerParams& params, const SpectralFeatures& spectrum);

/// JSON file with the grid, per-feature statistics and the fit trial ids.
void save_scaler(const ScalerParams& params, const std::filesystem::path& path);
ScalerParams load_scaler(const std::filesystem::path& path);

}  // namespace odor::dsp
