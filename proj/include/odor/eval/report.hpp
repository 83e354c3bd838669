#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "odor/eval/metrics.hpp"

namespace odor::eval {

enum class MetricId { accuracy, f1, auc, sensitivity, specificity, precision };

inline constexpr std::array<MetricId, 6> kAllMetrics = {MetricId::accuracy,    MetricId::f1,
                                                       MetricId::auc,         MetricId::sensitivity,
                                                       MetricId::specificity, MetricId::precision};

std::string_view metric_name(MetricId id);
double metric_value(const Metrics& m, MetricId id);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample convention (n - 1); 0 for a single fold
    std::size_t n = 0;
};

MeanSd mean_sd(std::span<const double> values);

/// One model's fold reports with per-metric mean and SD.
struct ModelSummary {
    std::string name;
    std::vector<FoldReport> folds;
    std::array<MeanSd, kAllMetrics.size()> aggregate{};

    const MeanSd& operator[](MetricId id) const { return aggregate[static_cast<std::size_t>(id)]; }
};

ModelSummary summarize(std::string name, std::vector<FoldReport> folds);

/// Fixed-format table: Model | Acc | F1 | AUC | Sens | Spec | Prec, each
/// "mean ± SD" (fractions shown as percent, AUC as a fraction).
void write_table(std::ostream& os, std::span<const ModelSummary> rows, std::string_view title);

void write_predictions_csv(const std::filesystem::path& path, std::span<const TrialPrediction> trials);
void write_calibration_csv(const std::filesystem::path& path, std::span<const CalibrationBin> bins);
void write_histogram_csv(const std::filesystem::path& path, const ConfidenceHistogram& histogram);

/// Every metric, the flag bits and the confusion counts.
nlohmann::json metrics_json(const Metrics& metrics);

}  // namespace odor::eval
