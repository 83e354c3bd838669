#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odor/core/errors.hpp"
#include "odor/data/records.hpp"

namespace odor::eval {

/// Raised when a metric has no value for the given input (AUC on one class).
struct UndefinedMetric : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

/// One row per trial: {p(blank), p(odor)}.
using ProbRows = std::vector<std::array<double, 2>>;

inline constexpr double kRowSumTolerance = 1e-5;

/// Arithmetic mean of two members' class probabilities.
ProbRows ensemble_probs(std::span<const std::array<double, 2>> p_res, std::span<const std::array<double, 2>> p_att);

/// odor iff p(odor) > 0.5.
Label decide(const std::array<double, 2>& row);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return tn + fp; }
};

enum MetricFlag : unsigned {
    kNoPredictedPositives = 1u << 0,  // precision denominator
    kNoActualPositives = 1u << 1,     // sensitivity denominator
    kNoActualNegatives = 1u << 2,     // specificity denominator
    kF1Undefined = 1u << 3,
    kAucUndefined = 1u << 4,
};

struct Metrics {
    Confusion confusion;
    double accuracy = 0.0;
    double precision = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    unsigned flags = 0;  // MetricFlag bits; flagged metrics hold 0
};

Confusion confusion_matrix(std::span<const Label> predicted, std::span<const Label> truth);

/// Threshold metrics; auc is left at 0 (see roc_auc).
Metrics confusion_metrics(std::span<const Label> predicted, std::span<const Label> truth);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks in O(n log n).
double roc_auc(std::span<const double> scores, std::span<const Label> truth);

struct TrialPrediction {
    std::string trial_id;
    Label truth = Label::blank;
    double p_odor = 0.0;
    Label predicted = Label::blank;

    bool correct() const { return truth == predicted; }
    double confidence() const { return p_odor > 0.5 ? p_odor : 1.0 - p_odor; }
};

std::vector<TrialPrediction> make_predictions(std::span<const std::string> ids, std::span<const Label> truth,
                                              const ProbRows& probs);

struct FoldReport {
    Metrics metrics;
    std::vector<TrialPrediction> trials;
};

/// Every metric including AUC; AUC is flagged rather than thrown when only one
/// class is present.
FoldReport make_fold_report(std::vector<TrialPrediction> trials);

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    double mean_confidence = 0.0;  // mean p(odor) of members
    double accuracy = 0.0;         // fraction of members with odor truth
    std::size_t count = 0;
};

/// Equal-width bins on p(odor) over [0, 1]; p = 1 lands in the last bin.
std::vector<CalibrationBin> calibration_report(std::span<const double> p_odor, std::span<const Label> truth,
                                               std::size_t n_bins = 10);

struct ConfidenceHistogram {
    std::vector<double> edges;  // n_bins + 1 edges over [0.5, 1]
    std::vector<std::size_t> correct;
    std::vector<std::size_t> incorrect;
    std::optional<double> mean_correct;  // empty when the group is empty
    std::optional<double> mean_incorrect;
};

/// Confidence = max class probability of each trial's fused prediction.
ConfidenceHistogram confidence_histogram(std::span<const TrialPrediction> trials, std::size_t n_bins = 10);

}  // namespace odor::eval
