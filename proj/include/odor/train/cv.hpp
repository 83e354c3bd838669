#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odor/core/checkpoint.hpp"
#include "odor/data/folds.hpp"
#include "odor/dsp/scaler.hpp"
#include "odor/eval/report.hpp"
#include "odor/nn/models.hpp"
#include "odor/train/trainer.hpp"

namespace odor::train {

struct CvConfig {
    nn::Architecture architecture = nn::Architecture::res_cnn;  // single-model runs
    bool ensemble = false;  // train both architectures per fold and fuse their probabilities
    TrainConfig train;
    Schedule ensemble_schedule = Schedule::one_cycle;  // replaces train.schedule for ensemble members
    std::size_t k = 5;
    double val_fraction = 0.10;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;  // folds trained concurrently
    Precision precision = Precision::f32;

    void validate() const;
};

/// Seeds of one model within one fold, all derived from the master seed.
struct MemberSeeds {
    std::uint64_t init = 0;
    std::uint64_t train = 0;
};
MemberSeeds member_seeds(std::uint64_t master, std::size_t fold, nn::Architecture arch);

struct FoldAudit {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
    bool test_ids_disjoint = false;     // no test id appears in train or validation
    bool scaler_from_train_only = false;  // refit on the train ids reproduces the scaler exactly
};

struct MemberOutcome {
    nn::Architecture architecture = nn::Architecture::res_cnn;
    TrainResult training;
    eval::FoldReport report;
    eval::ProbRows probs;
};

struct FoldOutcome {
    std::size_t fold = 0;
    bool complete = false;
    std::string error;
    FoldAudit audit;
    dsp::ScalerParams scaler;
    std::vector<MemberOutcome> members;
    std::optional<eval::FoldReport> ensemble;
};

struct CvReport {
    CvConfig config;
    std::size_t trials = 0;
    bool complete = false;  // every fold finished
    std::vector<FoldOutcome> folds;
    std::vector<eval::ModelSummary> summaries;  // over completed folds; the fused model last

    /// Predictions of the reported model (the ensemble when present), pooled over folds.
    std::vector<eval::TrialPrediction> pooled_predictions() const;
};

/// Stratified k-fold run on unscaled spectra. Per fold: fit the robust scaler
/// on the training portion (validation excluded), train each member with early
/// stopping on the validation portion, evaluate the best checkpoint on the
/// held-out fold and, in ensemble mode, average member probabilities.
/// A failing fold is recorded with its error; the others are kept.
CvReport run_cross_validation(std::span<const SpectralFeatures> spectra, const CvConfig& config);

/// The fold plan run_cross_validation uses for these spectra and config.
FoldPlan plan_folds(std::span<const SpectralFeatures> spectra, const CvConfig& config);

/// One fold of the cross-validation run (0-based index), errors recorded in
/// the outcome.
FoldOutcome train_fold(std::span<const SpectralFeatures> spectra, const FoldPlan& plan, std::size_t index,
                       const CvConfig& config);

std::string member_display_name(nn::Architecture arch);

/// Writes table.txt, report.json, calibration.csv, confidence_histogram.csv
/// and per fold: predictions, curves and best checkpoints.
void write_cv_outputs(const std::filesystem::path& dir, const CvReport& report);

}  // namespace odor::train
