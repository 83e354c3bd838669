#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "odor/core/checkpoint.hpp"
#include "odor/data/records.hpp"
#include "odor/nn/models.hpp"
#include "odor/train/early_stop.hpp"
#include "odor/train/optim.hpp"
#include "odor/train/schedule.hpp"

namespace odor::train {

struct TrainingDiverged : Error {
    using Error::Error;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 150;
    Schedule schedule = Schedule::cosine_warm_restarts;
    AdamWConfig optimizer;
    WarmRestartConfig warm_restarts;
    OneCycleConfig one_cycle;
    EarlyStopConfig early_stop;
    std::uint64_t seed = 0;  // shuffling and dropout

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double lr = 0.0;        // at the epoch's first batch
    double train_loss = 0.0;
    double train_accuracy = 0.0;  // train mode, as seen by the optimizer
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Checkpoint best;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> curve;
    bool stopped_early = false;
};

/// Returning false from the callback ends training after that epoch.
template <typename T>
using EpochCallback = std::function<bool(const EpochRecord&, nn::Model<T>&)>;

/// Mini-batch training with scheduled AdamW and early stopping on the
/// validation loss. On return the model holds the best-validation state.
/// A trailing batch of one trial is merged into the previous batch so batch
/// statistics are always defined. Non-finite values abort with
/// TrainingDiverged naming the epoch and batch.
template <typename T>
TrainResult train_model(nn::Model<T>& model, std::span<const SpectralFeatures> train_set,
                        std::span<const SpectralFeatures> validation_set, const TrainConfig& config,
                        const EpochCallback<T>& on_epoch = {});

/// epoch,lr,train_loss,val_loss,val_acc
void write_curve_csv(const std::filesystem::path& path, std::span<const EpochRecord> curve);

}  // namespace odor::train
