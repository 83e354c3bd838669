#pragma once

#include <cstddef>
#include <limits>

namespace odor::train {

struct EarlyStopConfig {
    std::size_t patience = 15;
    double min_delta = 0.001;
};

enum class StopDecision { improved, wait, stop };

/// Improvement means val_loss < best - min_delta. The caller keeps the model
/// state whenever update() returns improved.
class EarlyStopping {
public:
    explicit EarlyStopping(EarlyStopConfig config = {});

    StopDecision update(double val_loss);

    double best_loss() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }  // 1-based; 0 before any update
    std::size_t epochs_since_improvement() const { return since_; }
    std::size_t epochs_seen() const { return seen_; }

private:
    EarlyStopConfig config_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t since_ = 0;
    std::size_t seen_ = 0;
};

}  // namespace odor::train
