#include "odor/train/early_stop.hpp"

#include <cmath>

#include "odor/core/errors.hpp"

namespace odor::train {

EarlyStopping::EarlyStopping(EarlyStopConfig config) : config_(config) {
    if (config_.patience == 0) throw InvalidArgument("early stopping: patience must be positive");
    if (!(config_.min_delta >= 0.0)) throw InvalidArgument("early stopping: min_delta must be >= 0");
}

StopDecision EarlyStopping::update(double val_loss) {
    if (!std::isfinite(val_loss)) throw NonFiniteError("early stopping: validation loss is not finite");
    ++seen_;
    if (val_loss < best_ - config_.min_delta) {
        best_ = val_loss;
        best_epoch_ = seen_;
        since_ = 0;
        return StopDecision::improved;
    }
    ++since_;
    return since_ >= config_.patience ? StopDecision::stop : StopDecision::wait;
}

}  // namespace odor::train
