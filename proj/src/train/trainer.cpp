#include "odor/train/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "odor/core/seed.hpp"
#include "odor/nn/inference.hpp"

namespace odor::train {

void TrainConfig::validate() const {
    if (batch_size < 2) throw InvalidArgument("train.batch_size must be >= 2 (batch statistics)");
    if (max_epochs == 0) throw InvalidArgument("train.max_epochs must be positive");
    optimizer.validate();
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t begin = 0; begin < n; begin += batch_size)
        batches.emplace_back(order.begin() + begin, order.begin() + std::min(n, begin + batch_size));
    if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back()[0]);
        batches.pop_back();
    }
    return batches;
}

template <typename T>
constexpr Precision precision_of() {
    return sizeof(T) == 4 ? Precision::f32 : Precision::f64;
}

}  // namespace

template <typename T>
TrainResult train_model(nn::Model<T>& model, std::span<const SpectralFeatures> train_set,
                        std::span<const SpectralFeatures> validation_set, const TrainConfig& config,
                        const EpochCallback<T>& on_epoch) {
    config.validate();
    if (train_set.size() < 2) throw InvalidArgument("train_model: need at least two training trials");
    if (validation_set.empty()) throw InvalidArgument("train_model: validation set is empty");

    AdamW<T> optimizer(model.parameters(), config.optimizer);
    EarlyStopping stopper(config.early_stop);
    WarmRestartConfig warm = config.warm_restarts;
    OneCycleConfig cycle = config.one_cycle;
    warm.lr_max = cycle.lr_max = config.optimizer.lr;

    std::mt19937_64 dropout_rng(derive_seed(config.seed, "dropout"));
    const std::size_t n = train_set.size();
    std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    if (batches_per_epoch > 1 && n % config.batch_size == 1) --batches_per_epoch;
    const std::size_t total_steps = batches_per_epoch * config.max_epochs;

    TrainResult result;
    result.best = nn::to_checkpoint(model, precision_of<T>());
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
        const auto batches = make_batches(train_set.size(), config.batch_size, shuffle_rng);

        EpochRecord record;
        record.epoch = epoch + 1;
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const double lr = config.schedule == Schedule::one_cycle
                                  ? lr_one_cycle(epoch * batches_per_epoch + b, total_steps, cycle)
                                  : lr_cosine_warm_restarts(static_cast<double>(epoch) +
                                                                static_cast<double>(b) / batches.size(),
                                                            warm);
            if (b == 0) record.lr = lr;
            const auto labels = nn::batch_labels(train_set, batches[b]);
            try {
                optimizer.zero_grad();
                Tape<T> tape;
                nn::ForwardContext ctx{nn::Mode::train, &dropout_rng};
                const auto out = model.forward(nn::make_batch<T>(train_set, batches[b]), ctx);
                const auto loss = cross_entropy(out.logits, std::span<const int>(labels));
                tape.backward(loss);
                if (optimizer.step(lr) != StepStatus::applied) throw NonFiniteError("non-finite gradient");
                loss_sum += static_cast<double>(loss.item()) * static_cast<double>(labels.size());
                const auto logits = out.logits.data();
                for (std::size_t r = 0; r < labels.size(); ++r)
                    correct += static_cast<int>(logits[2 * r + 1] > logits[2 * r]) == labels[r] ? 1 : 0;
            } catch (const NonFiniteError& e) {
                throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                                       std::to_string(b + 1) + ": " + e.what());
            }
        }
        record.train_loss = loss_sum / static_cast<double>(train_set.size());
        record.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());

        const auto val = nn::predict(model, validation_set, std::max<std::size_t>(config.batch_size, 64));
        record.val_loss = val.mean_loss;
        record.val_accuracy = val.accuracy;
        result.curve.push_back(record);

        const StopDecision decision = stopper.update(record.val_loss);
        if (decision == StopDecision::improved) result.best = nn::to_checkpoint(model, precision_of<T>());
        const bool keep_going = !on_epoch || on_epoch(record, model);
        if (decision == StopDecision::stop) {
            result.stopped_early = true;
            break;
        }
        if (!keep_going) break;
    }
    result.best_epoch = stopper.best_epoch();
    result.best_val_loss = stopper.best_loss();
    nn::load_state(model, result.best);
    return result;
}

void write_curve_csv(const std::filesystem::path& path, std::span<const EpochRecord> curve) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out.precision(10);
    out << "epoch,lr,train_loss,val_loss,val_acc\n";
    for (const auto& r : curve)
        out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_accuracy << '\n';
}

template TrainResult train_model<float>(nn::Model<float>&, std::span<const SpectralFeatures>,
                                        std::span<const SpectralFeatures>, const TrainConfig&,
                                        const EpochCallback<float>&);
template TrainResult train_model<double>(nn::Model<double>&, std::span<const SpectralFeatures>,
                                         std::span<const SpectralFeatures>, const TrainConfig&,
                                         const EpochCallback<double>&);

}  // namespace odor::train
