#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tabrad/model.hpp"

namespace tabrad {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lamb_eps = 1e-6;
    double trust_clip = 10.0;
    double lookahead_alpha = 0.5;
    std::size_t lookahead_k = 6;
    long batch_size = -1;  // -1: the whole training set
    std::size_t patience_epochs = 100;
    std::size_t max_epochs = 10000;
    std::uint64_t seed = 0;
    double unmasked_fraction = 0.1;
};

void validate(const TrainConfig& cfg);

enum class StopReason { Patience, MaxEpochs, NumericFailure };
const char* to_string(StopReason reason);

struct TrainReport {
    std::vector<double> epoch_losses;
    std::size_t stopped_epoch = 0;  // 1-based; number of completed epochs
    std::size_t best_epoch = 0;     // 1-based
    double best_loss = std::numeric_limits<double>::infinity();
    StopReason stop_reason = StopReason::MaxEpochs;
    double wall_seconds = 0.0;
    std::string message;
};

/// Best-so-far patience counter. Strict improvement only.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
    /// Records the loss of `epoch` and returns true when it is a new best.
    bool update(std::size_t epoch, double loss);
    bool should_stop() const { return since_best_ >= patience_; }
    double best_loss() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }

private:
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
};

/// Generator streams derived from TrainConfig::seed.
enum class TrainStream : std::uint64_t { Masks = 10, Shuffle = 11, Dropout = 12, RetrievalDropout = 13 };

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Trains on normal samples only. Each batch is its own candidate set. On
/// return the model holds the parameters that produced the best epoch loss.
/// A numeric failure stops training and is reported, not thrown.
TrainReport train(ReconstructorModel& model, const EncodedSamples& train_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Parameter values in ReconstructorModel::parameters() order.
std::vector<std::vector<double>> snapshot(const ReconstructorModel& model);
void restore(ReconstructorModel& model, const std::vector<std::vector<double>>& values);

}  // namespace tabrad
