#include "tabrad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "tabrad/errors.hpp"
#include "tabrad/optim.hpp"

namespace tabrad {

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (!(cfg.lookahead_alpha > 0.0 && cfg.lookahead_alpha < 1.0))
        throw ConfigError("train.lookahead_alpha must lie in (0,1)");
    if (cfg.lookahead_k < 1) throw ConfigError("train.lookahead_k must be >= 1");
    if (cfg.batch_size == 0 || cfg.batch_size < -1) throw ConfigError("train.batch_size must be -1 or positive");
    if (cfg.patience_epochs < 1) throw ConfigError("train.patience_epochs must be >= 1");
    if (cfg.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (!(cfg.unmasked_fraction >= 0.0 && cfg.unmasked_fraction < 1.0))
        throw ConfigError("train.unmasked_fraction must lie in [0,1)");
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::Patience: return "patience";
        case StopReason::MaxEpochs: return "max_epochs";
        case StopReason::NumericFailure: return "numeric_failure";
    }
    return "?";
}

bool EarlyStopping::update(std::size_t epoch, double loss) {
    if (loss < best_) {
        best_ = loss;
        best_epoch_ = epoch;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

std::vector<std::vector<double>> snapshot(const ReconstructorModel& model) {
    std::vector<std::vector<double>> out;
    for (const auto& p : model.parameters()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    return out;
}

void restore(ReconstructorModel& model, const std::vector<std::vector<double>>& values) {
    auto params = model.parameters();
    if (params.size() != values.size()) throw ContractError("snapshot does not match the model's parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].tensor.mutable_values();
        if (dst.size() != values[i].size())
            throw DimensionError("snapshot size mismatch for parameter " + params[i].name);
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

TrainReport train(ReconstructorModel& model, const EncodedSamples& train_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    validate(cfg);
    const std::size_t n = train_set.n();
    if (n == 0) throw ContractError("training set is empty");
    if (train_set.d != model.d()) throw DimensionError("training samples do not match the model's feature count");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Tensor> params;
    for (const auto& p : model.parameters()) params.push_back(p.tensor);
    LambConfig lamb{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.lamb_eps, 0.0, cfg.trust_clip};
    Lookahead opt(std::make_unique<Lamb>(params, lamb), cfg.lookahead_alpha, cfg.lookahead_k);

    Rng mask_rng = make_rng(cfg.seed, static_cast<std::uint64_t>(TrainStream::Masks));
    Rng shuffle_rng = make_rng(cfg.seed, static_cast<std::uint64_t>(TrainStream::Shuffle));
    Rng dropout_rng = make_rng(cfg.seed, static_cast<std::uint64_t>(TrainStream::Dropout));
    Rng retrieval_rng = make_rng(cfg.seed, static_cast<std::uint64_t>(TrainStream::RetrievalDropout));

    const std::size_t batch = cfg.batch_size < 0 ? n : std::min(n, static_cast<std::size_t>(cfg.batch_size));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    EarlyStopping stopper(cfg.patience_epochs);
    std::vector<std::vector<double>> best_params = snapshot(model);
    const ForwardContext ctx{true, &dropout_rng, &retrieval_rng, nullptr};

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (batch < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
        const auto start_params = snapshot(model);
        double weighted = 0.0;
        try {
            for (std::size_t b0 = 0; b0 < n; b0 += batch) {
                const std::size_t bn = std::min(batch, n - b0);
                std::span<const std::size_t> rows(order.data() + b0, bn);
                const auto masks = sample_batch_masks(bn, model.d(), model.config().p_mask, cfg.unmasked_fraction, mask_rng);
                const MaskedBatch mb = MaskedBatch::gather(train_set, rows, masks);
                zero_grads(params);
                Tensor loss = masked_loss(model.forward(mb, ctx), mb, model.columns());
                backward(loss);
                opt.step();
                weighted += loss.item() * static_cast<double>(bn);
            }
        } catch (const NumericError& e) {
            report.stop_reason = StopReason::NumericFailure;
            report.stopped_epoch = epoch;
            report.message = "epoch " + std::to_string(epoch) + ": " + e.what();
            break;
        }
        const double epoch_loss = weighted / static_cast<double>(n);
        report.epoch_losses.push_back(epoch_loss);
        report.stopped_epoch = epoch;
        if (on_epoch) on_epoch(epoch, epoch_loss);
        // The loss was measured with the parameters held at the start of the epoch.
        if (stopper.update(epoch, epoch_loss)) best_params = start_params;
        if (stopper.should_stop()) {
            report.stop_reason = StopReason::Patience;
            break;
        }
    }
    report.best_epoch = stopper.best_epoch();
    report.best_loss = stopper.best_loss();
    restore(model, best_params);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace tabrad
