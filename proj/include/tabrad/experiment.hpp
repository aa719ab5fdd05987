#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tabrad/config.hpp"
#include "tabrad/scoring.hpp"

namespace tabrad {

/// The synthetic dataset is regenerated from the seed; a CSV is read as is.
TabularDataset load_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

/// Bank for `d` features under the config; random-bank defaults are filled
/// from the deterministic size, model.p_mask and `seed`.
MaskBank make_bank(const ExperimentConfig& cfg, std::size_t d, std::uint64_t seed);

struct FittedModel {
    SplitDataset split;
    std::unique_ptr<ReconstructorModel> model;
    TrainReport report;
};

/// Splits with `seed`, builds the model with init seed `seed` and trains it.
FittedModel fit(const ExperimentConfig& cfg, const TabularDataset& data, std::uint64_t seed);

/// Scores the validation split with the given bank.
ScoreReport score_validation(const ExperimentConfig& cfg, const ReconstructorModel& model, const SplitDataset& split,
                             const MaskBank& bank, std::uint64_t seed);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::optional<TrainReport> train;
    ScoreReport score;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over seeds
};

MeanStd mean_std(const std::vector<double>& xs);

struct Aggregate {
    std::size_t n = 0;       // surviving seeds
    std::size_t failed = 0;  // seeds that hit a numeric failure
    MeanStd f1, auroc;
    std::map<int, MeanStd> share;
    std::vector<std::string> warnings;
};

Aggregate aggregate(const std::vector<SeedResult>& seeds);

struct RunResult {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<SeedResult> seeds;
    Aggregate aggregate;
};

/// Train and score one seed. Numeric failures are captured in the result.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Every seed in order, then the aggregate over surviving seeds.
RunResult run(const ExperimentConfig& cfg);

enum class SweepAxis { K, Lambda, Location, BankKind };
SweepAxis parse_sweep_axis(const std::string& text);
const char* to_string(SweepAxis axis);

struct SweepRow {
    std::string value;
    bool not_applicable = false;
    std::string note;
    std::vector<std::string> changed_keys;  // relative to the base config
    Aggregate aggregate;
};

struct SweepResult {
    ExperimentConfig base;
    std::string base_hash;
    SweepAxis axis = SweepAxis::K;
    std::vector<SweepRow> rows;
};

/// Location values are "retrieval_location/agg_location" pairs. Rows with
/// k larger than the training-set size are N/A. For the bank-kind axis the
/// model is trained once per seed and scored with each bank.
SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values);

/// Keys an axis is allowed to change.
std::vector<std::string> axis_keys(SweepAxis axis);

struct MethodShares {
    std::string method;
    std::vector<std::map<int, double>> per_seed;
    std::vector<double> f1;
    std::vector<double> auroc;
    std::map<int, MeanStd> share;
};

struct ComparisonResult {
    SyntheticSpec spec;
    std::vector<std::uint64_t> seeds;
    std::vector<MethodShares> methods;  // mask_knn, transformer, +att-bsim
    /// Deterministic vs random bank F1 for the retrieval model, per seed.
    std::vector<double> deterministic_bank_f1;
    std::vector<double> random_bank_f1;
    double wall_seconds = 0.0;
};

/// Mask-KNN, the vanilla transformer and the attention-bsim model on the
/// synthetic dataset, one split per seed, bank d=3 r=1.
ComparisonResult run_comparison(const ExperimentConfig& preset, const std::vector<std::uint64_t>& seeds);

}  // namespace tabrad
