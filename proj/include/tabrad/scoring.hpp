#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabrad/model.hpp"

namespace tabrad {

/// Evaluation-mode pool built from the unmasked training samples. With a cap
/// smaller than the training set, a seeded subsample is used instead.
CandidatePool build_candidate_pool(const ReconstructorModel& model, const EncodedSamples& train,
                                   std::optional<std::size_t> cap = std::nullopt, std::uint64_t seed = 0);

/// Per-sample, per-mask reconstruction losses, [n x m] row-major.
/// `pool` is required when the model uses retrieval. Samples are processed
/// in chunks so that the working set stays bounded. Throws NumericError
/// naming the sample and mask index on a non-finite loss.
std::vector<double> per_mask_losses(const ReconstructorModel& model, const EncodedSamples& samples,
                                    const MaskBank& bank, const CandidatePool* pool);

/// Mean over the bank of the per-mask loss.
std::vector<double> anomaly_scores(const ReconstructorModel& model, const EncodedSamples& samples,
                                   const MaskBank& bank, const CandidatePool* pool);

std::vector<double> average_over_masks(std::span<const double> losses, std::size_t mask_count);

struct Thresholded {
    double threshold = 0.0;       // lowest flagged score
    std::vector<int> predictions;  // 1 = anomaly
};

/// Flags exactly as many samples as there are anomalies in `labels`: the
/// highest scores, ties broken toward the lower sample index.
Thresholded threshold_and_predict(std::span<const double> scores, std::span<const int> labels);

/// Anomaly is the positive class.
double f1_score(std::span<const int> predictions, std::span<const int> labels);

/// Rank statistic with midranks for ties. Needs both classes present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of each subclass classified correctly (subclass 0 is normal).
std::map<int, double> class_share(std::span<const int> predictions, std::span<const int> labels,
                                  std::span<const int> subclass);

struct ScoreReport {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<int> subclass;
    std::vector<std::size_t> sample_ids;
    double threshold = 0.0;
    std::vector<int> predictions;
    double f1 = 0.0;
    double auroc = 0.0;
    std::map<int, double> per_class_share;
    std::size_t mask_count = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

ScoreReport evaluate(std::vector<double> scores, const EncodedSamples& samples, std::size_t mask_count,
                     std::uint64_t seed);

}  // namespace tabrad
