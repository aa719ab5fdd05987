#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tabrad/dataset.hpp"
#include "tabrad/masking.hpp"

namespace tabrad {

struct FeatureRelation {
    double alpha1, beta1;  // x2 = alpha1 + beta1 * x1 + noise
    double alpha2, beta2;  // x3 = alpha2 + beta2 * x2^2 + noise
};

struct SyntheticClass {
    std::size_t count;
    double x1_low, x1_high;
    FeatureRelation relation;
};

/// Three numerical features. Subclass 0 is normal, 1 shares the normal
/// relation on a disjoint x1 interval, 2 breaks the relation near the
/// normal population.
struct SyntheticSpec {
    SyntheticClass normal{1000, -2.0, 3.0, {2.0, 3.0, 4.0, 3.0}};
    SyntheticClass type1{200, 3.3, 4.0, {2.0, 3.0, 4.0, 3.0}};
    SyntheticClass type2{200, 1.5, 2.5, {-7.5, -1.0, 4.0, 3.0}};
    double noise_std = 1.0;
};

/// x = (x1, x2, x3) given independent noise draws for x2 and x3.
std::vector<double> synthetic_row(double x1, const FeatureRelation& rel, double noise2, double noise3);

/// Rows are ordered normal, type-1, type-2. `noiseless` forces every noise
/// draw to zero.
TabularDataset generate(const SyntheticSpec& spec, std::uint64_t seed, bool noiseless = false);

struct MaskKnnConfig {
    std::size_t neighbor_count = 5;
};

/// Indices of the `k` training rows closest to `z` over its observed
/// features (Euclidean, ties toward the lower index).
std::vector<std::size_t> nearest_observed(std::span<const double> z, const MaskVector& mask,
                                          const EncodedSamples& train, std::size_t k);

/// Copy of `z` with each masked feature replaced by the mean of that feature
/// over the nearest training rows. Numerical features only.
std::vector<double> mask_knn_reconstruct(std::span<const double> z, const MaskVector& mask,
                                         const EncodedSamples& train, const MaskKnnConfig& cfg);

/// Same bank average as the model score, with squared error over masked
/// features as the per-mask loss.
std::vector<double> mask_knn_scores(const EncodedSamples& samples, const EncodedSamples& train, const MaskBank& bank,
                                    std::span<const ColumnSpec> columns, const MaskKnnConfig& cfg);

}  // namespace tabrad
