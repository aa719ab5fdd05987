#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tabrad/ops.hpp"

namespace tabrad {

/// bits[j] == 1 means feature j is hidden from the model.
struct MaskVector {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::size_t popcount() const;
    bool operator==(const MaskVector&) const = default;
};

enum class BankKind { Deterministic, Random };

const char* to_string(BankKind kind);
BankKind parse_bank_kind(const std::string& text);

struct MaskBank {
    std::vector<MaskVector> masks;
    BankKind kind = BankKind::Deterministic;
    std::size_t d = 0;
    std::size_t r = 0;          // deterministic only
    double p_mask = 0.0;        // random only
    std::uint64_t seed = 0;     // random only

    std::size_t size() const { return masks.size(); }
};

/// Σ_{k=1..r} C(d,k).
std::uint64_t deterministic_bank_size(std::size_t d, std::size_t r);

/// Independent Bernoulli(p_mask) bit per feature.
MaskVector sample_training_mask(std::size_t d, double p_mask, Rng& rng);

/// Every mask with 1..r bits set. Ordered by popcount, then lexicographically
/// by the sorted tuple of masked feature indices.
MaskBank build_deterministic_bank(std::size_t d, std::size_t r);

/// `count` training-style masks; all-zero draws are rejected and redrawn.
MaskBank build_random_bank(std::size_t d, std::size_t count, double p_mask, std::uint64_t seed);

/// Masks for one training batch. max(1, floor(unmasked_fraction * batch))
/// randomly chosen samples get the all-zero mask so that the retrieval
/// candidates always include fully observed samples; the rest are sampled
/// with sample_training_mask. unmasked_fraction = 0 disables forcing.
std::vector<MaskVector> sample_batch_masks(std::size_t batch, std::size_t d, double p_mask, double unmasked_fraction,
                                           Rng& rng);

/// (m ⊙ x, (1 - m) ⊙ x)
std::pair<std::vector<double>, std::vector<double>> split_by_mask(std::span<const double> x, const MaskVector& m);

}  // namespace tabrad
