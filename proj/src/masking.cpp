#include "tabrad/masking.hpp"

#include <algorithm>
#include <numeric>

#include "tabrad/errors.hpp"

namespace tabrad {

std::size_t MaskVector::popcount() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

const char* to_string(BankKind kind) { return kind == BankKind::Deterministic ? "deterministic" : "random"; }

BankKind parse_bank_kind(const std::string& text) {
    if (text == "deterministic") return BankKind::Deterministic;
    if (text == "random") return BankKind::Random;
    throw ConfigError("bank must be 'deterministic' or 'random', got '" + text + "'");
}

std::uint64_t deterministic_bank_size(std::size_t d, std::size_t r) {
    std::uint64_t total = 0, c = 1;
    for (std::size_t k = 1; k <= r && k <= d; ++k) {
        c = c * (d - k + 1) / k;  // C(d,k) from C(d,k-1); exact at every step
        total += c;
    }
    return total;
}

MaskVector sample_training_mask(std::size_t d, double p_mask, Rng& rng) {
    if (!(p_mask > 0.0 && p_mask < 1.0)) throw ContractError("p_mask must lie in (0,1)");
    std::bernoulli_distribution bit(p_mask);
    MaskVector m;
    m.bits.resize(d);
    for (auto& b : m.bits) b = bit(rng) ? 1 : 0;
    return m;
}

MaskBank build_deterministic_bank(std::size_t d, std::size_t r) {
    if (d == 0 || r < 1 || r > d)
        throw ContractError("deterministic bank needs 1 <= r <= d, got r=" + std::to_string(r) + " d=" + std::to_string(d));
    MaskBank bank;
    bank.kind = BankKind::Deterministic;
    bank.d = d;
    bank.r = r;
    bank.masks.reserve(deterministic_bank_size(d, r));
    for (std::size_t k = 1; k <= r; ++k) {
        std::vector<std::size_t> idx(k);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            MaskVector m;
            m.bits.assign(d, 0);
            for (auto i : idx) m.bits[i] = 1;
            bank.masks.push_back(std::move(m));
            // Advance to the next k-combination in lexicographic order.
            std::size_t pos = k;
            while (pos > 0 && idx[pos - 1] == d - k + pos - 1) --pos;
            if (pos == 0) break;
            ++idx[pos - 1];
            for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
        }
    }
    return bank;
}

MaskBank build_random_bank(std::size_t d, std::size_t count, double p_mask, std::uint64_t seed) {
    if (count < 1) throw ContractError("random bank needs count >= 1");
    if (d == 0) throw ContractError("random bank needs d >= 1");
    MaskBank bank;
    bank.kind = BankKind::Random;
    bank.d = d;
    bank.p_mask = p_mask;
    bank.seed = seed;
    Rng rng(seed);
    while (bank.masks.size() < count) {
        auto m = sample_training_mask(d, p_mask, rng);
        if (m.popcount() > 0) bank.masks.push_back(std::move(m));
    }
    return bank;
}

std::vector<MaskVector> sample_batch_masks(std::size_t batch, std::size_t d, double p_mask, double unmasked_fraction,
                                           Rng& rng) {
    if (unmasked_fraction < 0.0 || unmasked_fraction > 1.0) throw ContractError("unmasked_fraction must lie in [0,1]");
    std::vector<MaskVector> masks;
    masks.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) masks.push_back(sample_training_mask(d, p_mask, rng));
    if (unmasked_fraction > 0.0 && batch > 0) {
        const auto forced = std::max<std::size_t>(1, static_cast<std::size_t>(unmasked_fraction * static_cast<double>(batch)));
        std::vector<std::size_t> order(batch);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < std::min(forced, batch); ++i) std::fill(masks[order[i]].bits.begin(), masks[order[i]].bits.end(), 0);
    }
    return masks;
}

std::pair<std::vector<double>, std::vector<double>> split_by_mask(std::span<const double> x, const MaskVector& m) {
    if (x.size() != m.size()) throw DimensionError("mask length differs from sample length");
    std::vector<double> hidden(x.size()), observed(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        hidden[j] = m.bits[j] * x[j];
        observed[j] = (1 - m.bits[j]) * x[j];
    }
    return {hidden, observed};
}

}  // namespace tabrad
