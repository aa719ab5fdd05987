#include "tabrad/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "tabrad/errors.hpp"
#include "tabrad/ops.hpp"

namespace tabrad {

std::vector<double> synthetic_row(double x1, const FeatureRelation& rel, double noise2, double noise3) {
    const double x2 = rel.alpha1 + rel.beta1 * x1 + noise2;
    const double x3 = rel.alpha2 + rel.beta2 * x2 * x2 + noise3;
    return {x1, x2, x3};
}

TabularDataset generate(const SyntheticSpec& spec, std::uint64_t seed, bool noiseless) {
    TabularDataset ds;
    for (const char* name : {"x1", "x2", "x3"}) {
        ColumnSpec c;
        c.name = name;
        ds.columns.push_back(c);
    }
    Rng rng = make_rng(seed, 30);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    int cls = 0;
    for (const auto* group : {&spec.normal, &spec.type1, &spec.type2}) {
        std::uniform_real_distribution<double> x1(group->x1_low, group->x1_high);
        for (std::size_t i = 0; i < group->count; ++i) {
            const double a = x1(rng);
            const double e2 = noiseless ? 0.0 : noise(rng);
            const double e3 = noiseless ? 0.0 : noise(rng);
            ds.rows.push_back(synthetic_row(a, group->relation, e2, e3));
            ds.labels.push_back(cls == 0 ? 0 : 1);
            ds.subclass.push_back(cls);
        }
        ++cls;
    }
    return ds;
}

std::vector<std::size_t> nearest_observed(std::span<const double> z, const MaskVector& mask,
                                          const EncodedSamples& train, std::size_t k) {
    if (z.size() != train.d || mask.size() != train.d) throw DimensionError("query, mask and training rows disagree on d");
    if (mask.popcount() == train.d) throw ContractError("every feature is masked; neighbor distance is undefined");
    if (k == 0 || k > train.n()) throw ContractError("neighbor count must lie in [1, training size]");
    std::vector<std::pair<double, std::size_t>> dist(train.n());
    for (std::size_t r = 0; r < train.n(); ++r) {
        const auto x = train.row(r);
        double acc = 0.0;
        for (std::size_t j = 0; j < train.d; ++j)
            if (!mask.bits[j]) acc += (z[j] - x[j]) * (z[j] - x[j]);
        dist[r] = {acc, r};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
}

std::vector<double> mask_knn_reconstruct(std::span<const double> z, const MaskVector& mask,
                                         const EncodedSamples& train, const MaskKnnConfig& cfg) {
    const auto nn = nearest_observed(z, mask, train, cfg.neighbor_count);
    std::vector<double> out(z.begin(), z.end());
    for (std::size_t j = 0; j < train.d; ++j) {
        if (!mask.bits[j]) continue;
        double acc = 0.0;
        for (auto r : nn) acc += train.row(r)[j];
        out[j] = acc / static_cast<double>(nn.size());
    }
    return out;
}

std::vector<double> mask_knn_scores(const EncodedSamples& samples, const EncodedSamples& train, const MaskBank& bank,
                                    std::span<const ColumnSpec> columns, const MaskKnnConfig& cfg) {
    for (const auto& c : columns)
        if (c.kind != ColumnKind::Numerical) throw ContractError("Mask-KNN supports numerical features only");
    if (bank.size() == 0) throw ContractError("mask bank is empty");
    std::vector<double> scores(samples.n());
    for (std::size_t i = 0; i < samples.n(); ++i) {
        const auto z = samples.row(i);
        double total = 0.0;
        for (const auto& m : bank.masks) {
            const auto rec = mask_knn_reconstruct(z, m, train, cfg);
            for (std::size_t j = 0; j < z.size(); ++j)
                if (m.bits[j]) total += (rec[j] - z[j]) * (rec[j] - z[j]);
        }
        scores[i] = total / static_cast<double>(bank.size());
    }
    return scores;
}

}  // namespace tabrad
