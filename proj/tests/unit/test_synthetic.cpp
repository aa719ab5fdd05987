#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tabrad/errors.hpp"
#include "tabrad/synthetic.hpp"

using namespace tabrad;

namespace {

// Sort every row by (distance over observed features, index), take the
// first k, average the masked features.
std::vector<double> brute_force_impute(std::span<const double> z, const MaskVector& mask, const EncodedSamples& train,
                                       std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < train.n(); ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < z.size(); ++j)
            if (!mask.bits[j]) acc += (z[j] - train.row(i)[j]) * (z[j] - train.row(i)[j]);
        dist.emplace_back(std::sqrt(acc), i);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<double> out(z.begin(), z.end());
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (!mask.bits[j]) continue;
        double acc = 0;
        for (std::size_t t = 0; t < k; ++t) acc += train.row(dist[t].second)[j];
        out[j] = acc / static_cast<double>(k);
    }
    return out;
}

EncodedSamples samples_of(std::size_t d, std::vector<double> values) {
    EncodedSamples s;
    s.d = d;
    s.values = std::move(values);
    s.labels.assign(s.n(), 0);
    s.subclass.assign(s.n(), 0);
    s.source_rows.resize(s.n());
    std::iota(s.source_rows.begin(), s.source_rows.end(), 0);
    return s;
}

}  // namespace

TEST_SUITE("synthetic-bench") {

TEST_CASE("generated sizes and ranges") {
    const auto ds = generate(SyntheticSpec{}, 0);
    REQUIRE(ds.n() == 1400);
    CHECK(ds.d() == 3);
    double max_normal = -1e9, min_type1 = 1e9;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double x1 = ds.rows[i][0];
        switch (ds.subclass[i]) {
            case 0:
                CHECK((x1 >= -2.0 && x1 <= 3.0));
                max_normal = std::max(max_normal, x1);
                break;
            case 1:
                CHECK((x1 >= 3.3 && x1 <= 4.0));
                min_type1 = std::min(min_type1, x1);
                break;
            default:
                CHECK((x1 >= 1.5 && x1 <= 2.5));
        }
        CHECK(ds.labels[i] == (ds.subclass[i] != 0 ? 1 : 0));
    }
    CHECK(min_type1 > max_normal);
    CHECK(std::count(ds.subclass.begin(), ds.subclass.end(), 1) == 200);
    CHECK(std::count(ds.subclass.begin(), ds.subclass.end(), 2) == 200);
}

TEST_CASE("noiseless rows follow the relations") {
    const SyntheticSpec spec;
    CHECK(synthetic_row(1.0, spec.normal.relation, 0, 0) == std::vector<double>{1, 5, 79});
    CHECK(synthetic_row(2.0, spec.type2.relation, 0, 0) == std::vector<double>{2, -9.5, 274.75});

    const auto ds = generate(spec, 3, true);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& rel = ds.subclass[i] == 2 ? spec.type2.relation : spec.normal.relation;
        const auto& r = ds.rows[i];
        CHECK(r[1] == rel.alpha1 + rel.beta1 * r[0]);
        CHECK(r[2] == rel.alpha2 + rel.beta2 * r[1] * r[1]);
    }
}

TEST_CASE("generation is seeded") {
    CHECK(generate(SyntheticSpec{}, 4).rows == generate(SyntheticSpec{}, 4).rows);
    CHECK(generate(SyntheticSpec{}, 4).rows != generate(SyntheticSpec{}, 5).rows);
}

TEST_CASE("noise has unit scale") {
    const SyntheticSpec spec;
    const auto ds = generate(spec, 6);
    double acc = 0, acc2 = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.subclass[i] != 0) continue;
        const double e = ds.rows[i][1] - (2.0 + 3.0 * ds.rows[i][0]);
        acc += e;
        acc2 += e * e;
        ++n;
    }
    const double mean = acc / static_cast<double>(n);
    CHECK(std::abs(mean) < 0.15);
    CHECK(std::abs(std::sqrt(acc2 / static_cast<double>(n) - mean * mean) - 1.0) < 0.1);
}

TEST_CASE("duplicated training rows are reproduced") {
    std::vector<double> v;
    for (int i = 0; i < 5; ++i) v.insert(v.end(), {0.5, -1.0, 2.0});
    for (int i = 0; i < 20; ++i) v.insert(v.end(), {5.0 + i, 7.0, -3.0});
    const auto train = samples_of(3, v);
    const std::vector<double> z{0.5, -1.0, 2.0};
    for (const auto& m : build_deterministic_bank(3, 2).masks)
        CHECK(mask_knn_reconstruct(z, m, train, MaskKnnConfig{}) == z);
}

TEST_CASE("one observed feature picks the five closest values") {
    // Column 0 observed, column 1 masked and equal to 10x column 0.
    const auto train = samples_of(2, {0, 0, 1, 10, 2, 20, 3, 30, 4, 40, 100, 1000});
    const MaskVector m{{0, 1}};
    const std::vector<double> z{1.5, 0.0};
    auto near = nearest_observed(z, m, train, 5);
    std::sort(near.begin(), near.end());
    CHECK(near == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(mask_knn_reconstruct(z, m, train, MaskKnnConfig{})[1] == 20.0);
}

TEST_CASE("mask-KNN contract errors") {
    const auto train = samples_of(2, {0, 0, 1, 1});
    const std::vector<double> z{0, 0};
    CHECK_THROWS_AS(mask_knn_reconstruct(z, MaskVector{{1, 1}}, train, MaskKnnConfig{}), ContractError);
    CHECK_THROWS(mask_knn_reconstruct(z, MaskVector{{1, 0}}, train, MaskKnnConfig{5}));
}

TEST_CASE("mask-KNN equals brute-force imputation") {
    const auto sp = split(generate(SyntheticSpec{}, 7), 7);
    const auto bank = build_deterministic_bank(3, 2);
    for (std::size_t i = 0; i < 200; ++i) {
        const auto z = sp.validation.row(i * 4);
        for (const auto& m : bank.masks)
            CHECK(mask_knn_reconstruct(z, m, sp.train, MaskKnnConfig{}) == brute_force_impute(z, m, sp.train, 5));
    }
}

TEST_CASE("mask-KNN scores follow the bank average") {
    const auto sp = split(generate(SyntheticSpec{}, 8), 8);
    const auto bank = build_deterministic_bank(3, 1);
    const auto scores = mask_knn_scores(sp.validation, sp.train, bank, sp.columns, MaskKnnConfig{});
    for (std::size_t i = 0; i < 50; ++i) {
        const auto z = sp.validation.row(i);
        double acc = 0;
        for (const auto& m : bank.masks) {
            const auto rec = brute_force_impute(z, m, sp.train, 5);
            for (std::size_t j = 0; j < 3; ++j)
                if (m.bits[j]) acc += (rec[j] - z[j]) * (rec[j] - z[j]);
        }
        CHECK(scores[i] == doctest::Approx(acc / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("in-distribution sample scores below a far type-1 sample") {
    const SyntheticSpec spec;
    const auto sp = split(generate(spec, 9), 9);
    std::size_t deep = 0, far = 0;
    double best_mid = 1e9, best_far = -1e9;
    for (std::size_t i = 0; i < sp.validation.n(); ++i) {
        // Raw x1 recovered from the standardized column.
        const double x1 = sp.validation.row(i)[0] * sp.columns[0].train_std + sp.columns[0].train_mean;
        if (sp.validation.subclass[i] == 0 && std::abs(x1 - 0.5) < best_mid) best_mid = std::abs(x1 - 0.5), deep = i;
        if (sp.validation.subclass[i] == 1 && x1 > best_far) best_far = x1, far = i;
    }
    const auto scores =
        mask_knn_scores(sp.validation, sp.train, build_deterministic_bank(3, 1), sp.columns, MaskKnnConfig{});
    CHECK(scores[deep] < scores[far]);
}

}  // TEST_SUITE
