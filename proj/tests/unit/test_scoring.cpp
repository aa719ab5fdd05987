#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tabrad/errors.hpp"
#include "tabrad/scoring.hpp"
#include "tabrad/synthetic.hpp"

using namespace tabrad;

namespace {

// Trapezoidal area under the ROC curve from every distinct cut point.
double brute_force_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::set<double> cuts(scores.begin(), scores.end());
    double pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg) += 1;
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= *it) (labels[i] ? tp : fp) += 1;
        pts.emplace_back(fp / neg, tp / pos);
    }
    double area = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2;
    return area;
}

MaskBank bank_of(std::size_t d, std::vector<MaskVector> masks) {
    MaskBank b;
    b.d = d;
    b.masks = std::move(masks);
    return b;
}

// Unbatched reference: one forward per (sample, mask), averaged in a plain loop.
std::vector<double> one_at_a_time(const ReconstructorModel& model, const EncodedSamples& samples,
                                  const MaskBank& bank, const CandidatePool* pool) {
    NoGradGuard guard;
    ForwardContext ctx;
    ctx.pool = pool;
    std::vector<double> out;
    for (std::size_t i = 0; i < samples.n(); ++i) {
        double acc = 0;
        for (const auto& m : bank.masks) {
            const std::size_t row[] = {i};
            const MaskVector one[] = {m};
            const auto batch = MaskedBatch::gather(samples, row, one);
            acc += masked_reconstruction_loss(model.forward(batch, ctx), batch, model.columns()).item();
        }
        out.push_back(acc / static_cast<double>(bank.size()));
    }
    return out;
}

EncodedSamples head(const EncodedSamples& s, std::size_t n) {
    EncodedSamples out = s;
    out.values.resize(n * s.d);
    out.labels.resize(n);
    out.subclass.resize(n);
    out.source_rows.resize(n);
    return out;
}

std::vector<ColumnSpec> numeric_columns(std::size_t d) {
    std::vector<ColumnSpec> cols(d);
    for (std::size_t j = 0; j < d; ++j) cols[j].name = "c" + std::to_string(j);
    return cols;
}

}  // namespace

TEST_SUITE("scoring-eval") {

TEST_CASE("score is the mean of per-mask losses") {
    const std::vector<double> losses{0.2, 0.4};
    CHECK(average_over_masks(losses, 2)[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(average_over_masks(losses, 3), DimensionError);
}

TEST_CASE("exact reconstruction scores zero") {
    const auto cols = numeric_columns(2);
    MaskedBatch batch;
    batch.n = 2;
    batch.d = 2;
    batch.values = {0.5, -1.0, 2.0, 3.0};
    batch.masks = {1, 0, 1, 1};
    const std::vector<Tensor> outputs{Tensor::from({2, 1}, {0.5, 2.0}), Tensor::from({2, 1}, {-1.0, 3.0})};
    const auto loss = masked_reconstruction_loss(outputs, batch, cols);
    CHECK(oracle::to_vec(loss) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("batched scoring matches the unbatched loop") {
    const auto sp = split(generate(SyntheticSpec{}, 5), 5);
    const auto val = head(sp.validation, 40);
    const auto bank = build_deterministic_bank(3, 2);
    ModelConfig mc;
    mc.init_seed = 5;
    for (auto kind : {RetrievalKind::None, RetrievalKind::Knn, RetrievalKind::VAttention,
                      RetrievalKind::AttentionBsim, RetrievalKind::AttentionBsimBval}) {
        RetrievalConfig rc;
        rc.kind = kind;
        ReconstructorModel model(sp.columns, mc, rc);
        std::optional<CandidatePool> pool;
        if (kind != RetrievalKind::None) pool = build_candidate_pool(model, sp.train, 64, 5);
        const auto batched = anomaly_scores(model, val, bank, pool ? &*pool : nullptr);
        const auto looped = one_at_a_time(model, val, bank, pool ? &*pool : nullptr);
        CHECK_MESSAGE(oracle::max_rel_error(batched, looped) < 1e-10, to_string(kind));
    }
}

TEST_CASE("mixed column types score through the same path") {
    std::ostringstream csv;
    csv << "colour,size,label\n";
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int i = 0; i < 60; ++i) csv << (i % 3 == 0 ? "red" : i % 3 == 1 ? "blue" : "green") << ',' << z(rng) << ",0\n";
    csv << "red,9,1\nblue,-8,1\n";
    const auto sp = split(parse_csv(csv.str()), 3);
    ModelConfig mc;
    ReconstructorModel model(sp.columns, mc);
    const auto bank = build_deterministic_bank(2, 1);
    const auto batched = anomaly_scores(model, sp.validation, bank, nullptr);
    const auto looped = one_at_a_time(model, sp.validation, bank, nullptr);
    CHECK(oracle::max_rel_error(batched, looped) < 1e-10);
    for (double s : batched) CHECK(std::isfinite(s));
}

TEST_CASE("scores ignore the order of masks in the bank") {
    const auto sp = split(generate(SyntheticSpec{}, 6), 6);
    const auto val = head(sp.validation, 50);
    ModelConfig mc;
    mc.init_seed = 6;
    RetrievalConfig rc;
    rc.kind = RetrievalKind::AttentionBsim;
    ReconstructorModel model(sp.columns, mc, rc);
    const auto pool = build_candidate_pool(model, sp.train, 50, 6);
    auto bank = build_deterministic_bank(3, 2);
    const auto base = anomaly_scores(model, val, bank, &pool);
    std::mt19937_64 rng(6);
    for (int t = 0; t < 5; ++t) {
        std::shuffle(bank.masks.begin(), bank.masks.end(), rng);
        CHECK(anomaly_scores(model, val, bank, &pool) == base);
    }
}

TEST_CASE("training samples score finitely under the identity-capable bank") {
    const auto sp = split(generate(SyntheticSpec{}, 7), 7);
    ModelConfig mc;
    ReconstructorModel model(sp.columns, mc);
    const auto scores = anomaly_scores(model, head(sp.train, 100), build_deterministic_bank(3, 3), nullptr);
    for (double s : scores) CHECK(std::isfinite(s));
}

TEST_CASE("scoring contract errors") {
    const auto sp = split(generate(SyntheticSpec{}, 8), 8);
    RetrievalConfig rc;
    rc.kind = RetrievalKind::Knn;
    ReconstructorModel model(sp.columns, ModelConfig{}, rc);
    CHECK_THROWS_AS(anomaly_scores(model, sp.validation, build_deterministic_bank(3, 1), nullptr), ContractError);
    CHECK_THROWS_AS(anomaly_scores(model, sp.validation, MaskBank{}, nullptr), ContractError);
}

TEST_CASE("threshold examples") {
    SUBCASE("top scores are flagged") {
        const std::vector<double> s{1, 2, 3, 4};
        const std::vector<int> l{0, 1, 0, 1};
        const auto t = threshold_and_predict(s, l);
        CHECK(t.predictions == std::vector<int>{0, 0, 1, 1});
        CHECK(t.threshold == 3.0);
    }
    SUBCASE("ties go to the lower index") {
        const std::vector<double> s(5, 0.7);
        const std::vector<int> l{0, 0, 0, 1, 0};
        CHECK(threshold_and_predict(s, l).predictions == std::vector<int>{1, 0, 0, 0, 0});
    }
    SUBCASE("perfect separation gives F1 of one") {
        const std::vector<double> s{0.1, 5, 0.2, 6, 0.3};
        const std::vector<int> l{0, 1, 0, 1, 0};
        CHECK(f1_score(threshold_and_predict(s, l).predictions, l) == 1.0);
    }
    SUBCASE("no anomalies is an error") {
        const std::vector<double> s{1, 2};
        const std::vector<int> l{0, 0};
        CHECK_THROWS_AS(threshold_and_predict(s, l), MetricError);
    }
}

TEST_CASE("threshold rule flags exactly as many samples as there are anomalies") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> coarse(0, 4);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng() % 30;
        std::vector<double> s(n);
        std::vector<int> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse(rng);  // heavy ties
            l[i] = static_cast<int>(rng() % 3 == 0);
        }
        l[rng() % n] = 1;
        const auto p = threshold_and_predict(s, l).predictions;
        CHECK(std::count(p.begin(), p.end(), 1) == std::count(l.begin(), l.end(), 1));
    }
}

TEST_CASE("metric examples") {
    const std::vector<int> l{0, 1, 1, 0, 1};
    CHECK(f1_score(l, l) == 1.0);
    const std::vector<double> perfect{0, 1, 1, 0, 1};
    CHECK(auroc(perfect, l) == 1.0);
    const std::vector<double> flat(5, 3.0);
    CHECK(auroc(flat, l) == 0.5);
    // 1 TP, 1 FP, 2 FN -> 2/(2+1+2)
    CHECK(f1_score(std::vector<int>{1, 1, 0, 0, 0}, l) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(f1_score(std::vector<int>{1, 0, 0, 1, 0}, l) == 0.0);
    CHECK_THROWS_AS(auroc(flat, std::vector<int>(5, 0)), MetricError);
}

TEST_CASE("AUROC matches exhaustive threshold enumeration") {
    const std::vector<double> s{0.9, 0.4, 0.4, 0.7, 0.1, 0.7};
    const std::vector<int> l{1, 0, 1, 0, 0, 1};
    // Pairs (pos, neg): 0.9 beats all 3; 0.4 ties 0.4, beats 0.1; 0.7 ties 0.7, beats 0.4 and 0.1.
    CHECK(auroc(s, l) == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
    CHECK(std::abs(brute_force_auroc(s, l) - 7.0 / 9.0) < 1e-15);

    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> coarse(0, 5);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> rs(6);
        std::vector<int> rl(6);
        for (int i = 0; i < 6; ++i) {
            rs[i] = coarse(rng);
            rl[i] = static_cast<int>(rng() % 2);
        }
        rl[0] = 0;
        rl[1] = 1;
        CHECK(std::abs(auroc(rs, rl) - brute_force_auroc(rs, rl)) < 1e-12);
    }
}

TEST_CASE("AUROC is invariant to increasing transforms") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        auto s = oracle::random_values(40, rng, -3, 3);
        s[3] = s[4];
        std::vector<int> l(40);
        for (auto& v : l) v = static_cast<int>(rng() % 4 == 0);
        l[0] = 1;
        l[1] = 0;
        std::vector<double> ex(40), af(40);
        std::transform(s.begin(), s.end(), ex.begin(), [](double v) { return std::exp(v); });
        std::transform(s.begin(), s.end(), af.begin(), [](double v) { return 2.5 * v - 7.0; });
        const double base = auroc(s, l);
        CHECK(std::abs(auroc(ex, l) - base) <= 1e-12);
        CHECK(std::abs(auroc(af, l) - base) <= 1e-12);
    }
}

TEST_CASE("class share examples") {
    const std::vector<int> labels{0, 0, 1, 1, 1, 1};
    const std::vector<int> sub{0, 0, 1, 1, 2, 2};
    CHECK(class_share(labels, labels, sub) == std::map<int, double>{{0, 1.0}, {1, 1.0}, {2, 1.0}});
    const std::vector<int> pred{0, 0, 0, 0, 1, 1};
    const auto share = class_share(pred, labels, sub);
    CHECK(share.at(2) == 1.0);
    CHECK(share.at(1) == 0.0);
    CHECK(share.at(0) == 1.0);
}

TEST_CASE("evaluate assembles a consistent report") {
    EncodedSamples s;
    s.d = 1;
    s.values = {0, 0, 0, 0, 0};
    s.labels = {0, 1, 0, 1, 0};
    s.subclass = {0, 1, 0, 2, 0};
    s.source_rows = {10, 11, 12, 13, 14};
    const auto r = evaluate({0.1, 0.9, 0.2, 0.15, 0.3}, s, 3, 42);
    CHECK(r.predictions == std::vector<int>{0, 1, 0, 0, 1});
    CHECK(r.threshold == 0.3);
    CHECK(r.f1 == doctest::Approx(0.5));
    CHECK(r.auroc == doctest::Approx(4.0 / 6.0));
    CHECK(r.per_class_share.at(1) == 1.0);
    CHECK(r.per_class_share.at(2) == 0.0);
    CHECK(r.per_class_share.at(0) == doctest::Approx(2.0 / 3.0));
    CHECK(r.mask_count == 3);
    CHECK(r.seed == 42);
    CHECK(r.sample_ids == s.source_rows);
    for (double v : {r.f1, r.auroc}) CHECK((v >= 0.0 && v <= 1.0));
}

}  // TEST_SUITE
