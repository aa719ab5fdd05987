#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "tabrad/errors.hpp"
#include "tabrad/model.hpp"
#include "tabrad/retrieval.hpp"

using namespace tabrad;

namespace {

Linear make_linear(std::size_t in, std::size_t out, std::vector<double> w, std::vector<double> b = {}) {
    Linear l;
    l.weight = Tensor::from({in, out}, std::move(w));
    l.has_bias = !b.empty();
    l.bias = l.has_bias ? Tensor::from({out}, std::move(b)) : Tensor::zeros({out});
    return l;
}

Linear identity(std::size_t n) {
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
    return make_linear(n, n, w, std::vector<double>(n, 0.0));
}

std::vector<double> project(const Linear& l, const std::vector<double>& x) {
    const std::size_t in = l.in_features(), out = l.out_features();
    std::vector<double> y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        y[o] = l.has_bias ? l.bias[o] : 0.0;
        for (std::size_t i = 0; i < in; ++i) y[o] += x[i] * l.weight[i * out + o];
    }
    return y;
}

std::vector<double> row(const std::vector<double>& m, std::size_t i, std::size_t w) {
    return {m.begin() + static_cast<std::ptrdiff_t>(i * w), m.begin() + static_cast<std::ptrdiff_t>((i + 1) * w)};
}

RetrievalModule module(RetrievalKind kind, std::size_t dim, std::optional<int> k = std::nullopt, double lambda = 0.5,
                       std::uint64_t seed = 1) {
    RetrievalConfig cfg;
    cfg.kind = kind;
    cfg.k = k;
    cfg.lambda = lambda;
    Rng rng(seed);
    return RetrievalModule(cfg, dim, 0.0, rng);
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("knn score examples") {
    const double z[] = {0, 0}, x[] = {3, 4};
    CHECK(score_knn(z, z) == 0.0);
    CHECK(score_knn(z, x) == -5.0);
}

TEST_CASE("knn top-1 is the brute-force nearest neighbour") {
    std::mt19937_64 rng(3);
    const auto m = module(RetrievalKind::Knn, 4, 1);
    for (int t = 0; t < 50; ++t) {
        const auto q = oracle::random_values(4, rng), c = oracle::random_values(12, rng);
        const Tensor s = m.scores(Tensor::from({1, 4}, q), Tensor::from({3, 4}, c));
        const auto sel = m.select(s, false);
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t j = 0; j < 3; ++j) {
            double dist = 0.0;
            for (std::size_t i = 0; i < 4; ++i) dist += std::pow(q[i] - c[j * 4 + i], 2);
            if (dist < best_d) best_d = dist, best = j;
        }
        for (std::size_t j = 0; j < 3; ++j) CHECK(sel.keep[j] == (j == best ? 1 : 0));
    }
}

TEST_CASE("v-attention score examples") {
    RetrievalParams p;
    p.query = identity(2);
    p.key = identity(2);
    const double a[] = {1, 0}, b[] = {0, 1}, ones[] = {1, 1};
    CHECK(score_vatt(a, b, p) == 0.0);
    CHECK(score_vatt(ones, ones, p) == 2.0);

    std::mt19937_64 rng(4);
    const auto m = module(RetrievalKind::VAttention, 5);
    for (int t = 0; t < 20; ++t) {
        const auto z = oracle::random_values(5, rng), x = oracle::random_values(5, rng);
        const auto q = project(m.params().query, z), k = project(m.params().key, x);
        const double ref = std::inner_product(q.begin(), q.end(), k.begin(), 0.0);
        CHECK(score_vatt(z, x, m.params()) == doctest::Approx(ref).epsilon(1e-14));
        const auto batched = m.scores(Tensor::from({1, 5}, z), Tensor::from({1, 5}, x)).item();
        CHECK(batched == doctest::Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("bsim score examples") {
    std::mt19937_64 rng(5);
    const auto m = module(RetrievalKind::AttentionBsim, 3);
    const auto z = oracle::random_values(3, rng);
    CHECK(score_bsim(z, z, m.params()) == 0.0);

    RetrievalParams p;
    p.key = identity(1);
    const double zero[] = {0}, two[] = {2};
    CHECK(score_bsim(zero, two, p) == -4.0);
}

TEST_CASE("bsim argmax is the brute-force argmin of projected distance") {
    std::mt19937_64 rng(6);
    const auto m = module(RetrievalKind::AttentionBsim, 4, 1);
    for (int t = 0; t < 30; ++t) {
        const auto q = oracle::random_values(4, rng), c = oracle::random_values(28, rng);
        const auto sel = m.select(m.scores(Tensor::from({1, 4}, q), Tensor::from({7, 4}, c)), false);
        const auto kq = project(m.params().key, q);
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t j = 0; j < 7; ++j) {
            const auto kc = project(m.params().key, row(c, j, 4));
            double dist = 0.0;
            for (std::size_t i = 0; i < 4; ++i) dist += std::pow(kq[i] - kc[i], 2);
            if (dist < best_d) best_d = dist, best = j;
        }
        CHECK(sel.keep[best] == 1);
        CHECK(std::accumulate(sel.keep.begin(), sel.keep.end(), 0) == 1);
    }
}

TEST_CASE("bsim-bval value function") {
    std::mt19937_64 rng(7);
    RetrievalParams p;
    p.key = make_linear(3, 3, oracle::random_values(9, rng), oracle::random_values(3, rng));
    p.value_hidden = make_linear(3, 3, oracle::random_values(9, rng), std::vector<double>(3, 0.0));
    p.value_out = make_linear(3, 3, oracle::random_values(9, rng));
    const auto z = oracle::random_values(3, rng);
    const auto [s, v] = score_bsim_bval(z, z, p);
    CHECK(s == 0.0);
    CHECK(v == std::vector<double>{0, 0, 0});

    p.value_hidden = identity(3);
    const auto x = oracle::random_values(3, rng);
    const auto kz = project(p.key, z), kx = project(p.key, x);
    std::vector<double> h(3);
    for (std::size_t i = 0; i < 3; ++i) h[i] = std::max(kz[i] - kx[i], 0.0);
    const auto ref = project(p.value_out, h);
    const auto got = score_bsim_bval(z, x, p).second;
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-14));
}

TEST_CASE("bsim-bval summary matches layer-by-layer evaluation") {
    std::mt19937_64 rng(8);
    const std::size_t D = 4, n = 3, m = 6;
    const auto mod = module(RetrievalKind::AttentionBsimBval, D, -1, 0.5, 9);
    const auto q = oracle::random_values(n * D, rng), c = oracle::random_values(m * D, rng);
    Rng unused(0);
    const auto got = oracle::to_vec(mod.summarize(Tensor::from({n, D}, q), Tensor::from({m, D}, c), false, false, unused));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(m);
        std::vector<std::vector<double>> vals(m);
        for (std::size_t j = 0; j < m; ++j) {
            const auto kz = project(mod.params().key, row(q, i, D)), kx = project(mod.params().key, row(c, j, D));
            std::vector<double> diff(D);
            s[j] = 0.0;
            for (std::size_t t = 0; t < D; ++t) {
                diff[t] = kz[t] - kx[t];
                s[j] -= diff[t] * diff[t];
            }
            auto hidden = project(mod.params().value_hidden, diff);
            for (auto& h : hidden) h = std::max(h, 0.0);
            vals[j] = project(mod.params().value_out, hidden);
        }
        const auto w = oracle::softmax(s);
        for (std::size_t t = 0; t < D; ++t) {
            double ref = 0.0;
            for (std::size_t j = 0; j < m; ++j) ref += w[j] * vals[j][t];
            CHECK(got[i * D + t] == doctest::Approx(ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("aggregation examples") {
    const auto m0 = module(RetrievalKind::AttentionBsim, 3, -1, 0.0);
    std::mt19937_64 rng(10);
    const Tensor self = Tensor::from({2, 3}, oracle::random_values(6, rng));
    const Tensor summary = Tensor::from({2, 3}, oracle::random_values(6, rng));
    CHECK(oracle::to_vec(m0.aggregate(self, summary)) == oracle::to_vec(self));

    const auto knn = module(RetrievalKind::Knn, 1, 1, 0.5);
    Rng unused(0);
    const Tensor h = Tensor::from({1, 1}, {2.0});
    const Tensor s = knn.summarize(h, Tensor::from({1, 1}, {4.0}), false, false, unused);
    CHECK(knn.aggregate(h, s).item() == 3.0);
}

TEST_CASE("bsim with every candidate equals a dense softmax oracle") {
    std::mt19937_64 rng(11);
    for (std::size_t m : {1, 2, 5, 10}) {
        const std::size_t D = 6, n = 4;
        const auto mod = module(RetrievalKind::AttentionBsim, D, -1, 0.5, m);
        const auto q = oracle::random_values(n * D, rng), c = oracle::random_values(m * D, rng);
        Rng unused(0);
        const auto got =
            oracle::to_vec(mod.summarize(Tensor::from({n, D}, q), Tensor::from({m, D}, c), false, false, unused));
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> s(m);
            const auto kq = project(mod.params().key, row(q, i, D));
            for (std::size_t j = 0; j < m; ++j) {
                const auto kc = project(mod.params().key, row(c, j, D));
                s[j] = 0.0;
                for (std::size_t t = 0; t < D; ++t) s[j] -= (kq[t] - kc[t]) * (kq[t] - kc[t]);
            }
            const auto w = oracle::softmax(s);
            CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
            for (std::size_t t = 0; t < D; ++t) {
                double ref = 0.0;
                for (std::size_t j = 0; j < m; ++j) ref += w[j] * project(mod.params().value, row(c, j, D))[t];
                CHECK(std::abs(got[i * D + t] - ref) < 1e-10);
            }
        }
    }
}

TEST_CASE("knn over the whole pool is the arithmetic mean") {
    std::mt19937_64 rng(12);
    const std::size_t D = 3, m = 9;
    const auto mod = module(RetrievalKind::Knn, D, static_cast<int>(m));
    const auto c = oracle::random_values(m * D, rng);
    Rng unused(0);
    const auto got = oracle::to_vec(
        mod.summarize(Tensor::from({1, D}, oracle::random_values(D, rng)), Tensor::from({m, D}, c), false, false, unused));
    for (std::size_t t = 0; t < D; ++t) {
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += c[j * D + t];
        CHECK(got[t] == doctest::Approx(mean / m).epsilon(1e-14));
    }
}

TEST_CASE("attention weights sum to one over the helpers") {
    std::mt19937_64 rng(13);
    for (auto kind : {RetrievalKind::VAttention, RetrievalKind::AttentionBsim, RetrievalKind::AttentionBsimBval}) {
        for (int k : {-1, 1, 3}) {
            const auto mod = module(kind, 4, k);
            const Tensor s = mod.scores(Tensor::from({5, 4}, oracle::random_values(20, rng)),
                                        Tensor::from({5, 4}, oracle::random_values(20, rng)));
            const auto sel = mod.select(s, true);
            const auto w = oracle::to_vec(mod.weights(s, sel));
            for (std::size_t i = 0; i < 5; ++i) {
                CHECK(w[i * 5 + i] == 0.0);
                CHECK(std::abs(std::accumulate(w.begin() + i * 5, w.begin() + (i + 1) * 5, 0.0) - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("selection rules") {
    const auto mod = module(RetrievalKind::AttentionBsim, 1, 2);
    SUBCASE("ties go to the lower index") {
        const Tensor s = Tensor::from({1, 4}, {0.5, 0.5, 0.5, 0.5});
        CHECK(mod.select(s, false).keep == std::vector<std::uint8_t>{1, 1, 0, 0});
    }
    SUBCASE("self is never selected") {
        const Tensor s = Tensor::from({3, 3}, {9, 1, 2, 1, 9, 2, 1, 2, 9});
        const auto sel = mod.select(s, true);
        for (std::size_t i = 0; i < 3; ++i) CHECK(sel.keep[i * 3 + i] == 0);
        CHECK(sel.k_effective == 2);
    }
    SUBCASE("k beyond the pool selects the pool") {
        const auto wide = module(RetrievalKind::Knn, 1, 50);
        const auto sel = wide.select(Tensor::from({1, 3}, {1, 2, 3}), false);
        CHECK(sel.k_effective == 3);
        CHECK(sel.keep == std::vector<std::uint8_t>{1, 1, 1});
    }
    SUBCASE("an empty pool is an error") {
        CHECK_THROWS_AS(mod.select(Tensor::from({1, 1}, {0.0}), true), ContractError);
    }
}

TEST_CASE("selection is invariant under a positive affine rescale of scores") {
    std::mt19937_64 rng(14);
    const auto mod = module(RetrievalKind::AttentionBsim, 1, 3);
    for (int t = 0; t < 50; ++t) {
        auto s = oracle::random_values(4 * 8, rng);
        const auto a = mod.select(Tensor::from({4, 8}, s), false);
        for (auto& v : s) v = 3.7 * v - 11.0;
        CHECK(mod.select(Tensor::from({4, 8}, s), false).keep == a.keep);
    }
}

TEST_CASE("self similarity is the maximum bsim score") {
    std::mt19937_64 rng(15);
    const auto mod = module(RetrievalKind::AttentionBsim, 5);
    const auto z = oracle::random_values(5, rng);
    for (int t = 0; t < 100; ++t) CHECK(score_bsim(z, oracle::random_values(5, rng), mod.params()) <= 0.0);
}

TEST_CASE("location wiring") {
    RetrievalConfig cfg;
    cfg.kind = RetrievalKind::AttentionBsim;
    const auto plan = wire_location(cfg);
    CHECK(plan.retrieval);
    CHECK(plan.retrieve_at == Location::PostEncoder);
    CHECK(plan.aggregate_at == Location::PostEncoder);

    RetrievalConfig none;
    CHECK_FALSE(wire_location(none).retrieval);

    cfg.agg_location = Location::PostEmbedding;
    CHECK_THROWS_AS(wire_location(cfg), ConfigError);

    cfg.location = Location::PostEmbedding;
    CHECK_NOTHROW(wire_location(cfg));
    cfg.agg_location = Location::PostEncoder;
    std::vector<ColumnSpec> cols(3);
    for (auto& c : cols) c.name = "x";
    ModelConfig mc;
    const ReconstructorModel model(cols, mc, cfg);
    CHECK(model.retrieval().params().value.out_features() == 3 * mc.hidden_dim);
    MaskedBatch b;
    b.n = 4;
    b.d = 3;
    b.values.assign(12, 0.5);
    b.masks = {1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1};
    const auto out = model.forward(b, ForwardContext{});
    CHECK(out[0].shape() == Shape{4, 1});
}

TEST_CASE("retrieval config checks") {
    RetrievalConfig cfg;
    cfg.kind = RetrievalKind::Knn;
    cfg.lambda = 1.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.lambda = 0.5;
    cfg.k = -2;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.k = std::nullopt;
    CHECK(cfg.resolved_k() == 5);
    cfg.kind = RetrievalKind::AttentionBsim;
    CHECK(cfg.resolved_k() == -1);
    CHECK_THROWS_AS(parse_retrieval_kind("cosine"), ConfigError);
}

TEST_CASE("lambda zero leaves model outputs bit-identical") {
    std::vector<ColumnSpec> cols(3);
    for (auto& c : cols) c.name = "x";
    ModelConfig mc;
    mc.init_seed = 21;
    const ReconstructorModel vanilla(cols, mc);
    std::mt19937_64 rng(1);
    MaskedBatch b;
    b.n = 6;
    b.d = 3;
    b.values = oracle::random_values(18, rng);
    b.masks = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0, 1, 0};
    const auto base = vanilla.forward(b, ForwardContext{});
    for (auto kind : {RetrievalKind::Knn, RetrievalKind::VAttention, RetrievalKind::AttentionBsim,
                      RetrievalKind::AttentionBsimBval}) {
        RetrievalConfig rc;
        rc.kind = kind;
        rc.lambda = 0.0;
        const ReconstructorModel aug(cols, mc, rc);
        const auto out = aug.forward(b, ForwardContext{});
        for (std::size_t j = 0; j < 3; ++j) CHECK(oracle::to_vec(out[j]) == oracle::to_vec(base[j]));
    }
}

}  // TEST_SUITE
