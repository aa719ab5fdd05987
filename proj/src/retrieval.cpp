#include "tabrad/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabrad/errors.hpp"

namespace tabrad {

const char* to_string(RetrievalKind kind) {
    switch (kind) {
        case RetrievalKind::None: return "none";
        case RetrievalKind::Knn: return "knn";
        case RetrievalKind::VAttention: return "v_attention";
        case RetrievalKind::AttentionBsim: return "attention_bsim";
        case RetrievalKind::AttentionBsimBval: return "attention_bsim_bval";
    }
    return "?";
}

const char* to_string(Location loc) { return loc == Location::PostEmbedding ? "post_embedding" : "post_encoder"; }

RetrievalKind parse_retrieval_kind(const std::string& text) {
    if (text == "none") return RetrievalKind::None;
    if (text == "knn") return RetrievalKind::Knn;
    if (text == "v_attention" || text == "v-attention") return RetrievalKind::VAttention;
    if (text == "attention_bsim" || text == "attention-bsim") return RetrievalKind::AttentionBsim;
    if (text == "attention_bsim_bval" || text == "attention-bsim-bval") return RetrievalKind::AttentionBsimBval;
    throw ConfigError("unknown retrieval kind '" + text + "'");
}

Location parse_location(const std::string& text) {
    if (text == "post_embedding" || text == "post_emb") return Location::PostEmbedding;
    if (text == "post_encoder" || text == "post_enc") return Location::PostEncoder;
    throw ConfigError("unknown retrieval location '" + text + "'");
}

int RetrievalConfig::resolved_k() const {
    if (k) return *k;
    return kind == RetrievalKind::Knn ? 5 : -1;
}

void validate(const RetrievalConfig& cfg) {
    if (cfg.kind == RetrievalKind::None) return;
    if (!(cfg.lambda >= 0.0 && cfg.lambda < 1.0)) throw ConfigError("retrieval.lambda must lie in [0,1)");
    if (cfg.resolved_k() < -1) throw ConfigError("retrieval.k must be -1 or non-negative");
    if (!(cfg.temperature > 0.0)) throw ConfigError("retrieval.temperature must be positive");
    if (cfg.candidate_cap && *cfg.candidate_cap == 0) throw ConfigError("retrieval.candidate_cap must be positive");
    if (cfg.location == Location::PostEncoder && cfg.agg_location == Location::PostEmbedding)
        throw ConfigError("retrieval.agg_location=post_embedding is upstream of retrieval.location=post_encoder");
}

ForwardPlan wire_location(const RetrievalConfig& cfg) {
    validate(cfg);
    ForwardPlan plan;
    plan.retrieval = cfg.kind != RetrievalKind::None;
    plan.retrieve_at = cfg.location;
    plan.aggregate_at = cfg.agg_location;
    return plan;
}

RetrievalModule::RetrievalModule(const RetrievalConfig& cfg, std::size_t flat_dim, double dropout_p, Rng& rng)
    : cfg_(cfg), dim_(flat_dim), dropout_p_(dropout_p) {
    validate(cfg_);
    switch (cfg_.kind) {
        case RetrievalKind::None:
        case RetrievalKind::Knn:
            break;
        case RetrievalKind::VAttention:
            params_.query = Linear(dim_, dim_, rng);
            [[fallthrough]];
        case RetrievalKind::AttentionBsim:
            params_.key = Linear(dim_, dim_, rng);
            params_.value = Linear(dim_, dim_, rng);
            break;
        case RetrievalKind::AttentionBsimBval:
            params_.key = Linear(dim_, dim_, rng);
            params_.value_hidden = Linear(dim_, dim_, rng);
            params_.value_out = Linear(dim_, dim_, rng, false);
            break;
    }
}

namespace {

Tensor neg_euclidean(const Tensor& q, const Tensor& c) {
    NoGradGuard guard;
    Tensor sq = pairwise_sq_dist(q, c);
    std::vector<double> v(sq.values().begin(), sq.values().end());
    for (auto& x : v) x = -std::sqrt(x);
    return Tensor::from(sq.shape(), std::move(v));
}

}  // namespace

Tensor RetrievalModule::scores(const Tensor& queries, const Tensor& candidates) const {
    if (queries.rank() != 2 || candidates.rank() != 2 || queries.dim(1) != dim_ || candidates.dim(1) != dim_)
        throw DimensionError("retrieval expects [n," + std::to_string(dim_) + "] representations, got " +
                             shape_str(queries.shape()) + " and " + shape_str(candidates.shape()));
    Tensor s;
    switch (cfg_.kind) {
        case RetrievalKind::None:
            throw ContractError("scores() on a disabled retrieval module");
        case RetrievalKind::Knn:
            return neg_euclidean(queries, candidates);
        case RetrievalKind::VAttention:
            s = batched_matmul(params_.query(queries), params_.key(candidates), true);
            break;
        case RetrievalKind::AttentionBsim:
        case RetrievalKind::AttentionBsimBval:
            s = scale(pairwise_sq_dist(params_.key(queries), params_.key(candidates)), -1.0);
            break;
    }
    if (cfg_.temperature != 1.0) s = scale(s, 1.0 / cfg_.temperature);
    return s;
}

Selection RetrievalModule::select(const Tensor& scores, bool exclude_self) const {
    Selection sel;
    sel.n = scores.dim(0);
    sel.m = scores.dim(1);
    if (sel.m == 0) throw ContractError("retrieval needs at least one candidate");
    if (exclude_self && sel.n != sel.m) throw ContractError("exclude_self requires queries to be the candidates");
    const std::size_t available = sel.m - (exclude_self ? 1 : 0);
    if (available == 0) throw ContractError("retrieval candidate set is empty after excluding the query itself");
    const int k = cfg_.resolved_k();
    sel.k_effective = (k < 0 || static_cast<std::size_t>(k) >= available) ? available : static_cast<std::size_t>(k);
    sel.keep.assign(sel.n * sel.m, 0);
    const auto sv = scores.values();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sel.n; ++i) {
        idx.clear();
        for (std::size_t j = 0; j < sel.m; ++j)
            if (!(exclude_self && i == j)) idx.push_back(j);
        if (sel.k_effective < idx.size()) {
            const double* row = sv.data() + i * sel.m;
            auto better = [row](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); };
            std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(sel.k_effective), idx.end(), better);
            idx.resize(sel.k_effective);
        }
        for (auto j : idx) sel.keep[i * sel.m + j] = 1;
    }
    return sel;
}

Tensor RetrievalModule::weights(const Tensor& scores, const Selection& sel) const {
    if (cfg_.kind == RetrievalKind::Knn) {
        std::vector<double> w(sel.keep.size(), 0.0);
        const double u = sel.k_effective ? 1.0 / static_cast<double>(sel.k_effective) : 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (sel.keep[i]) w[i] = u;
        return Tensor::from({sel.n, sel.m}, std::move(w));
    }
    return masked_softmax(scores, sel.keep);
}

Tensor RetrievalModule::summarize(const Tensor& queries, const Tensor& candidates, bool exclude_self, bool training,
                                  Rng& rng) const {
    Tensor s = scores(queries, candidates);
    Selection sel = select(s, exclude_self);
    Tensor w = weights(s, sel);
    switch (cfg_.kind) {
        case RetrievalKind::Knn:
            return matmul(w, candidates);
        case RetrievalKind::VAttention:
        case RetrievalKind::AttentionBsim:
            return matmul(w, params_.value(candidates));
        case RetrievalKind::AttentionBsimBval: {
            // T's first layer is affine, so W1(K_z - K_x) + b = W1 K_z - W1 K_x + b.
            const auto& hidden = params_.value_hidden;
            Tensor uq = matmul(params_.key(queries), hidden.weight);
            Tensor uc = matmul(params_.key(candidates), hidden.weight);
            Tensor pre = add(pairwise_diff(uq, uc), hidden.bias);
            Tensor act = dropout(relu(pre), dropout_p_, training, rng);
            const std::size_t n = sel.n, m = sel.m;
            Tensor pooled = reshape(batched_matmul(reshape(w, {n, 1, m}), act), {n, dim_});
            return params_.value_out(pooled);
        }
        case RetrievalKind::None:
            break;
    }
    throw ContractError("summarize() on a disabled retrieval module");
}

Tensor RetrievalModule::aggregate(const Tensor& self, const Tensor& summary) const {
    if (cfg_.resolved_k() == 0) return self;
    return add(scale(self, 1.0 - cfg_.lambda), scale(summary, cfg_.lambda));
}

void RetrievalModule::collect_parameters(std::vector<NamedParameter>& out) const {
    switch (cfg_.kind) {
        case RetrievalKind::None:
        case RetrievalKind::Knn:
            break;
        case RetrievalKind::VAttention:
            collect(out, "retrieval.query", params_.query);
            [[fallthrough]];
        case RetrievalKind::AttentionBsim:
            collect(out, "retrieval.key", params_.key);
            collect(out, "retrieval.value", params_.value);
            break;
        case RetrievalKind::AttentionBsimBval:
            collect(out, "retrieval.key", params_.key);
            collect(out, "retrieval.value_hidden", params_.value_hidden);
            collect(out, "retrieval.value_out", params_.value_out);
            break;
    }
}

namespace {

std::vector<double> apply_linear(const Linear& l, std::span<const double> x) {
    const std::size_t in = l.in_features(), out = l.out_features();
    if (x.size() != in) throw DimensionError("linear map input size mismatch");
    const auto w = l.weight.values();
    std::vector<double> y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
        double acc = l.has_bias ? l.bias[o] : 0.0;
        for (std::size_t i = 0; i < in; ++i) acc += x[i] * w[i * out + o];
        y[o] = acc;
    }
    return y;
}

void require_same(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("representations differ in length");
}

}  // namespace

double score_knn(std::span<const double> hz, std::span<const double> hx) {
    require_same(hz, hx);
    double acc = 0.0;
    for (std::size_t i = 0; i < hz.size(); ++i) acc += (hz[i] - hx[i]) * (hz[i] - hx[i]);
    return -std::sqrt(acc);
}

std::vector<double> value_knn(std::span<const double> hx) { return {hx.begin(), hx.end()}; }

double score_vatt(std::span<const double> hz, std::span<const double> hx, const RetrievalParams& p) {
    require_same(hz, hx);
    const auto q = apply_linear(p.query, hz);
    const auto k = apply_linear(p.key, hx);
    return std::inner_product(q.begin(), q.end(), k.begin(), 0.0);
}

std::vector<double> value_att(std::span<const double> hx, const RetrievalParams& p) { return apply_linear(p.value, hx); }

double score_bsim(std::span<const double> hz, std::span<const double> hx, const RetrievalParams& p) {
    require_same(hz, hx);
    const auto kz = apply_linear(p.key, hz);
    const auto kx = apply_linear(p.key, hx);
    double acc = 0.0;
    for (std::size_t i = 0; i < kz.size(); ++i) acc += (kz[i] - kx[i]) * (kz[i] - kx[i]);
    return -acc;
}

std::pair<double, std::vector<double>> score_bsim_bval(std::span<const double> hz, std::span<const double> hx,
                                                       const RetrievalParams& p) {
    require_same(hz, hx);
    const auto kz = apply_linear(p.key, hz);
    const auto kx = apply_linear(p.key, hx);
    std::vector<double> diff(kz.size());
    double s = 0.0;
    for (std::size_t i = 0; i < kz.size(); ++i) {
        diff[i] = kz[i] - kx[i];
        s -= diff[i] * diff[i];
    }
    auto hidden = apply_linear(p.value_hidden, diff);
    for (auto& h : hidden) h = std::max(h, 0.0);
    return std::make_pair(s, apply_linear(p.value_out, hidden));
}

}  // namespace tabrad
