#include "tabrad/model.hpp"

#include <cmath>

#include "tabrad/errors.hpp"

namespace tabrad {

namespace {

constexpr std::uint64_t kBaseInitStream = 1;
constexpr std::uint64_t kRetrievalInitStream = 2;

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v), true);
}

void check_finite(const Tensor& t, const std::string& where) {
    for (double v : t.values())
        if (!std::isfinite(v)) throw NumericError("non-finite activation in " + where);
}

}  // namespace

void validate(const ModelConfig& cfg) {
    if (cfg.hidden_dim == 0 || cfg.num_layers == 0 || cfg.num_heads == 0 || cfg.feedforward_multiplier == 0)
        throw ConfigError("model dimensions must be positive");
    if (cfg.hidden_dim % cfg.num_heads != 0) throw ConfigError("model.hidden_dim must be divisible by model.num_heads");
    if (!(cfg.p_mask > 0.0 && cfg.p_mask < 1.0)) throw ConfigError("model.p_mask must lie in (0,1)");
    if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0)) throw ConfigError("model.dropout must lie in [0,1)");
    if (!(cfg.layernorm_eps > 0.0)) throw ConfigError("model.layernorm_eps must be positive");
}

MaskedBatch MaskedBatch::from(const EncodedSamples& samples, std::span<const MaskVector> masks) {
    if (masks.size() != samples.n()) throw ContractError("one mask per sample required");
    MaskedBatch b;
    b.n = samples.n();
    b.d = samples.d;
    b.values = samples.values;
    b.masks.reserve(b.n * b.d);
    for (const auto& m : masks) {
        if (m.size() != b.d) throw ContractError("mask length differs from d");
        b.masks.insert(b.masks.end(), m.bits.begin(), m.bits.end());
    }
    return b;
}

MaskedBatch MaskedBatch::gather(const EncodedSamples& samples, std::span<const std::size_t> rows,
                                std::span<const MaskVector> masks) {
    if (masks.size() != rows.size()) throw ContractError("one mask per sample required");
    MaskedBatch b;
    b.d = samples.d;
    b.n = rows.size();
    b.values.reserve(b.n * b.d);
    b.masks.reserve(b.n * b.d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (masks[i].size() != b.d) throw ContractError("mask length differs from d");
        const auto x = samples.row(rows[i]);
        b.values.insert(b.values.end(), x.begin(), x.end());
        b.masks.insert(b.masks.end(), masks[i].bits.begin(), masks[i].bits.end());
    }
    return b;
}

MaskedBatch MaskedBatch::cross(const EncodedSamples& samples, std::span<const std::size_t> rows,
                               std::span<const MaskVector> bank) {
    MaskedBatch b;
    b.d = samples.d;
    b.n = rows.size() * bank.size();
    b.values.reserve(b.n * b.d);
    b.masks.reserve(b.n * b.d);
    for (auto r : rows) {
        const auto x = samples.row(r);
        for (const auto& m : bank) {
            if (m.size() != b.d) throw ContractError("mask length differs from d");
            b.values.insert(b.values.end(), x.begin(), x.end());
            b.masks.insert(b.masks.end(), m.bits.begin(), m.bits.end());
        }
    }
    return b;
}

MaskedBatch MaskedBatch::unmasked(const EncodedSamples& samples, std::span<const std::size_t> rows) {
    MaskedBatch b;
    b.d = samples.d;
    b.n = rows.size();
    b.values.reserve(b.n * b.d);
    for (auto r : rows) {
        const auto x = samples.row(r);
        b.values.insert(b.values.end(), x.begin(), x.end());
    }
    b.masks.assign(b.n * b.d, 0);
    return b;
}

ReconstructorModel::ReconstructorModel(std::vector<ColumnSpec> columns, const ModelConfig& cfg,
                                       const RetrievalConfig& retrieval)
    : columns_(std::move(columns)), cfg_(cfg) {
    validate(cfg_);
    if (columns_.empty()) throw ContractError("model needs at least one feature");
    const std::size_t e = cfg_.hidden_dim, d = columns_.size();
    Rng rng = make_rng(cfg_.init_seed, kBaseInitStream);

    for (const auto& c : columns_) in_maps_.emplace_back(c.encoded_width() + 1, e, rng);
    index_emb_ = normal_init({d, e}, 0.02, rng);
    type_emb_ = normal_init({2, e}, 0.02, rng);
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
        EncoderLayer layer;
        layer.ln1_gain = Tensor::full({e}, 1.0, true);
        layer.ln1_bias = Tensor::zeros({e}, true);
        layer.query = Linear(e, e, rng);
        layer.key = Linear(e, e, rng);
        layer.value = Linear(e, e, rng);
        layer.out = Linear(e, e, rng);
        layer.ln2_gain = Tensor::full({e}, 1.0, true);
        layer.ln2_bias = Tensor::zeros({e}, true);
        layer.ff_in = Linear(e, e * cfg_.feedforward_multiplier, rng);
        layer.ff_out = Linear(e * cfg_.feedforward_multiplier, e, rng);
        layers_.push_back(std::move(layer));
    }
    final_gain_ = Tensor::full({e}, 1.0, true);
    final_bias_ = Tensor::zeros({e}, true);
    for (const auto& c : columns_) out_maps_.emplace_back(e, c.encoded_width(), rng);

    Rng rrng = make_rng(cfg_.init_seed, kRetrievalInitStream);
    retrieval_ = RetrievalModule(retrieval, d * e, cfg_.dropout_p, rrng);
}

Tensor ReconstructorModel::embed(const MaskedBatch& batch) const {
    const std::size_t d = this->d(), n = batch.n, e = cfg_.hidden_dim;
    if (batch.d != d) throw ContractError("batch has " + std::to_string(batch.d) + " features, model expects " +
                                          std::to_string(d));
    std::vector<Tensor> tokens;
    tokens.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        const auto& col = columns_[j];
        const std::size_t w = col.encoded_width();
        std::vector<double> in(n * (w + 1), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = batch.values[i * d + j];
            const bool masked = batch.masks[i * d + j] != 0;
            double* row = in.data() + i * (w + 1);
            if (!masked) {
                if (col.kind == ColumnKind::Numerical) {
                    row[0] = v;
                } else {
                    const auto code = static_cast<std::size_t>(v);
                    if (code >= w) throw EncodingError("category code out of range for column '" + col.name + "'");
                    row[code] = 1.0;
                }
            }
            row[w] = masked ? 1.0 : 0.0;
        }
        Tensor x = Tensor::from({n, w + 1}, std::move(in));
        tokens.push_back(reshape(in_maps_[j](x), {n, 1, e}));
    }
    std::vector<std::size_t> kinds(d);
    for (std::size_t j = 0; j < d; ++j) kinds[j] = columns_[j].kind == ColumnKind::Numerical ? 0 : 1;
    Tensor positional = add(index_emb_, gather_rows(type_emb_, kinds));
    return add(concat(tokens, 1), positional);
}

Tensor ReconstructorModel::encode(const Tensor& h, bool training, Rng* rng) const {
    const std::size_t d = this->d(), e = cfg_.hidden_dim;
    if (h.rank() != 3 || h.dim(1) != d || h.dim(2) != e)
        throw DimensionError("encoder expects [n," + std::to_string(d) + "," + std::to_string(e) + "], got " +
                             shape_str(h.shape()));
    if (training && rng == nullptr) throw ContractError("training-mode encode needs a dropout generator");
    Rng unused(0);
    Rng& drop_rng = rng ? *rng : unused;
    const std::size_t n = h.dim(0), heads = cfg_.num_heads, hd = e / heads;
    const double p = cfg_.dropout_p;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    static constexpr std::size_t to_heads[] = {0, 2, 1, 3};

    Tensor x = reshape(h, {n * d, e});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        Tensor a = layernorm(x, L.ln1_gain, L.ln1_bias, cfg_.layernorm_eps);
        auto split_heads = [&](const Tensor& t) { return permute(reshape(t, {n, d, heads, hd}), to_heads); };
        Tensor q = split_heads(L.query(a));
        Tensor k = split_heads(L.key(a));
        Tensor v = split_heads(L.value(a));
        Tensor att = softmax(scale(batched_matmul(q, k, true), attn_scale), 3);
        att = dropout(att, p, training, drop_rng);
        Tensor ctx = reshape(permute(batched_matmul(att, v), to_heads), {n * d, e});
        x = add(x, dropout(L.out(ctx), p, training, drop_rng));

        Tensor f = layernorm(x, L.ln2_gain, L.ln2_bias, cfg_.layernorm_eps);
        f = dropout(relu(L.ff_in(f)), p, training, drop_rng);
        x = add(x, dropout(L.ff_out(f), p, training, drop_rng));
        check_finite(x, "encoder layer " + std::to_string(l));
    }
    x = layernorm(x, final_gain_, final_bias_, cfg_.layernorm_eps);
    return reshape(x, {n, d, e});
}

std::vector<Tensor> ReconstructorModel::reconstruct(const Tensor& h) const {
    const std::size_t d = this->d(), e = cfg_.hidden_dim;
    if (h.rank() != 3 || h.dim(1) != d || h.dim(2) != e) throw DimensionError("reconstruct expects [n,d,e]");
    const std::size_t n = h.dim(0);
    std::vector<Tensor> out;
    out.reserve(d);
    for (std::size_t j = 0; j < d; ++j) out.push_back(out_maps_[j](reshape(slice(h, 1, j, 1), {n, e})));
    return out;
}

std::vector<Tensor> ReconstructorModel::forward(const MaskedBatch& batch, const ForwardContext& ctx) const {
    const ForwardPlan p = plan();
    if (ctx.training && (ctx.dropout_rng == nullptr || ctx.retrieval_rng == nullptr))
        throw ContractError("training forward needs dropout and retrieval generators");
    Tensor emb = embed(batch);
    if (!p.retrieval || retrieval_.config().resolved_k() == 0) return reconstruct(encode(emb, ctx.training, ctx.dropout_rng));

    const std::size_t n = batch.n, D = flat_dim();
    const Shape token_shape{n, d(), cfg_.hidden_dim};
    const bool self_candidates = ctx.pool == nullptr;
    Rng unused(0);
    Rng& rrng = ctx.retrieval_rng ? *ctx.retrieval_rng : unused;
    Tensor emb_flat = reshape(emb, {n, D});

    if (p.retrieve_at == Location::PostEncoder) {
        Tensor hf = reshape(encode(emb, ctx.training, ctx.dropout_rng), {n, D});
        const Tensor& cands = self_candidates ? hf : ctx.pool->encoded;
        Tensor summary = retrieval_.summarize(hf, cands, self_candidates, ctx.training, rrng);
        return reconstruct(reshape(retrieval_.aggregate(hf, summary), token_shape));
    }
    const Tensor& cands = self_candidates ? emb_flat : ctx.pool->embedded;
    Tensor summary = retrieval_.summarize(emb_flat, cands, self_candidates, ctx.training, rrng);
    if (p.aggregate_at == Location::PostEncoder) {
        Tensor hf = reshape(encode(emb, ctx.training, ctx.dropout_rng), {n, D});
        return reconstruct(reshape(retrieval_.aggregate(hf, summary), token_shape));
    }
    Tensor mixed = reshape(retrieval_.aggregate(emb_flat, summary), token_shape);
    return reconstruct(encode(mixed, ctx.training, ctx.dropout_rng));
}

CandidatePool ReconstructorModel::build_pool(const EncodedSamples& train, std::span<const std::size_t> rows) const {
    if (rows.empty()) throw ContractError("candidate pool is empty");
    NoGradGuard guard;
    MaskedBatch batch = MaskedBatch::unmasked(train, rows);
    Tensor emb = embed(batch);
    Tensor enc = encode(emb, false, nullptr);
    CandidatePool pool;
    pool.embedded = reshape(emb, {batch.n, flat_dim()});
    pool.encoded = reshape(enc, {batch.n, flat_dim()});
    pool.rows.assign(rows.begin(), rows.end());
    return pool;
}

std::vector<NamedParameter> ReconstructorModel::parameters() const {
    std::vector<NamedParameter> out;
    for (std::size_t j = 0; j < in_maps_.size(); ++j) collect(out, "in." + std::to_string(j), in_maps_[j]);
    out.push_back({"index_embedding", index_emb_});
    out.push_back({"type_embedding", type_emb_});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        const std::string p = "layer." + std::to_string(l);
        out.push_back({p + ".ln1.gain", L.ln1_gain});
        out.push_back({p + ".ln1.bias", L.ln1_bias});
        collect(out, p + ".attn.query", L.query);
        collect(out, p + ".attn.key", L.key);
        collect(out, p + ".attn.value", L.value);
        collect(out, p + ".attn.out", L.out);
        out.push_back({p + ".ln2.gain", L.ln2_gain});
        out.push_back({p + ".ln2.bias", L.ln2_bias});
        collect(out, p + ".ff.in", L.ff_in);
        collect(out, p + ".ff.out", L.ff_out);
    }
    out.push_back({"final_ln.gain", final_gain_});
    out.push_back({"final_ln.bias", final_bias_});
    for (std::size_t j = 0; j < out_maps_.size(); ++j) collect(out, "out." + std::to_string(j), out_maps_[j]);
    retrieval_.collect_parameters(out);
    return out;
}

Tensor masked_reconstruction_loss(const std::vector<Tensor>& outputs, const MaskedBatch& batch,
                                  std::span<const ColumnSpec> columns) {
    const std::size_t n = batch.n, d = batch.d;
    if (outputs.size() != d || columns.size() != d) throw ContractError("one output per feature required");
    Tensor total;
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> weight(n);
        for (std::size_t i = 0; i < n; ++i) weight[i] = batch.masks[i * d + j] ? 1.0 : 0.0;
        Tensor term;
        if (columns[j].kind == ColumnKind::Numerical) {
            if (outputs[j].shape() != Shape{n, 1}) throw DimensionError("numerical output must be [n,1]");
            std::vector<double> target(n);
            for (std::size_t i = 0; i < n; ++i) target[i] = batch.values[i * d + j];
            Tensor err = square(sub(reshape(outputs[j], {n}), Tensor::from({n}, std::move(target))));
            term = mul(err, Tensor::from({n}, std::move(weight)));
        } else {
            std::vector<std::size_t> codes(n);
            for (std::size_t i = 0; i < n; ++i) codes[i] = static_cast<std::size_t>(batch.values[i * d + j]);
            term = mul(cross_entropy(outputs[j], codes), Tensor::from({n}, std::move(weight)));
        }
        total = j == 0 ? term : add(total, term);
    }
    return total;
}

Tensor masked_loss(const std::vector<Tensor>& outputs, const MaskedBatch& batch, std::span<const ColumnSpec> columns) {
    Tensor loss = scale(sum(masked_reconstruction_loss(outputs, batch, columns)), 1.0 / static_cast<double>(batch.n));
    if (!std::isfinite(loss.item())) throw NumericError("reconstruction loss is not finite");
    return loss;
}

}  // namespace tabrad
