#include "tabrad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tabrad/errors.hpp"

namespace tabrad {

CandidatePool build_candidate_pool(const ReconstructorModel& model, const EncodedSamples& train,
                                   std::optional<std::size_t> cap, std::uint64_t seed) {
    std::vector<std::size_t> rows(train.n());
    std::iota(rows.begin(), rows.end(), 0);
    if (cap && *cap < rows.size()) {
        Rng rng = make_rng(seed, 20);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(*cap);
        std::sort(rows.begin(), rows.end());
    }
    return model.build_pool(train, rows);
}

namespace {

// Upper bound on doubles held by the largest per-chunk intermediate.
constexpr std::size_t kChunkBudget = std::size_t{1} << 22;

std::size_t chunk_rows(const ReconstructorModel& model, std::size_t bank_size, const CandidatePool* pool) {
    const std::size_t e = model.config().hidden_dim;
    const std::size_t d = model.d();
    std::size_t per_row = bank_size * d * std::max<std::size_t>(e * model.config().feedforward_multiplier, d);
    if (pool && model.plan().retrieval) {
        const std::size_t m = pool->rows.size();
        per_row = std::max(per_row, bank_size * m);
        if (model.retrieval().config().kind == RetrievalKind::AttentionBsimBval)
            per_row = std::max(per_row, bank_size * m * model.flat_dim());
    }
    return std::max<std::size_t>(1, kChunkBudget / std::max<std::size_t>(1, per_row));
}

}  // namespace

std::vector<double> per_mask_losses(const ReconstructorModel& model, const EncodedSamples& samples,
                                    const MaskBank& bank, const CandidatePool* pool) {
    if (bank.size() == 0) throw ContractError("mask bank is empty");
    if (samples.d != model.d() || bank.d != model.d()) throw DimensionError("samples, bank and model disagree on d");
    if (model.plan().retrieval && pool == nullptr) throw ContractError("retrieval model needs a candidate pool");
    const std::size_t n = samples.n(), m = bank.size();
    std::vector<double> out(n * m);
    const std::size_t step = chunk_rows(model, m, pool);
    NoGradGuard guard;
    const ForwardContext ctx{false, nullptr, nullptr, pool};
    std::vector<std::size_t> rows;
    for (std::size_t s0 = 0; s0 < n; s0 += step) {
        const std::size_t cn = std::min(step, n - s0);
        rows.resize(cn);
        std::iota(rows.begin(), rows.end(), s0);
        const MaskedBatch batch = MaskedBatch::cross(samples, rows, bank.masks);
        Tensor loss = masked_reconstruction_loss(model.forward(batch, ctx), batch, model.columns());
        const auto lv = loss.values();
        for (std::size_t i = 0; i < lv.size(); ++i) {
            if (!std::isfinite(lv[i]))
                throw NumericError("non-finite reconstruction loss for sample " + std::to_string(s0 + i / m) +
                                   " under mask " + std::to_string(i % m));
            out[s0 * m + i] = lv[i];
        }
    }
    return out;
}

std::vector<double> average_over_masks(std::span<const double> losses, std::size_t mask_count) {
    if (mask_count == 0 || losses.size() % mask_count != 0) throw DimensionError("loss table is not [n x m]");
    std::vector<double> out(losses.size() / mask_count);
    std::vector<double> row(mask_count);
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Summed in sorted order so the score does not depend on bank order.
        std::copy_n(losses.begin() + static_cast<std::ptrdiff_t>(i * mask_count), mask_count, row.begin());
        std::sort(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) acc += v;
        out[i] = acc / static_cast<double>(mask_count);
    }
    return out;
}

std::vector<double> anomaly_scores(const ReconstructorModel& model, const EncodedSamples& samples,
                                   const MaskBank& bank, const CandidatePool* pool) {
    return average_over_masks(per_mask_losses(model, samples, bank, pool), bank.size());
}

Thresholded threshold_and_predict(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    const auto n_a = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
    if (n_a == 0) throw MetricError("threshold rule undefined without anomalies");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    Thresholded t;
    t.predictions.assign(scores.size(), 0);
    for (std::size_t r = 0; r < n_a; ++r) t.predictions[idx[r]] = 1;
    t.threshold = scores[idx[n_a - 1]];
    return t;
}

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predictions[i] != 0, l = labels[i] != 0;
        tp += p && l;
        fp += p && !l;
        fn += !p && l;
    }
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = mid;
        i = j + 1;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] != 0) {
            pos += 1.0;
            rank_sum += rank[i];
        }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) throw MetricError("AUROC needs both normal and anomalous samples");
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::map<int, double> class_share(std::span<const int> predictions, std::span<const int> labels,
                                  std::span<const int> subclass) {
    if (predictions.size() != labels.size() || labels.size() != subclass.size())
        throw DimensionError("predictions, labels and subclasses differ in length");
    std::map<int, std::pair<std::size_t, std::size_t>> tally;  // correct, total
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& [correct, total] = tally[subclass[i]];
        ++total;
        correct += (predictions[i] != 0) == (labels[i] != 0);
    }
    std::map<int, double> out;
    for (const auto& [cls, ct] : tally) out[cls] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    return out;
}

ScoreReport evaluate(std::vector<double> scores, const EncodedSamples& samples, std::size_t mask_count,
                     std::uint64_t seed) {
    if (scores.size() != samples.n()) throw DimensionError("one score per sample required");
    ScoreReport r;
    r.scores = std::move(scores);
    r.labels = samples.labels;
    r.subclass = samples.subclass;
    r.sample_ids = samples.source_rows;
    auto t = threshold_and_predict(r.scores, r.labels);
    r.threshold = t.threshold;
    r.predictions = std::move(t.predictions);
    r.f1 = f1_score(r.predictions, r.labels);
    r.auroc = auroc(r.scores, r.labels);
    r.per_class_share = class_share(r.predictions, r.labels, r.subclass);
    r.mask_count = mask_count;
    r.seed = seed;
    return r;
}

}  // namespace tabrad
