#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tabrad/nn.hpp"

namespace tabrad {

enum class RetrievalKind { None, Knn, VAttention, AttentionBsim, AttentionBsimBval };
enum class Location { PostEmbedding, PostEncoder };

const char* to_string(RetrievalKind kind);
const char* to_string(Location loc);
RetrievalKind parse_retrieval_kind(const std::string& text);
Location parse_location(const std::string& text);

struct RetrievalConfig {
    RetrievalKind kind = RetrievalKind::None;
    /// Helper count; -1 selects every candidate. Unset resolves to 5 for knn
    /// and -1 for the attention kinds.
    std::optional<int> k;
    double lambda = 0.5;
    Location location = Location::PostEncoder;
    Location agg_location = Location::PostEncoder;
    /// Inference candidate subsample size; unset uses the full training set.
    std::optional<std::size_t> candidate_cap;
    /// Scores are divided by this before the softmax. 1 leaves them as is.
    double temperature = 1.0;

    int resolved_k() const;
};

/// Throws ConfigError for invalid combinations (aggregation upstream of
/// retrieval, λ outside [0,1), k < -1, non-positive temperature).
void validate(const RetrievalConfig& cfg);

/// How a forward pass threads the retrieval module through the network.
struct ForwardPlan {
    bool retrieval = false;
    Location retrieve_at = Location::PostEncoder;
    Location aggregate_at = Location::PostEncoder;
};

ForwardPlan wire_location(const RetrievalConfig& cfg);

/// Learned maps acting on flattened d*e representations.
struct RetrievalParams {
    Linear query, key, value;       // W_Q, W_K, W_V
    Linear value_hidden, value_out; // T = value_out ∘ Dropout ∘ ReLU ∘ value_hidden (bsim-bval)
};

/// Selected helpers and their aggregation weights for a block of queries.
struct Selection {
    std::size_t n = 0, m = 0;
    std::vector<std::uint8_t> keep;  // [n*m]
    std::size_t k_effective = 0;
};

class RetrievalModule {
public:
    RetrievalModule() = default;
    RetrievalModule(const RetrievalConfig& cfg, std::size_t flat_dim, double dropout_p, Rng& rng);

    const RetrievalConfig& config() const { return cfg_; }
    RetrievalConfig& mutable_config() { return cfg_; }
    bool enabled() const { return cfg_.kind != RetrievalKind::None; }
    std::size_t flat_dim() const { return dim_; }
    RetrievalParams& params() { return params_; }
    const RetrievalParams& params() const { return params_; }

    /// Scores S(z, x) for all query/candidate pairs: [n,m].
    Tensor scores(const Tensor& queries, const Tensor& candidates) const;

    /// Top-k per query row by score, ties to the lower candidate index. With
    /// exclude_self, queries and candidates are the same rows and the
    /// diagonal is never selected. k larger than the available pool selects
    /// the whole pool.
    Selection select(const Tensor& scores, bool exclude_self) const;

    /// Σ_{x∈H} w_x V(z,x) for each query: the uniform 1/|H| mean for knn, the
    /// softmax over the selected scores otherwise. [n, flat_dim].
    Tensor summarize(const Tensor& queries, const Tensor& candidates, bool exclude_self, bool training,
                     Rng& rng) const;

    /// (1-λ)·self + λ·summary; self is returned unchanged when k = 0.
    Tensor aggregate(const Tensor& self, const Tensor& summary) const;

    /// Attention weights over the candidates, [n,m]; zero outside H.
    Tensor weights(const Tensor& scores, const Selection& sel) const;

    void collect_parameters(std::vector<NamedParameter>& out) const;

private:
    RetrievalConfig cfg_;
    std::size_t dim_ = 0;
    double dropout_p_ = 0.0;
    RetrievalParams params_;
};

// Single-pair score/value functions on flat vectors. Used for inspection and
// as the reference semantics of the batched module.
double score_knn(std::span<const double> hz, std::span<const double> hx);
std::vector<double> value_knn(std::span<const double> hx);
double score_vatt(std::span<const double> hz, std::span<const double> hx, const RetrievalParams& p);
std::vector<double> value_att(std::span<const double> hx, const RetrievalParams& p);
double score_bsim(std::span<const double> hz, std::span<const double> hx, const RetrievalParams& p);
/// Evaluation-mode (no dropout) score and pair-dependent value.
std::pair<double, std::vector<double>> score_bsim_bval(std::span<const double> hz, std::span<const double> hx,
                                                       const RetrievalParams& p);

}  // namespace tabrad
