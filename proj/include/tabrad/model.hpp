#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tabrad/dataset.hpp"
#include "tabrad/masking.hpp"
#include "tabrad/nn.hpp"
#include "tabrad/retrieval.hpp"

namespace tabrad {

struct ModelConfig {
    std::size_t hidden_dim = 8;
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    double p_mask = 0.15;
    double dropout_p = 0.1;
    std::size_t feedforward_multiplier = 4;
    double layernorm_eps = 1e-5;
    std::uint64_t init_seed = 0;
};

void validate(const ModelConfig& cfg);

struct EncoderLayer {
    Tensor ln1_gain, ln1_bias;
    Linear query, key, value, out;
    Tensor ln2_gain, ln2_bias;
    Linear ff_in, ff_out;
};

/// A block of samples paired with their masks. `values` uses the compact
/// EncodedSamples layout [n x d]; `masks` is [n x d] with 1 = hidden.
struct MaskedBatch {
    std::size_t n = 0, d = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> masks;

    static MaskedBatch from(const EncodedSamples& samples, std::span<const MaskVector> masks);
    /// rows[i] of `samples` paired with masks[i].
    static MaskedBatch gather(const EncodedSamples& samples, std::span<const std::size_t> rows,
                              std::span<const MaskVector> masks);
    /// Sample i of `samples` under mask `mask` for every (i, mask) pair,
    /// sample-major.
    static MaskedBatch cross(const EncodedSamples& samples, std::span<const std::size_t> rows,
                             std::span<const MaskVector> bank);
    static MaskedBatch unmasked(const EncodedSamples& samples, std::span<const std::size_t> rows);
};

/// Flattened representations of the inference candidate pool.
struct CandidatePool {
    Tensor embedded;  // [m, d*e], embedding-layer outputs
    Tensor encoded;   // [m, d*e], encoder outputs
    std::vector<std::size_t> rows;  // indices into the training samples
};

/// Per-call state for a forward pass.
struct ForwardContext {
    bool training = false;
    Rng* dropout_rng = nullptr;    // encoder dropout; required when training
    Rng* retrieval_rng = nullptr;  // retrieval value-map dropout; required when training
    /// Inference candidates. When null the batch is its own candidate set and
    /// each sample is excluded from its own helpers.
    const CandidatePool* pool = nullptr;
};

class ReconstructorModel {
public:
    ReconstructorModel(std::vector<ColumnSpec> columns, const ModelConfig& cfg, const RetrievalConfig& retrieval = {});

    const ModelConfig& config() const { return cfg_; }
    const std::vector<ColumnSpec>& columns() const { return columns_; }
    std::size_t d() const { return columns_.size(); }
    std::size_t flat_dim() const { return columns_.size() * cfg_.hidden_dim; }
    const RetrievalModule& retrieval() const { return retrieval_; }
    RetrievalModule& retrieval() { return retrieval_; }
    ForwardPlan plan() const { return wire_location(retrieval_.config()); }

    /// In-embedding: per-feature Linear(e_j+1, e) over ((1-m_j)·enc(x_j), m_j)
    /// plus index and feature-type embeddings. -> [n, d, e]
    Tensor embed(const MaskedBatch& batch) const;

    /// Pre-layernorm transformer encoder over the d feature tokens. -> [n, d, e]
    /// Throws NumericError naming the layer on non-finite activations.
    Tensor encode(const Tensor& h, bool training, Rng* rng) const;

    /// Out-embedding: per-feature Linear(e, e_j). Element j is [n, e_j].
    std::vector<Tensor> reconstruct(const Tensor& h) const;

    /// Full forward pass following the wired retrieval plan.
    std::vector<Tensor> forward(const MaskedBatch& batch, const ForwardContext& ctx) const;

    /// Evaluation-mode representations of unmasked training rows.
    CandidatePool build_pool(const EncodedSamples& train, std::span<const std::size_t> rows) const;

    /// Every trainable tensor, in a stable order. Retrieval parameters come
    /// last and are prefixed "retrieval.".
    std::vector<NamedParameter> parameters() const;

    std::vector<Linear>& input_maps() { return in_maps_; }
    std::vector<Linear>& output_maps() { return out_maps_; }
    std::vector<EncoderLayer>& layers() { return layers_; }
    Tensor& index_embedding() { return index_emb_; }
    Tensor& type_embedding() { return type_emb_; }

private:
    std::vector<ColumnSpec> columns_;
    ModelConfig cfg_;
    std::vector<Linear> in_maps_;
    Tensor index_emb_;  // [d, e]
    Tensor type_emb_;   // [2, e]: numerical, categorical
    std::vector<EncoderLayer> layers_;
    Tensor final_gain_, final_bias_;
    std::vector<Linear> out_maps_;
    RetrievalModule retrieval_;
};

/// Per-sample reconstruction loss [n]: squared error over masked numerical
/// features plus cross-entropy over masked categorical features. Unmasked
/// positions contribute nothing.
Tensor masked_reconstruction_loss(const std::vector<Tensor>& outputs, const MaskedBatch& batch,
                                  std::span<const ColumnSpec> columns);

/// Batch objective: mean over samples of the per-sample loss. Throws
/// NumericError when the value is not finite.
Tensor masked_loss(const std::vector<Tensor>& outputs, const MaskedBatch& batch, std::span<const ColumnSpec> columns);

}  // namespace tabrad
