#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabrad/masking.hpp"
#include "tabrad/model.hpp"
#include "tabrad/synthetic.hpp"
#include "tabrad/trainer.hpp"

namespace tabrad {

/// Flat dotted keys ("model.hidden_dim") to raw string values.
using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; `[section]` prefixes the following keys with
/// "section."; `#` starts a comment. Throws FormatError with a line number.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::string& path);

struct BankConfig {
    BankKind kind = BankKind::Deterministic;
    std::size_t r = 1;
    std::optional<std::size_t> count;   // random: defaults to the deterministic size for (d, r)
    std::optional<double> p_mask;       // random: defaults to model.p_mask
    std::optional<std::uint64_t> seed;  // random: defaults to the run seed
};

enum class Method { Transformer, MaskKnn };
const char* to_string(Method m);

struct ExperimentConfig {
    std::string dataset = "synthetic";  // "synthetic" or a CSV path
    std::string schema;                 // optional schema file
    std::string label_column = "label";
    Method method = Method::Transformer;
    ModelConfig model;
    TrainConfig train;
    RetrievalConfig retrieval;
    BankConfig bank;
    MaskKnnConfig mask_knn;
    std::vector<std::uint64_t> seeds{0};
    std::string output;
};

/// Small-dataset defaults: 2 layers, 4 heads, e=8, attention-bsim retrieval
/// at (post_encoder, post_encoder) with lambda 0.5, deterministic bank r=1.
ExperimentConfig default_config();

/// The synthetic three-feature benchmark setting (2 heads, k=500).
ExperimentConfig synthetic_preset();

/// Applies every key, then validates. Unknown keys and unparsable values
/// are collected and reported together in one ConfigError.
void apply_overrides(ExperimentConfig& cfg, const KeyValues& kv);

void validate(const ExperimentConfig& cfg);

/// Canonical form: every key, stable order. `apply_overrides(default, to_key_values(c))`
/// reproduces `c`.
KeyValues to_key_values(const ExperimentConfig& cfg);

/// Sectioned text accepted by parse_key_values.
std::string serialize(const ExperimentConfig& cfg);

/// 16 hex digits, FNV-1a over the canonical form without the output path.
std::string config_hash(const ExperimentConfig& cfg);

/// Keys whose values differ between two configurations.
std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b);

std::string format_double(double v);

}  // namespace tabrad
