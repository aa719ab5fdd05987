#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tabrad {

enum class ColumnKind { Numerical, Categorical };

const char* to_string(ColumnKind kind);
ColumnKind parse_column_kind(const std::string& text);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numerical;
    /// Width of the encoded vector: 1 for numerical, vocabulary size (>= 2)
    /// for categorical.
    std::size_t cardinality = 1;
    double train_mean = 0.0;
    double train_std = 1.0;
    std::vector<std::string> vocabulary;  // categorical only

    std::size_t encoded_width() const { return kind == ColumnKind::Numerical ? 1 : cardinality; }
};

/// Raw table. A numerical cell holds its value; a categorical cell holds the
/// index of its category in the column vocabulary.
struct TabularDataset {
    std::vector<ColumnSpec> columns;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;    // 0 normal, 1 anomaly
    std::vector<int> subclass;  // 0 normal, k >= 1 anomaly type k

    std::size_t n() const { return rows.size(); }
    std::size_t d() const { return columns.size(); }
    std::size_t anomaly_count() const;
};

struct SchemaHint {
    std::string label_column = "label";
    /// Takes precedence over label_column when set.
    std::optional<std::size_t> label_index;
    std::map<std::string, ColumnKind> kinds;
};

/// Reads `name = numerical|categorical` lines; `#` starts a comment. The
/// reserved key `label` names the label column.
SchemaHint load_schema(const std::string& path);

/// Comma-separated, header row, UTF-8. Label cells are integers: 0 is
/// normal, any k >= 1 is an anomaly of subtype k.
TabularDataset load_csv(const std::string& path, const SchemaHint& hint = {});
TabularDataset parse_csv(const std::string& text, const SchemaHint& hint = {});
void write_csv(const std::string& path, const TabularDataset& ds);

/// Encoded samples stored row-major [n x d]: standardized value for a
/// numerical feature, category index for a categorical one.
struct EncodedSamples {
    std::size_t d = 0;
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<int> subclass;
    std::vector<std::size_t> source_rows;

    std::size_t n() const { return d ? values.size() / d : 0; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
};

struct SplitDataset {
    EncodedSamples train;       // normals only
    EncodedSamples validation;  // remaining normals and every anomaly
    std::vector<ColumnSpec> columns;
    std::uint64_t split_seed = 0;
    std::vector<std::string> warnings;
};

/// Half of the normal rows (floor) become the training set; normalization
/// statistics (population mean/std) are fitted on them alone.
SplitDataset split(const TabularDataset& ds, std::uint64_t seed);

/// Per-feature encoded vectors: length 1 for numerical, one-hot for
/// categorical. Throws EncodingError for an out-of-vocabulary category.
std::vector<std::vector<double>> encode_sample(std::span<const double> raw, std::span<const ColumnSpec> specs);
/// Compact form used by EncodedSamples (standardized value or category index).
std::vector<double> encode_row(std::span<const double> raw, std::span<const ColumnSpec> specs);
std::vector<double> decode_sample(const std::vector<std::vector<double>>& encoded, std::span<const ColumnSpec> specs);

}  // namespace tabrad
