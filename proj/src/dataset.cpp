#include "tabrad/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "tabrad/errors.hpp"

namespace tabrad {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

const char* to_string(ColumnKind kind) { return kind == ColumnKind::Numerical ? "numerical" : "categorical"; }

ColumnKind parse_column_kind(const std::string& text) {
    if (text == "numerical" || text == "numeric") return ColumnKind::Numerical;
    if (text == "categorical" || text == "category") return ColumnKind::Categorical;
    throw FormatError("unknown column kind '" + text + "'");
}

std::size_t TabularDataset::anomaly_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

SchemaHint load_schema(const std::string& path) {
    SchemaHint hint;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto sep = line.find_first_of("=:");
        if (sep == std::string::npos) throw FormatError("schema line without '=' in " + path, lineno);
        const std::string key = trim(line.substr(0, sep));
        const std::string value = trim(line.substr(sep + 1));
        if (key == "label") {
            hint.label_column = value;
        } else {
            try {
                hint.kinds[key] = parse_column_kind(value);
            } catch (const FormatError& e) {
                throw FormatError(std::string(e.what()) + " in " + path, lineno);
            }
        }
    }
    return hint;
}

TabularDataset parse_csv(const std::string& text, const SchemaHint& hint) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) header = split_csv_line(line);
    }
    if (header.empty()) throw FormatError("CSV has no header row");

    std::size_t label_col = header.size();
    if (hint.label_index) {
        label_col = *hint.label_index;
    } else {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == hint.label_column) label_col = i;
    }
    if (label_col >= header.size()) throw FormatError("label column '" + hint.label_column + "' not found in header");
    if (header.size() < 2) throw FormatError("CSV needs at least one feature column besides the label");

    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> linenos;
    TabularDataset ds;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto row = split_csv_line(line);
        if (row.size() != header.size()) {
            throw FormatError("ragged row: expected " + std::to_string(header.size()) + " cells, got " +
                                  std::to_string(row.size()),
                              lineno);
        }
        for (const auto& c : row)
            if (c.empty()) throw FormatError("missing cell", lineno);
        auto lab = parse_number(row[label_col]);
        if (!lab || *lab < 0 || std::floor(*lab) != *lab) throw FormatError("label must be a non-negative integer", lineno);
        const int k = static_cast<int>(*lab);
        ds.labels.push_back(k == 0 ? 0 : 1);
        ds.subclass.push_back(k);
        row.erase(row.begin() + static_cast<std::ptrdiff_t>(label_col));
        cells.push_back(std::move(row));
        linenos.push_back(lineno);
    }
    if (cells.empty()) throw FormatError("CSV contains a header but no data rows");

    const std::size_t d = header.size() - 1;
    for (std::size_t i = 0, j = 0; i < header.size(); ++i) {
        if (i == label_col) continue;
        ColumnSpec spec;
        spec.name = header[i];
        if (auto it = hint.kinds.find(spec.name); it != hint.kinds.end()) {
            spec.kind = it->second;
        } else {
            const bool numeric = std::all_of(cells.begin(), cells.end(),
                                             [&](const auto& r) { return parse_number(r[j]).has_value(); });
            spec.kind = numeric ? ColumnKind::Numerical : ColumnKind::Categorical;
        }
        ds.columns.push_back(std::move(spec));
        ++j;
    }

    ds.rows.assign(cells.size(), std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
        auto& spec = ds.columns[j];
        std::map<std::string, std::size_t> index;
        for (std::size_t r = 0; r < cells.size(); ++r) {
            const auto& cell = cells[r][j];
            if (spec.kind == ColumnKind::Numerical) {
                auto v = parse_number(cell);
                if (!v) throw FormatError("column '" + spec.name + "' is numerical but holds '" + cell + "'", linenos[r]);
                ds.rows[r][j] = *v;
            } else {
                auto [it, inserted] = index.emplace(cell, spec.vocabulary.size());
                if (inserted) spec.vocabulary.push_back(cell);
                ds.rows[r][j] = static_cast<double>(it->second);
            }
        }
        if (spec.kind == ColumnKind::Categorical) spec.cardinality = std::max<std::size_t>(2, spec.vocabulary.size());
    }
    return ds;
}

TabularDataset load_csv(const std::string& path, const SchemaHint& hint) { return parse_csv(read_file(path), hint); }

void write_csv(const std::string& path, const TabularDataset& ds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    for (const auto& c : ds.columns) out << c.name << ',';
    out << "label\n";
    for (std::size_t r = 0; r < ds.n(); ++r) {
        for (std::size_t j = 0; j < ds.d(); ++j) {
            const auto& c = ds.columns[j];
            if (c.kind == ColumnKind::Numerical)
                out << ds.rows[r][j];
            else
                out << c.vocabulary.at(static_cast<std::size_t>(ds.rows[r][j]));
            out << ',';
        }
        out << ds.subclass[r] << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

SplitDataset split(const TabularDataset& ds, std::uint64_t seed) {
    if (ds.n() == 0 || ds.d() == 0) throw ContractError("split: dataset is empty");
    std::vector<std::size_t> normals, anomalies;
    for (std::size_t i = 0; i < ds.n(); ++i) (ds.labels[i] == 0 ? normals : anomalies).push_back(i);
    if (normals.size() < 2) throw ContractError("split: at least 2 normal samples are required");

    std::mt19937_64 rng(seed);
    std::shuffle(normals.begin(), normals.end(), rng);
    const std::size_t n_train = normals.size() / 2;
    std::vector<std::size_t> train_rows(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val_rows(normals.begin() + static_cast<std::ptrdiff_t>(n_train), normals.end());
    val_rows.insert(val_rows.end(), anomalies.begin(), anomalies.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());

    SplitDataset out;
    out.split_seed = seed;
    out.columns = ds.columns;
    for (std::size_t j = 0; j < ds.d(); ++j) {
        auto& spec = out.columns[j];
        if (spec.kind != ColumnKind::Numerical) continue;
        double mu = 0.0;
        for (auto r : train_rows) mu += ds.rows[r][j];
        mu /= static_cast<double>(n_train);
        double var = 0.0;
        for (auto r : train_rows) var += (ds.rows[r][j] - mu) * (ds.rows[r][j] - mu);
        var /= static_cast<double>(n_train);
        spec.train_mean = mu;
        spec.train_std = std::sqrt(var);
        if (!(spec.train_std > 0.0)) {
            spec.train_std = 1.0;
            out.warnings.push_back("column '" + spec.name + "' has zero variance on the training split; std set to 1");
        }
    }

    auto fill = [&](const std::vector<std::size_t>& rows, EncodedSamples& dst) {
        dst.d = ds.d();
        dst.values.reserve(rows.size() * ds.d());
        for (auto r : rows) {
            auto enc = encode_row(ds.rows[r], out.columns);
            dst.values.insert(dst.values.end(), enc.begin(), enc.end());
            dst.labels.push_back(ds.labels[r]);
            dst.subclass.push_back(ds.subclass.empty() ? ds.labels[r] : ds.subclass[r]);
            dst.source_rows.push_back(r);
        }
    };
    fill(train_rows, out.train);
    fill(val_rows, out.validation);
    return out;
}

std::vector<double> encode_row(std::span<const double> raw, std::span<const ColumnSpec> specs) {
    if (raw.size() != specs.size()) throw ContractError("encode: row has " + std::to_string(raw.size()) +
                                                        " values for " + std::to_string(specs.size()) + " columns");
    std::vector<double> out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) {
        const auto& s = specs[j];
        if (s.kind == ColumnKind::Numerical) {
            out[j] = (raw[j] - s.train_mean) / s.train_std;
        } else {
            const double code = raw[j];
            if (code < 0 || std::floor(code) != code || code >= static_cast<double>(s.cardinality))
                throw EncodingError("category code " + std::to_string(code) + " is outside the vocabulary of column '" +
                                    s.name + "'");
            out[j] = code;
        }
    }
    return out;
}

std::vector<std::vector<double>> encode_sample(std::span<const double> raw, std::span<const ColumnSpec> specs) {
    const auto compact = encode_row(raw, specs);
    std::vector<std::vector<double>> out(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j) {
        if (specs[j].kind == ColumnKind::Numerical) {
            out[j] = {compact[j]};
        } else {
            out[j].assign(specs[j].cardinality, 0.0);
            out[j][static_cast<std::size_t>(compact[j])] = 1.0;
        }
    }
    return out;
}

std::vector<double> decode_sample(const std::vector<std::vector<double>>& encoded, std::span<const ColumnSpec> specs) {
    if (encoded.size() != specs.size()) throw ContractError("decode: feature count mismatch");
    std::vector<double> raw(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const auto& v = encoded[j];
        if (specs[j].kind == ColumnKind::Numerical) {
            raw[j] = v.at(0) * specs[j].train_std + specs[j].train_mean;
        } else {
            raw[j] = static_cast<double>(std::max_element(v.begin(), v.end()) - v.begin());
        }
    }
    return raw;
}

}  // namespace tabrad
