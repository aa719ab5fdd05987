#include "tabrad/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tabrad/errors.hpp"

namespace tabrad {

using nlohmann::ordered_json;

ReportFormat parse_report_format(const std::string& text) {
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    if (text == "markdown" || text == "md") return ReportFormat::Markdown;
    throw ConfigError("unknown report format '" + text + "' (json, csv, markdown)");
}

const char* extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::Json: return ".json";
        case ReportFormat::Csv: return ".csv";
        case ReportFormat::Markdown: return ".md";
    }
    return "";
}

namespace {

std::string class_name(int cls) { return cls == 0 ? "normal" : "type" + std::to_string(cls); }

ordered_json shares_json(const std::map<int, double>& shares) {
    ordered_json j = ordered_json::object();
    for (const auto& [cls, v] : shares) j[class_name(cls)] = v;
    return j;
}

ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::string pct(const MeanStd& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f ± %.1f", 100.0 * m.mean, 100.0 * m.std);
    return buf;
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

ordered_json config_json(const ExperimentConfig& cfg) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : to_key_values(cfg)) j[k] = v;
    return j;
}

}  // namespace

ordered_json to_json(const ScoreReport& r) {
    ordered_json records = ordered_json::array();
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
        records.push_back({{"id", i < r.sample_ids.size() ? r.sample_ids[i] : i},
                           {"score", r.scores[i]},
                           {"label", r.labels[i]},
                           {"subclass", r.subclass[i]},
                           {"prediction", r.predictions[i] ? "anomaly" : "normal"}});
    }
    ordered_json summary = {{"threshold", r.threshold},     {"f1", r.f1},
                            {"auroc", r.auroc},             {"per_class_share", shares_json(r.per_class_share)},
                            {"mask_count", r.mask_count},   {"config_hash", r.config_hash},
                            {"seed", r.seed}};
    return {{"summary", summary}, {"samples", records}};
}

ordered_json to_json(const TrainReport& r) {
    return {{"stopped_epoch", r.stopped_epoch},     {"best_epoch", r.best_epoch},
            {"best_loss", r.best_loss},             {"stop_reason", to_string(r.stop_reason)},
            {"wall_seconds", r.wall_seconds},       {"message", r.message},
            {"epoch_losses", r.epoch_losses}};
}

ordered_json to_json(const Aggregate& a) {
    ordered_json share = ordered_json::object();
    for (const auto& [cls, m] : a.share) share[class_name(cls)] = mean_std_json(m);
    return {{"n", a.n},
            {"failed", a.failed},
            {"f1", mean_std_json(a.f1)},
            {"auroc", mean_std_json(a.auroc)},
            {"per_class_share", share},
            {"warnings", a.warnings}};
}

std::string render(const ScoreReport& r, ReportFormat f) {
    if (f == ReportFormat::Json) return to_json(r).dump(2) + "\n";
    std::ostringstream out;
    if (f == ReportFormat::Csv) {
        out << "id,score,label,subclass,prediction\n";
        for (std::size_t i = 0; i < r.scores.size(); ++i)
            out << r.sample_ids[i] << ',' << format_double(r.scores[i]) << ',' << r.labels[i] << ',' << r.subclass[i]
                << ',' << (r.predictions[i] ? "anomaly" : "normal") << '\n';
        return out.str();
    }
    out << "| seed | F1 | AUROC | threshold | masks |\n|---|---|---|---|---|\n";
    out << "| " << r.seed << " | " << fixed(r.f1) << " | " << fixed(r.auroc) << " | " << fixed(r.threshold, 6) << " | "
        << r.mask_count << " |\n";
    return out.str();
}

std::string render(const RunResult& r, ReportFormat f) {
    if (f == ReportFormat::Json) {
        ordered_json seeds = ordered_json::array();
        for (const auto& s : r.seeds) {
            ordered_json j = {{"seed", s.seed}, {"ok", s.ok}, {"error", s.error}};
            if (s.ok) {
                j["f1"] = s.score.f1;
                j["auroc"] = s.score.auroc;
                j["threshold"] = s.score.threshold;
                j["per_class_share"] = shares_json(s.score.per_class_share);
            }
            if (s.train) {
                j["stopped_epoch"] = s.train->stopped_epoch;
                j["best_epoch"] = s.train->best_epoch;
                j["stop_reason"] = to_string(s.train->stop_reason);
            }
            seeds.push_back(j);
        }
        ordered_json j = {{"config_hash", r.config_hash},
                          {"config", config_json(r.config)},
                          {"aggregate", to_json(r.aggregate)},
                          {"seeds", seeds}};
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    if (f == ReportFormat::Csv) {
        out << "seed,ok,f1,auroc,error\n";
        for (const auto& s : r.seeds)
            out << s.seed << ',' << (s.ok ? 1 : 0) << ',' << (s.ok ? format_double(s.score.f1) : "") << ','
                << (s.ok ? format_double(s.score.auroc) : "") << ",\"" << s.error << "\"\n";
        out << "mean,," << format_double(r.aggregate.f1.mean) << ',' << format_double(r.aggregate.auroc.mean) << ",\n";
        out << "std,," << format_double(r.aggregate.f1.std) << ',' << format_double(r.aggregate.auroc.std) << ",\n";
        return out.str();
    }
    out << "| dataset | method | F1 | AUROC | seeds |\n|---|---|---|---|---|\n";
    std::string method = to_string(r.config.method);
    if (r.config.method == Method::Transformer && r.config.retrieval.kind != RetrievalKind::None)
        method += " + " + std::string(to_string(r.config.retrieval.kind));
    out << "| " << r.config.dataset << " | " << method << " | " << pct(r.aggregate.f1) << " | " << pct(r.aggregate.auroc)
        << " | " << r.aggregate.n << (r.aggregate.failed ? " (" + std::to_string(r.aggregate.failed) + " failed)" : "")
        << " |\n";
    for (const auto& w : r.aggregate.warnings) out << "\n> warning: " << w << "\n";
    return out.str();
}

std::string render(const SweepResult& r, ReportFormat f) {
    if (f == ReportFormat::Json) {
        ordered_json rows = ordered_json::array();
        for (const auto& row : r.rows) {
            ordered_json j = {{"value", row.value}, {"not_applicable", row.not_applicable}, {"note", row.note},
                              {"changed_keys", row.changed_keys}};
            if (!row.not_applicable) j["aggregate"] = to_json(row.aggregate);
            rows.push_back(j);
        }
        ordered_json j = {{"axis", to_string(r.axis)},
                          {"base_config_hash", r.base_hash},
                          {"base_config", config_json(r.base)},
                          {"rows", rows}};
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    if (f == ReportFormat::Csv) {
        out << to_string(r.axis) << ",f1_mean,f1_std,auroc_mean,auroc_std,n,failed,changed_keys\n";
        for (const auto& row : r.rows) {
            std::string keys;
            for (const auto& k : row.changed_keys) keys += (keys.empty() ? "" : ";") + k;
            if (row.not_applicable) {
                out << row.value << ",N/A,,N/A,,0,0," << keys << '\n';
                continue;
            }
            const auto& a = row.aggregate;
            out << row.value << ',' << format_double(a.f1.mean) << ',' << format_double(a.f1.std) << ','
                << format_double(a.auroc.mean) << ',' << format_double(a.auroc.std) << ',' << a.n << ',' << a.failed
                << ',' << keys << '\n';
        }
        return out.str();
    }
    out << "| " << to_string(r.axis) << " | F1 | AUROC |\n|---|---|---|\n";
    for (const auto& row : r.rows) {
        if (row.not_applicable) out << "| " << row.value << " | N/A | N/A |\n";
        else out << "| " << row.value << " | " << pct(row.aggregate.f1) << " | " << pct(row.aggregate.auroc) << " |\n";
    }
    return out.str();
}

std::string render(const ComparisonResult& r, ReportFormat f) {
    if (f == ReportFormat::Json) {
        ordered_json methods = ordered_json::array();
        for (const auto& m : r.methods) {
            ordered_json share = ordered_json::object();
            for (const auto& [cls, ms] : m.share) share[class_name(cls)] = mean_std_json(ms);
            ordered_json per_seed = ordered_json::array();
            for (const auto& s : m.per_seed) per_seed.push_back(shares_json(s));
            methods.push_back({{"method", m.method},
                               {"per_class_share", share},
                               {"f1", mean_std_json(mean_std(m.f1))},
                               {"auroc", mean_std_json(mean_std(m.auroc))},
                               {"per_seed", per_seed}});
        }
        auto cls_json = [](const SyntheticClass& c) {
            return ordered_json{{"count", c.count},
                                {"x1_range", {c.x1_low, c.x1_high}},
                                {"alpha1", c.relation.alpha1},
                                {"beta1", c.relation.beta1},
                                {"alpha2", c.relation.alpha2},
                                {"beta2", c.relation.beta2}};
        };
        ordered_json spec = {{"normal", cls_json(r.spec.normal)},
                             {"type1", cls_json(r.spec.type1)},
                             {"type2", cls_json(r.spec.type2)},
                             {"noise_std", r.spec.noise_std}};
        ordered_json j = {{"seeds", r.seeds},
                          {"generation", spec},
                          {"methods", methods},
                          {"bank_comparison",
                           {{"deterministic_f1", r.deterministic_bank_f1}, {"random_f1", r.random_bank_f1}}},
                          {"wall_seconds", r.wall_seconds}};
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    if (f == ReportFormat::Csv) {
        out << "method,normal_mean,normal_std,type1_mean,type1_std,type2_mean,type2_std\n";
        for (const auto& m : r.methods) {
            out << m.method;
            for (int cls = 0; cls <= 2; ++cls) {
                const auto it = m.share.find(cls);
                const MeanStd ms = it == m.share.end() ? MeanStd{} : it->second;
                out << ',' << format_double(ms.mean) << ',' << format_double(ms.std);
            }
            out << '\n';
        }
        return out.str();
    }
    out << "| | Normal | Anomalies (type 1) | Anomalies (type 2) |\n|---|---|---|---|\n";
    for (const auto& m : r.methods) {
        out << "| " << m.method;
        for (int cls = 0; cls <= 2; ++cls) {
            const auto it = m.share.find(cls);
            out << " | " << (it == m.share.end() ? "-" : pct(it->second));
        }
        out << " |\n";
    }
    return out.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::error_code ec;
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

void save_checkpoint(const std::string& path, const ExperimentConfig& cfg, std::uint64_t seed,
                     const ReconstructorModel& model) {
    ordered_json columns = ordered_json::array();
    for (const auto& c : model.columns())
        columns.push_back({{"name", c.name},
                           {"kind", to_string(c.kind)},
                           {"cardinality", c.cardinality},
                           {"train_mean", c.train_mean},
                           {"train_std", c.train_std},
                           {"vocabulary", c.vocabulary}});
    ordered_json params = ordered_json::array();
    for (const auto& p : model.parameters()) {
        std::vector<double> v(p.tensor.values().begin(), p.tensor.values().end());
        params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"values", v}});
    }
    ordered_json j = {{"format", "tabrad-checkpoint/1"},
                      {"seed", seed},
                      {"config", serialize(cfg)},
                      {"config_hash", config_hash(cfg)},
                      {"columns", columns},
                      {"parameters", params}};
    write_text(path, j.dump() + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what(), 0);
    }
    if (j.value("format", "") != "tabrad-checkpoint/1") throw FormatError("unknown checkpoint format", 0);
    try {
        LoadedCheckpoint out;
        out.config = default_config();
        apply_overrides(out.config, parse_key_values(j.at("config").get<std::string>()));
        out.seed = j.at("seed").get<std::uint64_t>();
        std::vector<ColumnSpec> columns;
        for (const auto& c : j.at("columns")) {
            ColumnSpec s;
            s.name = c.at("name").get<std::string>();
            s.kind = parse_column_kind(c.at("kind").get<std::string>());
            s.cardinality = c.at("cardinality").get<std::size_t>();
            s.train_mean = c.at("train_mean").get<double>();
            s.train_std = c.at("train_std").get<double>();
            s.vocabulary = c.at("vocabulary").get<std::vector<std::string>>();
            columns.push_back(std::move(s));
        }
        ModelConfig mc = out.config.model;
        mc.init_seed = out.seed;
        out.model = std::make_unique<ReconstructorModel>(columns, mc, out.config.retrieval);
        auto params = out.model->parameters();
        const auto& stored = j.at("parameters");
        if (stored.size() != params.size()) throw FormatError("checkpoint parameter count mismatch", 0);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (stored[i].at("name").get<std::string>() != params[i].name)
                throw FormatError("checkpoint parameter order mismatch at " + params[i].name, 0);
            const auto v = stored[i].at("values").get<std::vector<double>>();
            auto dst = params[i].tensor.mutable_values();
            if (v.size() != dst.size()) throw FormatError("checkpoint size mismatch for " + params[i].name, 0);
            std::copy(v.begin(), v.end(), dst.begin());
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what(), 0);
    }
}

}  // namespace tabrad
