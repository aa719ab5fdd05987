#pragma once

#include <string>

#include <json.hpp>

#include "tabrad/experiment.hpp"

namespace tabrad {

enum class ReportFormat { Json, Csv, Markdown };
ReportFormat parse_report_format(const std::string& text);
const char* extension(ReportFormat f);

/// One record per sample (id, score, label, subclass, prediction) plus a
/// summary block.
nlohmann::ordered_json to_json(const ScoreReport& r);
nlohmann::ordered_json to_json(const TrainReport& r);
nlohmann::ordered_json to_json(const Aggregate& a);

/// Per-sample table for a single seed.
std::string render(const ScoreReport& r, ReportFormat f);
/// Aggregate over seeds with per-seed summaries.
std::string render(const RunResult& r, ReportFormat f);
std::string render(const SweepResult& r, ReportFormat f);
/// Method x class share table, mean ± std in percent.
std::string render(const ComparisonResult& r, ReportFormat f);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text(const std::string& path, const std::string& text);

/// JSON checkpoint: format tag, seed, serialized config, column specs with
/// normalization statistics and every named parameter tensor. Doubles are
/// written with round-trip precision.
void save_checkpoint(const std::string& path, const ExperimentConfig& cfg, std::uint64_t seed,
                     const ReconstructorModel& model);

struct LoadedCheckpoint {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::unique_ptr<ReconstructorModel> model;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tabrad
