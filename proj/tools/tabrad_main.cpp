// tabrad command-line front end: train, score, bench, sweep, synth, gradcheck.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tabrad/config.hpp"
#include "tabrad/errors.hpp"
#include "tabrad/experiment.hpp"
#include "tabrad/gradcheck.hpp"
#include "tabrad/report.hpp"

namespace fs = std::filesystem;
using namespace tabrad;

namespace {

enum Exit { Ok = 0, Failure = 1, BadConfig = 2, AllSeedsFailed = 3, BadIo = 4 };

struct CommonOptions {
    std::string config_path;
    std::string preset = "default";
    std::string seeds;
    std::string out;
    std::string format = "json";
};

// Pulls `--section.key=value` and `--section.key value` (plus the top-level
// dataset keys) out of argv so that CLI11 only sees the fixed flags.
KeyValues extract_overrides(std::vector<std::string>& args) {
    KeyValues kv;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) {
            rest.push_back(a);
            continue;
        }
        const auto eq = a.find('=');
        const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
        const bool top_level = key == "dataset" || key == "schema" || key == "label_column" || key == "method";
        if (key.find('.') == std::string::npos && !top_level) {
            rest.push_back(a);
            continue;
        }
        if (eq != std::string::npos) {
            kv[key] = a.substr(eq + 1);
        } else if (i + 1 < args.size()) {
            kv[key] = args[++i];
        } else {
            throw ConfigError("override --" + key + " has no value");
        }
    }
    args = std::move(rest);
    return kv;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_seeds = true) {
    cmd->add_option("--config", o.config_path, "key=value configuration file");
    cmd->add_option("--preset", o.preset, "base settings before the file and overrides")
        ->check(CLI::IsMember({"default", "synthetic"}));
    if (with_seeds) cmd->add_option("--seed,--seeds", o.seeds, "seed list, e.g. 0,1,2 or 0-4");
    cmd->add_option("--out", o.out, "output path");
    cmd->add_option("--format", o.format, "json, csv or markdown")->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
}

// Preset, then the config file, then --seeds/--out, then dotted overrides.
ExperimentConfig resolve_config(const CommonOptions& o, const KeyValues& overrides) {
    ExperimentConfig cfg = o.preset == "synthetic" ? synthetic_preset() : default_config();
    KeyValues kv;
    if (!o.config_path.empty()) kv = load_key_values(o.config_path);
    if (!o.seeds.empty()) kv["seeds"] = o.seeds;
    if (!o.out.empty()) kv["output"] = o.out;
    for (const auto& [k, v] : overrides) kv[k] = v;
    apply_overrides(cfg, kv);
    return cfg;
}

std::string output_dir(const ExperimentConfig& cfg, const std::string& fallback) {
    return cfg.output.empty() ? fallback : cfg.output;
}

void print_train(const TrainReport& r) {
    std::printf("epochs %zu, best epoch %zu, best loss %.6f, stop %s, %.1fs\n", r.stopped_epoch, r.best_epoch,
                r.best_loss, to_string(r.stop_reason), r.wall_seconds);
}

int cmd_train(const ExperimentConfig& cfg) {
    if (cfg.method != Method::Transformer) throw ConfigError("train: method must be transformer");
    const std::uint64_t seed = cfg.seeds.front();
    const TabularDataset data = load_dataset(cfg, seed);
    FittedModel fm = fit(cfg, data, seed);
    print_train(fm.report);
    if (fm.report.stop_reason == StopReason::NumericFailure) {
        std::cerr << "numeric failure: " << fm.report.message << "\n";
        return AllSeedsFailed;
    }
    const std::string path = cfg.output.empty() ? "checkpoint.json" : cfg.output;
    save_checkpoint(path, cfg, seed, *fm.model);
    std::printf("checkpoint written to %s\n", path.c_str());
    return Ok;
}

int cmd_score(const std::string& checkpoint, const CommonOptions& o, ReportFormat fmt) {
    LoadedCheckpoint ck = load_checkpoint(checkpoint);
    const ExperimentConfig& cfg = ck.config;
    const TabularDataset data = load_dataset(cfg, ck.seed);
    const SplitDataset sp = split(data, ck.seed);
    const MaskBank bank = make_bank(cfg, sp.columns.size(), ck.seed);
    const ScoreReport r = score_validation(cfg, *ck.model, sp, bank, ck.seed);
    const std::string text = render(r, fmt);
    if (o.out.empty()) {
        std::cout << text;
    } else {
        write_text(o.out, text);
        std::printf("F1 %.4f, AUROC %.4f, report written to %s\n", r.f1, r.auroc, o.out.c_str());
    }
    return Ok;
}

int cmd_bench(const ExperimentConfig& cfg, ReportFormat fmt) {
    const RunResult res = run(cfg);
    const fs::path dir = output_dir(cfg, "bench_out");
    for (const auto& s : res.seeds) {
        const fs::path p = dir / ("seed_" + std::to_string(s.seed) + extension(fmt));
        if (s.ok) {
            write_text(p.string(), render(s.score, fmt));
        } else {
            std::cerr << "seed " << s.seed << " failed: " << s.error << "\n";
        }
    }
    write_text((dir / (std::string("aggregate") + extension(fmt))).string(), render(res, fmt));
    std::cout << render(res, ReportFormat::Markdown);
    return res.aggregate.n == 0 ? AllSeedsFailed : Ok;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis, const std::string& values, ReportFormat fmt) {
    const SweepResult res = sweep(cfg, parse_sweep_axis(axis), split_list(values));
    const fs::path dir = output_dir(cfg, "sweep_out");
    write_text((dir / ("sweep_" + axis + extension(fmt))).string(), render(res, fmt));
    std::cout << render(res, ReportFormat::Markdown);
    bool any = false;
    for (const auto& row : res.rows) any = any || row.not_applicable || row.aggregate.n > 0;
    return any ? Ok : AllSeedsFailed;
}

int cmd_synth(const ExperimentConfig& cfg, ReportFormat fmt) {
    const ComparisonResult res = run_comparison(cfg, cfg.seeds);
    const std::string path = cfg.output.empty() ? std::string("synthetic") + extension(fmt) : cfg.output;
    write_text(path, render(res, fmt));
    std::cout << render(res, ReportFormat::Markdown);
    std::printf("%.1fs, report written to %s\n", res.wall_seconds, path.c_str());
    return Ok;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed) {
    bool ok = true;
    auto show = [&](const std::vector<GradCheckCase>& cases) {
        for (const auto& c : cases) {
            std::printf("%-30s %s  max rel %.2e (tol %.0e)  entries %zu  refined %zu\n", c.name.c_str(),
                        c.passed ? "ok  " : "FAIL", c.max_rel_error, c.tolerance, c.entries_checked, c.refined_entries);
            ok = ok && c.passed;
        }
    };
    show(check_primitives(trials, seed));
    show(check_composite(trials, seed));
    return ok ? Ok : Failure;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    KeyValues overrides;
    try {
        overrides = extract_overrides(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return BadConfig;
    }

    CLI::App app{"Masked-reconstruction anomaly detection for tabular data", "tabrad"};
    app.require_subcommand(1);

    CommonOptions train_o, score_o, bench_o, sweep_o, synth_o;
    auto* train_cmd = app.add_subcommand("train", "train one seed and write a checkpoint");
    add_common(train_cmd, train_o);

    std::string checkpoint;
    auto* score_cmd = app.add_subcommand("score", "score the validation split with a checkpoint");
    score_cmd->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
    score_cmd->add_option("--out", score_o.out, "report path; stdout when omitted");
    score_cmd->add_option("--format", score_o.format, "json, csv or markdown");

    auto* bench_cmd = app.add_subcommand("bench", "seed battery: per-seed reports plus an aggregate");
    add_common(bench_cmd, bench_o);

    std::string axis, values;
    auto* sweep_cmd = app.add_subcommand("sweep", "vary one setting and aggregate each value");
    add_common(sweep_cmd, sweep_o);
    sweep_cmd->add_option("--axis", axis, "k, lambda, location or bank_kind")->required();
    sweep_cmd->add_option("--values", values, "comma-separated values; locations as a/b")->required();

    auto* synth_cmd = app.add_subcommand("synth", "Mask-KNN vs transformer vs retrieval on the synthetic data");
    add_common(synth_cmd, synth_o);
    synth_o.preset = "synthetic";

    std::size_t trials = 20;
    std::uint64_t gc_seed = 0;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
    gc_cmd->add_option("--trials", trials, "random trials per case");
    gc_cmd->add_option("--seed", gc_seed, "seed for the random inputs");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? Ok : BadConfig;
    }

    try {
        if (*gc_cmd) {
            if (!overrides.empty()) throw ConfigError("gradcheck takes no configuration overrides");
            return cmd_gradcheck(trials, gc_seed);
        }
        if (*score_cmd) {
            if (!overrides.empty()) throw ConfigError("score takes its configuration from the checkpoint");
            return cmd_score(checkpoint, score_o, parse_report_format(score_o.format));
        }
        if (*train_cmd) return cmd_train(resolve_config(train_o, overrides));
        if (*bench_cmd) return cmd_bench(resolve_config(bench_o, overrides), parse_report_format(bench_o.format));
        if (*sweep_cmd)
            return cmd_sweep(resolve_config(sweep_o, overrides), axis, values, parse_report_format(sweep_o.format));
        if (*synth_cmd) {
            // A bare count here means that many seeds from 0.
            if (!synth_o.seeds.empty() && synth_o.seeds.find_first_not_of("0123456789") == std::string::npos) {
                const unsigned long count = std::stoul(synth_o.seeds);
                if (count == 0) throw ConfigError("synth: --seeds count must be positive");
                synth_o.seeds = "0-" + std::to_string(count - 1);
            }
            return cmd_synth(resolve_config(synth_o, overrides), parse_report_format(synth_o.format));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return BadConfig;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return BadIo;
    } catch (const FormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return BadIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return AllSeedsFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Failure;
    }
    return Ok;
}
