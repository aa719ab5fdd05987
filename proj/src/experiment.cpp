#include "tabrad/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tabrad/errors.hpp"

namespace tabrad {

TabularDataset load_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.dataset == "synthetic") return generate(SyntheticSpec{}, seed);
    SchemaHint hint = cfg.schema.empty() ? SchemaHint{} : load_schema(cfg.schema);
    if (cfg.label_column != "label") hint.label_column = cfg.label_column;
    return load_csv(cfg.dataset, hint);
}

MaskBank make_bank(const ExperimentConfig& cfg, std::size_t d, std::uint64_t seed) {
    const std::size_t r = std::min(cfg.bank.r, d);
    if (cfg.bank.kind == BankKind::Deterministic) return build_deterministic_bank(d, r);
    const std::size_t count = cfg.bank.count.value_or(static_cast<std::size_t>(deterministic_bank_size(d, r)));
    return build_random_bank(d, count, cfg.bank.p_mask.value_or(cfg.model.p_mask), cfg.bank.seed.value_or(seed));
}

FittedModel fit(const ExperimentConfig& cfg, const TabularDataset& data, std::uint64_t seed) {
    FittedModel out;
    out.split = split(data, seed);
    ModelConfig mc = cfg.model;
    mc.init_seed = seed;
    out.model = std::make_unique<ReconstructorModel>(out.split.columns, mc, cfg.retrieval);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    out.report = train(*out.model, out.split.train, tc);
    return out;
}

ScoreReport score_validation(const ExperimentConfig& cfg, const ReconstructorModel& model, const SplitDataset& split,
                             const MaskBank& bank, std::uint64_t seed) {
    std::optional<CandidatePool> pool;
    if (model.plan().retrieval) pool = build_candidate_pool(model, split.train, cfg.retrieval.candidate_cap, seed);
    auto scores = anomaly_scores(model, split.validation, bank, pool ? &*pool : nullptr);
    ScoreReport r = evaluate(std::move(scores), split.validation, bank.size(), seed);
    r.config_hash = config_hash(cfg);
    return r;
}

namespace {

SeedResult run_seed_on(const ExperimentConfig& cfg, const TabularDataset& data, std::uint64_t seed) {
    SeedResult res;
    res.seed = seed;
    try {
        if (cfg.method == Method::MaskKnn) {
            const SplitDataset sp = split(data, seed);
            const MaskBank bank = make_bank(cfg, sp.columns.size(), seed);
            auto scores = mask_knn_scores(sp.validation, sp.train, bank, sp.columns, cfg.mask_knn);
            res.score = evaluate(std::move(scores), sp.validation, bank.size(), seed);
            res.score.config_hash = config_hash(cfg);
            res.ok = true;
            return res;
        }
        FittedModel fm = fit(cfg, data, seed);
        res.train = fm.report;
        if (fm.report.stop_reason == StopReason::NumericFailure) {
            res.error = fm.report.message;
            return res;
        }
        const MaskBank bank = make_bank(cfg, fm.split.columns.size(), seed);
        res.score = score_validation(cfg, *fm.model, fm.split, bank, seed);
        res.ok = true;
    } catch (const NumericError& e) {
        res.ok = false;
        res.error = e.what();
    }
    return res;
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    return run_seed_on(cfg, load_dataset(cfg, seed), seed);
}

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(m.std / static_cast<double>(xs.size()));
    return m;
}

Aggregate aggregate(const std::vector<SeedResult>& seeds) {
    Aggregate a;
    std::vector<double> f1, au;
    std::map<int, std::vector<double>> shares;
    for (const auto& s : seeds) {
        if (!s.ok) {
            ++a.failed;
            a.warnings.push_back("seed " + std::to_string(s.seed) + " failed: " + s.error);
            continue;
        }
        ++a.n;
        f1.push_back(s.score.f1);
        au.push_back(s.score.auroc);
        for (const auto& [cls, v] : s.score.per_class_share) shares[cls].push_back(v);
    }
    if (a.failed > 0)
        a.warnings.push_back(std::to_string(a.failed) + " of " + std::to_string(seeds.size()) +
                             " seeds excluded from the aggregate");
    a.f1 = mean_std(f1);
    a.auroc = mean_std(au);
    for (const auto& [cls, v] : shares) a.share[cls] = mean_std(v);
    return a;
}

RunResult run(const ExperimentConfig& cfg) {
    validate(cfg);
    RunResult out;
    out.config = cfg;
    out.config_hash = config_hash(cfg);
    std::optional<TabularDataset> fixed;
    if (cfg.dataset != "synthetic") fixed = load_dataset(cfg, 0);
    for (auto seed : cfg.seeds)
        out.seeds.push_back(run_seed_on(cfg, fixed ? *fixed : load_dataset(cfg, seed), seed));
    out.aggregate = aggregate(out.seeds);
    return out;
}

SweepAxis parse_sweep_axis(const std::string& text) {
    if (text == "k") return SweepAxis::K;
    if (text == "lambda") return SweepAxis::Lambda;
    if (text == "location") return SweepAxis::Location;
    if (text == "bank_kind") return SweepAxis::BankKind;
    throw ConfigError("unknown sweep axis '" + text + "' (k, lambda, location, bank_kind)");
}

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::K: return "k";
        case SweepAxis::Lambda: return "lambda";
        case SweepAxis::Location: return "location";
        case SweepAxis::BankKind: return "bank_kind";
    }
    return "?";
}

std::vector<std::string> axis_keys(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::K: return {"retrieval.k"};
        case SweepAxis::Lambda: return {"retrieval.lambda"};
        case SweepAxis::Location: return {"retrieval.agg_location", "retrieval.location"};
        case SweepAxis::BankKind: return {"bank.kind"};
    }
    return {};
}

namespace {

KeyValues axis_assignment(SweepAxis axis, const std::string& value) {
    if (axis != SweepAxis::Location) return {{axis_keys(axis).front(), value}};
    const auto slash = value.find('/');
    if (slash == std::string::npos)
        throw ConfigError("location values are 'retrieval_location/agg_location', got '" + value + "'");
    return {{"retrieval.location", value.substr(0, slash)}, {"retrieval.agg_location", value.substr(slash + 1)}};
}

std::size_t training_size(const TabularDataset& data) { return (data.n() - data.anomaly_count()) / 2; }

}  // namespace

SweepResult sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values) {
    validate(base);
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    SweepResult out;
    out.base = base;
    out.base_hash = config_hash(base);
    out.axis = axis;

    // Validate every row before any training starts.
    std::vector<ExperimentConfig> configs;
    const auto allowed = axis_keys(axis);
    for (const auto& v : values) {
        ExperimentConfig c = base;
        apply_overrides(c, axis_assignment(axis, v));
        SweepRow row;
        row.value = v;
        row.changed_keys = config_diff(base, c);
        for (const auto& k : row.changed_keys)
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                throw ContractError("sweep row '" + v + "' changes '" + k + "' outside the swept axis");
        out.rows.push_back(std::move(row));
        configs.push_back(std::move(c));
    }

    std::optional<TabularDataset> fixed;
    if (base.dataset != "synthetic") fixed = load_dataset(base, 0);
    auto data_for = [&](std::uint64_t seed) { return fixed ? *fixed : load_dataset(base, seed); };

    if (axis == SweepAxis::K) {
        const std::size_t n_train = training_size(data_for(base.seeds.front()));
        for (std::size_t i = 0; i < configs.size(); ++i) {
            const int k = configs[i].retrieval.resolved_k();
            if (k > 0 && static_cast<std::size_t>(k) > n_train) {
                out.rows[i].not_applicable = true;
                out.rows[i].note = "k exceeds the training-set size " + std::to_string(n_train);
            }
        }
    }

    if (axis == SweepAxis::BankKind) {
        std::vector<std::vector<SeedResult>> per_row(configs.size());
        for (auto seed : base.seeds) {
            const TabularDataset data = data_for(seed);
            FittedModel fm = fit(base, data, seed);
            for (std::size_t i = 0; i < configs.size(); ++i) {
                SeedResult res;
                res.seed = seed;
                res.train = fm.report;
                if (fm.report.stop_reason == StopReason::NumericFailure) {
                    res.error = fm.report.message;
                } else {
                    try {
                        const MaskBank bank = make_bank(configs[i], fm.split.columns.size(), seed);
                        res.score = score_validation(configs[i], *fm.model, fm.split, bank, seed);
                        res.ok = true;
                    } catch (const NumericError& e) {
                        res.error = e.what();
                    }
                }
                per_row[i].push_back(std::move(res));
            }
        }
        for (std::size_t i = 0; i < configs.size(); ++i) out.rows[i].aggregate = aggregate(per_row[i]);
        return out;
    }

    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (out.rows[i].not_applicable) continue;
        std::vector<SeedResult> results;
        for (auto seed : base.seeds) results.push_back(run_seed_on(configs[i], data_for(seed), seed));
        out.rows[i].aggregate = aggregate(results);
    }
    return out;
}

ComparisonResult run_comparison(const ExperimentConfig& preset, const std::vector<std::uint64_t>& seeds) {
    validate(preset);
    if (seeds.empty()) throw ConfigError("comparison needs at least one seed");
    const auto t0 = std::chrono::steady_clock::now();
    ComparisonResult out;
    out.seeds = seeds;
    out.methods = {{"mask_knn", {}, {}, {}, {}}, {"transformer", {}, {}, {}, {}}, {"+att-bsim", {}, {}, {}, {}}};

    ExperimentConfig vanilla = preset;
    vanilla.retrieval.kind = RetrievalKind::None;
    ExperimentConfig augmented = preset;
    if (augmented.retrieval.kind == RetrievalKind::None) augmented.retrieval.kind = RetrievalKind::AttentionBsim;
    ExperimentConfig random_bank = augmented;
    random_bank.bank.kind = BankKind::Random;

    auto record = [](MethodShares& m, const ScoreReport& r) {
        m.per_seed.push_back(r.per_class_share);
        m.f1.push_back(r.f1);
        m.auroc.push_back(r.auroc);
    };

    for (auto seed : seeds) {
        const TabularDataset data = generate(out.spec, seed);
        const SplitDataset sp = split(data, seed);
        const MaskBank bank = make_bank(preset, sp.columns.size(), seed);
        auto knn = mask_knn_scores(sp.validation, sp.train, bank, sp.columns, preset.mask_knn);
        record(out.methods[0], evaluate(std::move(knn), sp.validation, bank.size(), seed));

        FittedModel v = fit(vanilla, data, seed);
        if (v.report.stop_reason == StopReason::NumericFailure) throw NumericError("vanilla model: " + v.report.message);
        record(out.methods[1], score_validation(vanilla, *v.model, v.split, bank, seed));

        FittedModel a = fit(augmented, data, seed);
        if (a.report.stop_reason == StopReason::NumericFailure)
            throw NumericError("augmented model: " + a.report.message);
        const ScoreReport ar = score_validation(augmented, *a.model, a.split, bank, seed);
        record(out.methods[2], ar);
        out.deterministic_bank_f1.push_back(ar.f1);
        const MaskBank rbank = make_bank(random_bank, sp.columns.size(), seed);
        out.random_bank_f1.push_back(score_validation(random_bank, *a.model, a.split, rbank, seed).f1);
    }
    for (auto& m : out.methods) {
        std::map<int, std::vector<double>> by_class;
        for (const auto& s : m.per_seed)
            for (const auto& [cls, v] : s) by_class[cls].push_back(v);
        for (const auto& [cls, v] : by_class) m.share[cls] = mean_std(v);
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace tabrad
