#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "tabrad/errors.hpp"
#include "tabrad/experiment.hpp"
#include "tabrad/report.hpp"

using namespace tabrad;

namespace {

ExperimentConfig quick(const std::string& extra_seeds = "0,1") {
    ExperimentConfig c = synthetic_preset();
    apply_overrides(c, {{"train.max_epochs", "3"}, {"seeds", extra_seeds}});
    return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("tabrad_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("key-value text with sections and comments") {
    const auto kv = parse_key_values("# top\nseeds = 1-3, 7\n[model]\nhidden_dim = 16  # wider\n\n[retrieval]\nkind=knn\n");
    CHECK(kv.at("seeds") == "1-3, 7");
    CHECK(kv.at("model.hidden_dim") == "16");
    CHECK(kv.at("retrieval.kind") == "knn");
    CHECK_THROWS_AS(parse_key_values("[model]\nno equals sign\n"), FormatError);
    try {
        parse_key_values("a = 1\n\n[x\n");
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("seed lists and ranges") {
    ExperimentConfig c = default_config();
    apply_overrides(c, {{"seeds", "1-3, 7"}});
    CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3, 7});
    apply_overrides(c, {{"seeds", "0-19"}});
    CHECK(c.seeds.size() == 20);
    CHECK_THROWS_AS(apply_overrides(c, {{"seeds", "5-2"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(c, {{"seeds", ""}}), ConfigError);
}

TEST_CASE("serialization round-trips and the hash follows content") {
    for (ExperimentConfig c : {default_config(), synthetic_preset()}) {
        apply_overrides(c, {{"retrieval.k", "25"}, {"bank.kind", "random"}, {"train.learning_rate", "0.0003"}});
        ExperimentConfig back = default_config();
        apply_overrides(back, parse_key_values(serialize(c)));
        CHECK(to_key_values(back) == to_key_values(c));
        CHECK(config_hash(back) == config_hash(c));
        CHECK(config_hash(c).size() == 16);

        ExperimentConfig moved = c;
        moved.output = "elsewhere";
        CHECK(config_hash(moved) == config_hash(c));
        apply_overrides(moved, {{"retrieval.lambda", "0.3"}});
        CHECK(config_hash(moved) != config_hash(c));
        CHECK(config_diff(c, moved) == std::vector<std::string>{"output", "retrieval.lambda"});
    }
}

TEST_CASE("preset values") {
    const auto d = default_config();
    CHECK(d.model.num_layers == 2);
    CHECK(d.model.num_heads == 4);
    CHECK(d.model.hidden_dim == 8);
    CHECK(d.model.p_mask == 0.15);
    CHECK(d.train.learning_rate == 0.001);
    CHECK(d.train.patience_epochs == 100);
    CHECK(d.train.batch_size == -1);
    CHECK(d.retrieval.lambda == 0.5);
    CHECK(d.bank.kind == BankKind::Deterministic);
    const auto s = synthetic_preset();
    CHECK(s.model.num_heads == 2);
    CHECK(s.retrieval.kind == RetrievalKind::AttentionBsim);
    CHECK(s.retrieval.resolved_k() == 500);
    CHECK(s.bank.r == 1);
}

TEST_CASE("invalid overrides are reported together") {
    ExperimentConfig c = default_config();
    try {
        apply_overrides(c, {{"model.hidden_dimm", "3"}, {"retrieval.lambda", "abc"}, {"train.max_epochs", "5"}});
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("model.hidden_dimm") != std::string::npos);
        CHECK(msg.find("retrieval.lambda") != std::string::npos);
        CHECK(msg.find("train.max_epochs") == std::string::npos);
    }
    CHECK_THROWS_AS(apply_overrides(c, {{"retrieval.lambda", "1"}}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(c, {{"model.num_heads", "3"}}), ConfigError);
}

TEST_CASE("run covers every seed deterministically") {
    const auto cfg = quick();
    const auto a = run(cfg);
    REQUIRE(a.seeds.size() == 2);
    CHECK(a.aggregate.n == 2);
    CHECK(a.aggregate.failed == 0);
    CHECK(a.config_hash == config_hash(cfg));
    const auto b = run(cfg);
    CHECK(b.aggregate.f1.mean == a.aggregate.f1.mean);
    CHECK(b.aggregate.auroc.std == a.aggregate.auroc.std);
    CHECK(b.seeds[1].score.scores == a.seeds[1].score.scores);
    for (const auto& s : a.seeds) {
        CHECK(s.ok);
        CHECK(s.score.config_hash == a.config_hash);
    }
}

TEST_CASE("aggregate skips failed seeds and says so") {
    std::vector<SeedResult> seeds(3);
    for (std::size_t i = 0; i < 3; ++i) {
        seeds[i].seed = i;
        seeds[i].ok = i != 1;
        seeds[i].score.f1 = 0.5 + 0.1 * static_cast<double>(i);
        seeds[i].score.auroc = 0.8;
    }
    seeds[1].error = "non-finite loss";
    const auto agg = aggregate(seeds);
    CHECK(agg.n == 2);
    CHECK(agg.failed == 1);
    CHECK(agg.f1.mean == doctest::Approx(0.6));
    CHECK(agg.f1.std == doctest::Approx(0.1));
    CHECK_FALSE(agg.warnings.empty());
}

TEST_CASE("mean and population std") {
    const auto ms = mean_std({1, 2, 3, 4});
    CHECK(ms.mean == 2.5);
    CHECK(ms.std == doctest::Approx(std::sqrt(1.25)));
}

TEST_CASE("lambda sweep row at zero equals the vanilla model") {
    const auto base = quick("3");
    const auto sw = sweep(base, SweepAxis::Lambda, {"0", "0.3"});
    ExperimentConfig vanilla = base;
    vanilla.retrieval.kind = RetrievalKind::None;
    const auto v = run(vanilla);
    CHECK(sw.rows[0].aggregate.f1.mean == v.aggregate.f1.mean);
    CHECK(sw.rows[0].aggregate.auroc.mean == v.aggregate.auroc.mean);
    for (const auto& row : sw.rows) CHECK(row.changed_keys == std::vector<std::string>{"retrieval.lambda"});
}

TEST_CASE("k sweep marks oversized rows and accepts the sentinel") {
    auto base = quick("0");
    const auto sw = sweep(base, SweepAxis::K, {"5", "100000", "-1"});
    REQUIRE(sw.rows.size() == 3);
    CHECK_FALSE(sw.rows[0].not_applicable);
    CHECK(sw.rows[1].not_applicable);
    CHECK(sw.rows[1].aggregate.n == 0);
    CHECK_FALSE(sw.rows[2].not_applicable);
    CHECK(sw.rows[2].aggregate.n == 1);
    CHECK(sw.rows[0].changed_keys == std::vector<std::string>{"retrieval.k"});
    const auto md = render(sw, ReportFormat::Markdown);
    CHECK(md.find("N/A") != std::string::npos);
}

TEST_CASE("location sweep rejects aggregation upstream of retrieval") {
    const auto base = quick("0");
    CHECK_THROWS_AS(sweep(base, SweepAxis::Location, {"post_encoder/post_embedding"}), ConfigError);
    CHECK_THROWS_AS(sweep(base, SweepAxis::Location, {"post_encoder"}), ConfigError);
    const auto sw = sweep(base, SweepAxis::Location, {"post_embedding/post_encoder", "post_embedding/post_embedding"});
    for (const auto& row : sw.rows)
        for (const auto& k : row.changed_keys) CHECK((k == "retrieval.location" || k == "retrieval.agg_location"));
}

TEST_CASE("bank-kind sweep changes only the bank") {
    const auto sw = sweep(quick("0"), SweepAxis::BankKind, {"deterministic", "random"});
    CHECK(sw.rows[0].changed_keys.empty());
    CHECK(sw.rows[1].changed_keys == std::vector<std::string>{"bank.kind"});
    CHECK(sw.rows[1].aggregate.n == 1);
}

TEST_CASE("report formats") {
    const auto r = run(quick("0"));
    const auto& s = r.seeds[0].score;
    const auto j = to_json(s);
    CHECK(j["summary"]["config_hash"] == r.config_hash);
    CHECK(j["samples"].size() == s.scores.size());
    std::vector<std::string> keys;
    for (auto it = j["samples"][0].begin(); it != j["samples"][0].end(); ++it) keys.push_back(it.key());
    CHECK(keys.front() == "id");
    const auto csv = render(s, ReportFormat::Csv);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) >= s.scores.size() + 1);
    const auto md = render(r, ReportFormat::Markdown);
    CHECK(md.find("±") != std::string::npos);
    CHECK(render(r, ReportFormat::Json) == render(run(quick("0")), ReportFormat::Json));
    CHECK(parse_report_format("md") == ReportFormat::Markdown);
    CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
}

TEST_CASE("checkpoint round-trip reproduces scores") {
    const auto dir = scratch_dir("ckpt");
    auto cfg = quick("2");
    const auto data = load_dataset(cfg, 2);
    const FittedModel fm = fit(cfg, data, 2);
    const auto path = (dir / "model.json").string();
    save_checkpoint(path, cfg, 2, *fm.model);
    const auto loaded = load_checkpoint(path);
    CHECK(loaded.seed == 2);
    CHECK(config_hash(loaded.config) == config_hash(cfg));
    const auto bank = make_bank(cfg, 3, 2);
    const auto a = score_validation(cfg, *fm.model, fm.split, bank, 2);
    const auto b = score_validation(loaded.config, *loaded.model, fm.split, bank, 2);
    CHECK(a.scores == b.scores);

    CHECK_THROWS_AS(load_checkpoint((dir / "missing.json").string()), IoError);
    std::ofstream(dir / "bad.json") << "{\"format\": 1";
    CHECK_THROWS_AS(load_checkpoint((dir / "bad.json").string()), FormatError);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
