#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tabrad/config.hpp"
#include "tabrad/errors.hpp"
#include "tabrad/experiment.hpp"
#include "tabrad/gradcheck.hpp"
#include "tabrad/report.hpp"

namespace py = pybind11;
using namespace tabrad;

namespace {

py::dict score_dict(const ScoreReport& r) {
    py::dict d;
    d["scores"] = r.scores;
    d["labels"] = r.labels;
    d["subclass"] = r.subclass;
    d["predictions"] = r.predictions;
    d["threshold"] = r.threshold;
    d["f1"] = r.f1;
    d["auroc"] = r.auroc;
    d["per_class_share"] = r.per_class_share;
    d["mask_count"] = r.mask_count;
    d["seed"] = r.seed;
    d["config_hash"] = r.config_hash;
    return d;
}

py::dict mean_std_dict(const MeanStd& m) {
    py::dict d;
    d["mean"] = m.mean;
    d["std"] = m.std;
    return d;
}

py::dict aggregate_dict(const Aggregate& a) {
    py::dict d;
    d["n"] = a.n;
    d["failed"] = a.failed;
    d["f1"] = mean_std_dict(a.f1);
    d["auroc"] = mean_std_dict(a.auroc);
    py::dict share;
    for (const auto& [cls, m] : a.share) share[py::int_(cls)] = mean_std_dict(m);
    d["share"] = share;
    d["warnings"] = a.warnings;
    return d;
}

KeyValues to_key_values_arg(const py::dict& overrides) {
    KeyValues kv;
    for (const auto& [k, v] : overrides) kv[py::str(k)] = py::str(v);
    return kv;
}

}  // namespace

PYBIND11_MODULE(_tabrad, m) {
    m.doc() = "Masked-reconstruction anomaly detection for tabular data";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<MetricError>(m, "MetricError", base.ptr());

    py::class_<ExperimentConfig>(m, "Config")
        .def(py::init([](const std::string& preset, const py::dict& overrides) {
                 ExperimentConfig cfg = preset == "synthetic" ? synthetic_preset() : default_config();
                 if (preset != "synthetic" && preset != "default") throw ConfigError("unknown preset '" + preset + "'");
                 apply_overrides(cfg, to_key_values_arg(overrides));
                 return cfg;
             }),
             py::arg("preset") = "default", py::arg("overrides") = py::dict())
        .def_static("from_text", [](const std::string& text) {
            ExperimentConfig cfg = default_config();
            apply_overrides(cfg, parse_key_values(text));
            return cfg;
        })
        .def("with_overrides",
             [](const ExperimentConfig& c, const py::dict& overrides) {
                 ExperimentConfig out = c;
                 apply_overrides(out, to_key_values_arg(overrides));
                 return out;
             })
        .def("to_dict", [](const ExperimentConfig& c) { return to_key_values(c); })
        .def("serialize", [](const ExperimentConfig& c) { return serialize(c); })
        .def("hash", [](const ExperimentConfig& c) { return config_hash(c); })
        .def("diff", [](const ExperimentConfig& a, const ExperimentConfig& b) { return config_diff(a, b); })
        .def("__repr__", [](const ExperimentConfig& c) { return "<tabrad.Config " + config_hash(c) + ">"; });

    m.def("run", [](const ExperimentConfig& cfg) {
        RunResult r;
        {
            py::gil_scoped_release release;
            r = run(cfg);
        }
        py::dict out;
        out["config_hash"] = r.config_hash;
        py::list seeds;
        for (const auto& s : r.seeds) {
            py::dict d;
            d["seed"] = s.seed;
            d["ok"] = s.ok;
            d["error"] = s.error;
            if (s.ok) d["score"] = score_dict(s.score);
            seeds.append(d);
        }
        out["seeds"] = seeds;
        out["aggregate"] = aggregate_dict(r.aggregate);
        out["markdown"] = render(r, ReportFormat::Markdown);
        return out;
    }, py::arg("config"), "Train and score every seed of the config; returns per-seed scores and the aggregate.");

    m.def("sweep", [](const ExperimentConfig& cfg, const std::string& axis, const std::vector<std::string>& values) {
        SweepResult r;
        {
            py::gil_scoped_release release;
            r = sweep(cfg, parse_sweep_axis(axis), values);
        }
        py::list rows;
        for (const auto& row : r.rows) {
            py::dict d;
            d["value"] = row.value;
            d["not_applicable"] = row.not_applicable;
            d["note"] = row.note;
            d["changed_keys"] = row.changed_keys;
            d["aggregate"] = aggregate_dict(row.aggregate);
            rows.append(d);
        }
        return rows;
    }, py::arg("config"), py::arg("axis"), py::arg("values"));

    m.def("synthetic", [](std::uint64_t seed, bool noiseless) {
        const TabularDataset ds = generate(SyntheticSpec{}, seed, noiseless);
        py::dict d;
        std::vector<std::string> names;
        for (const auto& c : ds.columns) names.push_back(c.name);
        d["columns"] = names;
        d["rows"] = ds.rows;
        d["labels"] = ds.labels;
        d["subclass"] = ds.subclass;
        return d;
    }, py::arg("seed"), py::arg("noiseless") = false, "The three-feature synthetic dataset as plain lists.");

    m.def("deterministic_bank", [](std::size_t d, std::size_t r) {
        std::vector<std::vector<std::uint8_t>> out;
        for (const auto& mask : build_deterministic_bank(d, r).masks) out.push_back(mask.bits);
        return out;
    }, py::arg("d"), py::arg("r"));
    m.def("deterministic_bank_size", &deterministic_bank_size, py::arg("d"), py::arg("r"));

    m.def("threshold_and_predict", [](const std::vector<double>& scores, const std::vector<int>& labels) {
        const Thresholded t = threshold_and_predict(scores, labels);
        return py::make_tuple(t.threshold, t.predictions);
    }, py::arg("scores"), py::arg("labels"));
    m.def("f1_score", [](const std::vector<int>& p, const std::vector<int>& l) { return f1_score(p, l); },
          py::arg("predictions"), py::arg("labels"));
    m.def("auroc", [](const std::vector<double>& s, const std::vector<int>& l) { return auroc(s, l); },
          py::arg("scores"), py::arg("labels"));

    m.def("gradcheck", [](std::size_t trials, std::uint64_t seed) {
        std::vector<GradCheckCase> cases;
        {
            py::gil_scoped_release release;
            cases = check_primitives(trials, seed);
            auto comp = check_composite(trials, seed);
            cases.insert(cases.end(), comp.begin(), comp.end());
        }
        py::list out;
        for (const auto& c : cases) {
            py::dict d;
            d["name"] = c.name;
            d["passed"] = c.passed;
            d["max_rel_error"] = c.max_rel_error;
            d["tolerance"] = c.tolerance;
            out.append(d);
        }
        return out;
    }, py::arg("trials") = 3, py::arg("seed") = 0);
}
