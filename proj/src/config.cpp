#include "tabrad/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "tabrad/errors.hpp"

namespace tabrad {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

long long parse_integer(const std::string& s) {
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("not an integer: '" + s + "'");
    return v;
}

std::size_t parse_count(const std::string& s) {
    const long long v = parse_integer(s);
    if (v < 0) throw ConfigError("expected a non-negative integer, got '" + s + "'");
    return static_cast<std::size_t>(v);
}

bool is_unset(const std::string& s) { return s.empty() || s == "auto" || s == "none"; }

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto dash = item.find('-', 1);
        if (dash != std::string::npos) {
            const auto lo = parse_count(trim(item.substr(0, dash)));
            const auto hi = parse_count(trim(item.substr(dash + 1)));
            if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
            for (auto v = lo; v <= hi; ++v) out.push_back(v);
        } else {
            out.push_back(parse_count(item));
        }
    }
    if (out.empty()) throw ConfigError("seed list is empty");
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"dataset", [](auto& c, const auto& v) { c.dataset = v; }},
        {"schema", [](auto& c, const auto& v) { c.schema = is_unset(v) ? "" : v; }},
        {"label_column", [](auto& c, const auto& v) { c.label_column = v; }},
        {"method",
         [](auto& c, const auto& v) {
             if (v == "transformer") c.method = Method::Transformer;
             else if (v == "mask_knn") c.method = Method::MaskKnn;
             else throw ConfigError("unknown method '" + v + "'");
         }},
        {"seeds", [](auto& c, const auto& v) { c.seeds = parse_seed_list(v); }},
        {"output", [](auto& c, const auto& v) { c.output = v; }},
        {"model.hidden_dim", [](auto& c, const auto& v) { c.model.hidden_dim = parse_count(v); }},
        {"model.num_layers", [](auto& c, const auto& v) { c.model.num_layers = parse_count(v); }},
        {"model.num_heads", [](auto& c, const auto& v) { c.model.num_heads = parse_count(v); }},
        {"model.p_mask", [](auto& c, const auto& v) { c.model.p_mask = parse_double(v); }},
        {"model.dropout", [](auto& c, const auto& v) { c.model.dropout_p = parse_double(v); }},
        {"model.feedforward_multiplier", [](auto& c, const auto& v) { c.model.feedforward_multiplier = parse_count(v); }},
        {"model.layernorm_eps", [](auto& c, const auto& v) { c.model.layernorm_eps = parse_double(v); }},
        {"train.learning_rate", [](auto& c, const auto& v) { c.train.learning_rate = parse_double(v); }},
        {"train.beta1", [](auto& c, const auto& v) { c.train.beta1 = parse_double(v); }},
        {"train.beta2", [](auto& c, const auto& v) { c.train.beta2 = parse_double(v); }},
        {"train.lamb_eps", [](auto& c, const auto& v) { c.train.lamb_eps = parse_double(v); }},
        {"train.trust_clip", [](auto& c, const auto& v) { c.train.trust_clip = parse_double(v); }},
        {"train.lookahead_alpha", [](auto& c, const auto& v) { c.train.lookahead_alpha = parse_double(v); }},
        {"train.lookahead_k", [](auto& c, const auto& v) { c.train.lookahead_k = parse_count(v); }},
        {"train.batch_size", [](auto& c, const auto& v) { c.train.batch_size = static_cast<long>(parse_integer(v)); }},
        {"train.patience_epochs", [](auto& c, const auto& v) { c.train.patience_epochs = parse_count(v); }},
        {"train.max_epochs", [](auto& c, const auto& v) { c.train.max_epochs = parse_count(v); }},
        {"train.unmasked_fraction", [](auto& c, const auto& v) { c.train.unmasked_fraction = parse_double(v); }},
        {"retrieval.kind", [](auto& c, const auto& v) { c.retrieval.kind = parse_retrieval_kind(v); }},
        {"retrieval.k",
         [](auto& c, const auto& v) {
             if (is_unset(v)) c.retrieval.k.reset();
             else c.retrieval.k = static_cast<int>(parse_integer(v));
         }},
        {"retrieval.lambda", [](auto& c, const auto& v) { c.retrieval.lambda = parse_double(v); }},
        {"retrieval.location", [](auto& c, const auto& v) { c.retrieval.location = parse_location(v); }},
        {"retrieval.agg_location", [](auto& c, const auto& v) { c.retrieval.agg_location = parse_location(v); }},
        {"retrieval.candidate_cap",
         [](auto& c, const auto& v) {
             if (is_unset(v)) c.retrieval.candidate_cap.reset();
             else c.retrieval.candidate_cap = parse_count(v);
         }},
        {"retrieval.temperature", [](auto& c, const auto& v) { c.retrieval.temperature = parse_double(v); }},
        {"bank.kind", [](auto& c, const auto& v) { c.bank.kind = parse_bank_kind(v); }},
        {"bank.r", [](auto& c, const auto& v) { c.bank.r = parse_count(v); }},
        {"bank.count",
         [](auto& c, const auto& v) {
             if (is_unset(v)) c.bank.count.reset();
             else c.bank.count = parse_count(v);
         }},
        {"bank.p_mask",
         [](auto& c, const auto& v) {
             if (is_unset(v)) c.bank.p_mask.reset();
             else c.bank.p_mask = parse_double(v);
         }},
        {"bank.seed",
         [](auto& c, const auto& v) {
             if (is_unset(v)) c.bank.seed.reset();
             else c.bank.seed = parse_count(v);
         }},
        {"mask_knn.neighbor_count", [](auto& c, const auto& v) { c.mask_knn.neighbor_count = parse_count(v); }},
    };
    return table;
}

template <class T>
std::string opt_str(const std::optional<T>& v) {
    if (!v) return "auto";
    if constexpr (std::is_floating_point_v<T>) return format_double(*v);
    else return std::to_string(*v);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const char* to_string(Method m) { return m == Method::Transformer ? "transformer" : "mask_knn"; }

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::stringstream ss(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw FormatError("unterminated section header", lineno);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("expected 'key = value'", lineno);
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw FormatError("empty key", lineno);
        if (!section.empty()) key = section + "." + key;
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_key_values(buf.str());
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.retrieval.kind = RetrievalKind::AttentionBsim;
    return c;
}

ExperimentConfig synthetic_preset() {
    ExperimentConfig c = default_config();
    c.dataset = "synthetic";
    c.model.num_heads = 2;
    c.retrieval.k = 500;
    c.seeds = {0, 1, 2, 3, 4};
    return c;
}

void apply_overrides(ExperimentConfig& cfg, const KeyValues& kv) {
    std::vector<std::string> problems;
    const auto& table = setters();
    for (const auto& [key, value] : kv) {
        const auto it = table.find(key);
        if (it == table.end()) {
            problems.push_back(key + ": unknown key");
            continue;
        }
        try {
            it->second(cfg, value);
        } catch (const Error& e) {
            problems.push_back(key + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid configuration";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    validate(cfg);
}

void validate(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    auto check = [&](const std::function<void()>& f) {
        try {
            f();
        } catch (const ConfigError& e) {
            problems.push_back(e.what());
        }
    };
    check([&] { validate(cfg.model); });
    check([&] { validate(cfg.train); });
    check([&] { validate(cfg.retrieval); });
    if (cfg.dataset.empty()) problems.push_back("dataset must be 'synthetic' or a CSV path");
    if (cfg.seeds.empty()) problems.push_back("seeds must not be empty");
    if (cfg.bank.r < 1) problems.push_back("bank.r must be >= 1");
    if (cfg.bank.count && *cfg.bank.count == 0) problems.push_back("bank.count must be positive");
    if (cfg.bank.p_mask && !(*cfg.bank.p_mask > 0.0 && *cfg.bank.p_mask < 1.0))
        problems.push_back("bank.p_mask must lie in (0,1)");
    if (cfg.mask_knn.neighbor_count == 0) problems.push_back("mask_knn.neighbor_count must be positive");
    if (!problems.empty()) {
        std::string msg = "invalid configuration";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
}

KeyValues to_key_values(const ExperimentConfig& c) {
    KeyValues kv;
    kv["dataset"] = c.dataset;
    kv["schema"] = c.schema.empty() ? "none" : c.schema;
    kv["label_column"] = c.label_column;
    kv["method"] = to_string(c.method);
    std::string seeds;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(c.seeds[i]);
    kv["seeds"] = seeds;
    kv["output"] = c.output;
    kv["model.hidden_dim"] = std::to_string(c.model.hidden_dim);
    kv["model.num_layers"] = std::to_string(c.model.num_layers);
    kv["model.num_heads"] = std::to_string(c.model.num_heads);
    kv["model.p_mask"] = format_double(c.model.p_mask);
    kv["model.dropout"] = format_double(c.model.dropout_p);
    kv["model.feedforward_multiplier"] = std::to_string(c.model.feedforward_multiplier);
    kv["model.layernorm_eps"] = format_double(c.model.layernorm_eps);
    kv["train.learning_rate"] = format_double(c.train.learning_rate);
    kv["train.beta1"] = format_double(c.train.beta1);
    kv["train.beta2"] = format_double(c.train.beta2);
    kv["train.lamb_eps"] = format_double(c.train.lamb_eps);
    kv["train.trust_clip"] = format_double(c.train.trust_clip);
    kv["train.lookahead_alpha"] = format_double(c.train.lookahead_alpha);
    kv["train.lookahead_k"] = std::to_string(c.train.lookahead_k);
    kv["train.batch_size"] = std::to_string(c.train.batch_size);
    kv["train.patience_epochs"] = std::to_string(c.train.patience_epochs);
    kv["train.max_epochs"] = std::to_string(c.train.max_epochs);
    kv["train.unmasked_fraction"] = format_double(c.train.unmasked_fraction);
    kv["retrieval.kind"] = to_string(c.retrieval.kind);
    kv["retrieval.k"] = opt_str(c.retrieval.k);
    kv["retrieval.lambda"] = format_double(c.retrieval.lambda);
    kv["retrieval.location"] = to_string(c.retrieval.location);
    kv["retrieval.agg_location"] = to_string(c.retrieval.agg_location);
    kv["retrieval.candidate_cap"] = opt_str(c.retrieval.candidate_cap);
    kv["retrieval.temperature"] = format_double(c.retrieval.temperature);
    kv["bank.kind"] = to_string(c.bank.kind);
    kv["bank.r"] = std::to_string(c.bank.r);
    kv["bank.count"] = opt_str(c.bank.count);
    kv["bank.p_mask"] = opt_str(c.bank.p_mask);
    kv["bank.seed"] = opt_str(c.bank.seed);
    kv["mask_knn.neighbor_count"] = std::to_string(c.mask_knn.neighbor_count);
    return kv;
}

std::string serialize(const ExperimentConfig& cfg) {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    for (const auto& [key, value] : to_key_values(cfg)) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) sections[""].emplace_back(key, value);
        else sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), value);
    }
    std::string out;
    for (const auto& [name, entries] : sections) {
        if (!name.empty()) out += "\n[" + name + "]\n";
        for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    }
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
    auto kv = to_key_values(cfg);
    kv.erase("output");
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    for (const auto& [k, v] : kv) {
        mix(k);
        mix(v);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b) {
    const auto ka = to_key_values(a);
    const auto kb = to_key_values(b);
    std::vector<std::string> out;
    for (const auto& [k, v] : ka)
        if (kb.at(k) != v) out.push_back(k);
    return out;
}

}  // namespace tabrad
