#include "tabrad/optim.hpp"

#include <algorithm>
#include <cmath>

#include "tabrad/errors.hpp"

namespace tabrad {

void lamb_step(std::vector<Tensor>& params, LambState& state, const LambConfig& cfg) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ContractError("LAMB state does not match the parameter list");
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    std::vector<double> update;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        const auto g = p.grad();
        auto w = p.mutable_values();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        update.assign(w.size(), 0.0);
        double w_norm = 0.0, u_norm = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(g[i])) throw NumericError("non-finite gradient in parameter tensor " + std::to_string(pi));
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            update[i] = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps) + cfg.weight_decay * w[i];
            w_norm += w[i] * w[i];
            u_norm += update[i] * update[i];
        }
        w_norm = std::sqrt(w_norm);
        u_norm = std::sqrt(u_norm);
        double trust = 1.0;
        if (w_norm > 0.0 && u_norm > 0.0) trust = std::clamp(w_norm / u_norm, 0.0, cfg.trust_clip);
        const double step = cfg.learning_rate * trust;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * update[i];
    }
}

Lamb::Lamb(std::vector<Tensor> params, const LambConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
        throw ConfigError("LAMB betas must lie in [0,1)");
    if (!(cfg_.eps > 0.0)) throw ConfigError("LAMB eps must be positive");
}

void Lamb::step() { lamb_step(params_, state_, cfg_); }

Lookahead::Lookahead(std::unique_ptr<Optimizer> inner, double alpha, std::size_t k)
    : inner_(std::move(inner)), alpha_(alpha), k_(k) {
    if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw ConfigError("lookahead alpha must lie in (0,1)");
    if (k_ < 1) throw ConfigError("lookahead k must be >= 1");
    for (const auto& p : inner_->parameters()) slow_.emplace_back(p.values().begin(), p.values().end());
}

void Lookahead::step() {
    inner_->step();
    if (++steps_ % k_ != 0) return;
    auto params = inner_->parameters();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto fast = params[pi].mutable_values();
        auto& slow = slow_[pi];
        for (std::size_t i = 0; i < fast.size(); ++i) {
            slow[i] += alpha_ * (fast[i] - slow[i]);
            fast[i] = slow[i];
        }
    }
}

}  // namespace tabrad
