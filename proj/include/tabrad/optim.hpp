#pragma once

#include <memory>
#include <vector>

#include "tabrad/tensor.hpp"

namespace tabrad {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    /// Applies one update from the gradients currently stored on the
    /// parameters. Throws NumericError on a non-finite gradient.
    virtual void step() = 0;
    virtual const std::vector<Tensor>& parameters() const = 0;
};

struct LambConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    double weight_decay = 0.0;
    double trust_clip = 10.0;
};

/// Adam-style moments per parameter tensor, with the step for each tensor
/// scaled by the trust ratio ||w|| / ||update||, clipped to [0, trust_clip].
/// The ratio is 1 when either norm is zero.
struct LambState {
    std::vector<std::vector<double>> m, v;
    std::size_t t = 0;
};

void lamb_step(std::vector<Tensor>& params, LambState& state, const LambConfig& cfg);

class Lamb final : public Optimizer {
public:
    Lamb(std::vector<Tensor> params, const LambConfig& cfg);
    void step() override;
    const std::vector<Tensor>& parameters() const override { return params_; }
    const LambState& state() const { return state_; }

private:
    std::vector<Tensor> params_;
    LambConfig cfg_;
    LambState state_;
};

/// Every `k` inner steps: slow += alpha * (fast - slow); fast = slow.
class Lookahead final : public Optimizer {
public:
    Lookahead(std::unique_ptr<Optimizer> inner, double alpha = 0.5, std::size_t k = 6);
    void step() override;
    const std::vector<Tensor>& parameters() const override { return inner_->parameters(); }
    const std::vector<std::vector<double>>& slow_weights() const { return slow_; }
    std::size_t steps() const { return steps_; }

private:
    std::unique_ptr<Optimizer> inner_;
    double alpha_;
    std::size_t k_;
    std::size_t steps_ = 0;
    std::vector<std::vector<double>> slow_;
};

}  // namespace tabrad
