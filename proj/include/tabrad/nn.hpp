#pragma once

#include <string>
#include <vector>

#include "tabrad/ops.hpp"

namespace tabrad {

/// Affine map y = x W + b with W stored [in, out].
struct Linear {
    Tensor weight;
    Tensor bias;  // [out]; unused when has_bias is false
    bool has_bias = true;

    Linear() = default;
    /// uniform(-1/sqrt(in), 1/sqrt(in)) initialization for weight and bias.
    Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }

    /// Applies to the trailing axis of x; leading axes are preserved.
    Tensor operator()(const Tensor& x) const;
};

struct NamedParameter {
    std::string name;
    Tensor tensor;
};

void collect(std::vector<NamedParameter>& out, const std::string& prefix, const Linear& layer);

}  // namespace tabrad
