#include "tabrad/nn.hpp"

#include <cmath>

#include "tabrad/errors.hpp"

namespace tabrad {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias) : has_bias(with_bias) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    std::vector<double> w(in * out);
    for (auto& v : w) v = unif(rng);
    weight = Tensor::from({in, out}, std::move(w), true);
    std::vector<double> b(out, 0.0);
    if (with_bias)
        for (auto& v : b) v = unif(rng);
    bias = Tensor::from({out}, std::move(b), with_bias);
}

Tensor Linear::operator()(const Tensor& x) const {
    const std::size_t in = in_features();
    if (x.dim(x.rank() - 1) != in)
        throw DimensionError("linear layer expects trailing size " + std::to_string(in) + ", got " + shape_str(x.shape()));
    Tensor y;
    if (x.rank() == 2) {
        y = matmul(x, weight);
    } else {
        Shape out_shape = x.shape();
        out_shape.back() = out_features();
        y = reshape(matmul(reshape(x, {x.size() / in, in}), weight), out_shape);
    }
    return has_bias ? add(y, bias) : y;
}

void collect(std::vector<NamedParameter>& out, const std::string& prefix, const Linear& layer) {
    out.push_back({prefix + ".weight", layer.weight});
    if (layer.has_bias) out.push_back({prefix + ".bias", layer.bias});
}

}  // namespace tabrad
