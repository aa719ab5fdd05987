#include "tabrad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabrad/errors.hpp"

namespace tabrad {

using detail::make_result;
using detail::Node;

namespace {

// Gradient buffer of an input, or an empty span when it is not tracked.
std::span<double> grad_of(const Tensor& t) {
    if (!t.requires_grad()) return {};
    return t.node().ensure_grad();
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
    std::size_t n = 1;
    for (std::size_t i = from; i < to; ++i) n *= s[i];
    return n;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

bool is_suffix(const Shape& big, const Shape& small) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

enum class Binary { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
    require(is_suffix(a.shape(), b.shape()),
            std::string(name) + ": shape " + shape_str(b.shape()) + " does not broadcast to " + shape_str(a.shape()));
    const auto av = a.values();
    const auto bv = b.values();
    const std::size_t n = av.size(), bs = bv.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[i], y = bv[i % bs];
        out[i] = kind == Binary::Add ? x + y : kind == Binary::Sub ? x - y : x * y;
    }
    return make_result(a.shape(), std::move(out), {a, b}, [a, b, kind, bs](Node& self) {
        const auto& g = self.grad;
        auto ga = grad_of(a);
        auto gb = grad_of(b);
        const auto av = a.values();
        const auto bv = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            switch (kind) {
                case Binary::Add:
                    if (!ga.empty()) ga[i] += g[i];
                    if (!gb.empty()) gb[i % bs] += g[i];
                    break;
                case Binary::Sub:
                    if (!ga.empty()) ga[i] += g[i];
                    if (!gb.empty()) gb[i % bs] -= g[i];
                    break;
                case Binary::Mul:
                    if (!ga.empty()) ga[i] += g[i] * bv[i % bs];
                    if (!gb.empty()) gb[i % bs] += g[i] * av[i];
                    break;
            }
        }
    });
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                                                shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    require(b.dim(0) == k, "matmul inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = av[i * k + p];
            const double* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
    return make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Node& self) {
        const auto& g = self.grad;
        auto ga = grad_of(a);
        auto gb = grad_of(b);
        const auto av = a.values();
        const auto bv = b.values();
        if (!ga.empty()) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                    ga[i * k + p] += acc;
                }
        }
        if (!gb.empty()) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double s = av[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
                }
        }
    });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    require(a.rank() >= 2 && a.rank() == b.rank(), "batched_matmul rank mismatch: " + shape_str(a.shape()) + " x " +
                                                       shape_str(b.shape()));
    const std::size_t r = a.rank();
    for (std::size_t i = 0; i + 2 < r; ++i) require(a.dim(i) == b.dim(i), "batched_matmul batch dims differ");
    const std::size_t batch = prod(a.shape(), 0, r - 2);
    const std::size_t m = a.dim(r - 2), k = a.dim(r - 1);
    const std::size_t n = transpose_b ? b.dim(r - 2) : b.dim(r - 1);
    require((transpose_b ? b.dim(r - 1) : b.dim(r - 2)) == k,
            "batched_matmul inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Shape out_shape = a.shape();
    out_shape[r - 1] = n;

    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(batch * m * n, 0.0);
    for (std::size_t t = 0; t < batch; ++t) {
        const double* A = av.data() + t * m * k;
        const double* B = bv.data() + t * k * n;
        double* C = out.data() + t * m * n;
        for (std::size_t i = 0; i < m; ++i) {
            if (transpose_b) {
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
                    C[i * n + j] = acc;
                }
            } else {
                for (std::size_t p = 0; p < k; ++p) {
                    const double s = A[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) C[i * n + j] += s * B[p * n + j];
                }
            }
        }
    }
    return make_result(std::move(out_shape), std::move(out), {a, b},
                       [a, b, batch, m, k, n, transpose_b](Node& self) {
        const auto& g = self.grad;
        auto ga = grad_of(a);
        auto gb = grad_of(b);
        const auto av = a.values();
        const auto bv = b.values();
        for (std::size_t t = 0; t < batch; ++t) {
            const double* A = av.data() + t * m * k;
            const double* B = bv.data() + t * k * n;
            const double* G = g.data() + t * m * n;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = G[i * n + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) {
                        const double bval = transpose_b ? B[j * k + p] : B[p * n + j];
                        if (!ga.empty()) ga[t * m * k + i * k + p] += gij * bval;
                        if (!gb.empty()) {
                            const std::size_t bi = transpose_b ? j * k + p : p * n + j;
                            gb[t * k * n + bi] += gij * A[i * k + p];
                        }
                    }
                }
            }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (auto& v : out) v *= factor;
    return make_result(a.shape(), std::move(out), {a}, [a, factor](Node& self) {
        auto ga = grad_of(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * self.grad[i];
    });
}

Tensor square(const Tensor& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (auto& v : out) v *= v;
    return make_result(a.shape(), std::move(out), {a}, [a](Node& self) {
        auto ga = grad_of(a);
        const auto av = a.values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * av[i] * self.grad[i];
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.values().begin(), a.values().end());
    for (auto& v : out) v = v > 0.0 ? v : 0.0;
    return make_result(a.shape(), std::move(out), {a}, [a](Node& self) {
        auto ga = grad_of(a);
        const auto av = a.values();
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (av[i] > 0.0) ga[i] += self.grad[i];
    });
}

Tensor dropout(const Tensor& a, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must lie in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return a;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> factor(a.size());
    for (auto& f : factor) f = unif(rng) >= p ? keep_scale : 0.0;
    std::vector<double> out(a.size());
    const auto av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor[i];
    return make_result(a.shape(), std::move(out), {a}, [a, factor = std::move(factor)](Node& self) {
        auto ga = grad_of(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor[i] * self.grad[i];
    });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    require(!parts.empty(), "concat of zero tensors");
    const Shape& s0 = parts[0].shape();
    require(axis < s0.size(), "concat axis out of range");
    const std::size_t outer = prod(s0, 0, axis), inner = prod(s0, axis + 1, s0.size());
    std::size_t total = 0;
    std::vector<std::size_t> lens;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        require(s.size() == s0.size(), "concat rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis) require(s[i] == s0[i], "concat shape mismatch: " + shape_str(s) + " vs " + shape_str(s0));
        lens.push_back(s[axis]);
        total += s[axis];
    }
    Shape out_shape = s0;
    out_shape[axis] = total;
    std::vector<double> out(outer * total * inner);
    std::size_t offset = 0;
    for (std::size_t q = 0; q < parts.size(); ++q) {
        const auto pv = parts[q].values();
        const std::size_t block = lens[q] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pv.data() + o * block, block, out.data() + (o * total + offset) * inner);
        offset += lens[q];
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return make_result(std::move(out_shape), std::move(out), inputs,
                       [inputs, lens, outer, inner, total](Node& self) {
        std::size_t offset = 0;
        for (std::size_t q = 0; q < inputs.size(); ++q) {
            auto gp = grad_of(inputs[q]);
            const std::size_t block = lens[q] * inner;
            if (!gp.empty()) {
                for (std::size_t o = 0; o < outer; ++o) {
                    const double* src = self.grad.data() + (o * total + offset) * inner;
                    for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += src[i];
                }
            }
            offset += lens[q];
        }
    });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
    require(axis < a.rank(), "slice axis out of range");
    const std::size_t full = a.dim(axis);
    require(start + length <= full && length > 0, "slice range out of bounds for " + shape_str(a.shape()));
    const std::size_t outer = prod(a.shape(), 0, axis), inner = prod(a.shape(), axis + 1, a.rank());
    Shape out_shape = a.shape();
    out_shape[axis] = length;
    std::vector<double> out(outer * length * inner);
    const auto av = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(av.data() + (o * full + start) * inner, length * inner, out.data() + o * length * inner);
    return make_result(std::move(out_shape), std::move(out), {a}, [a, outer, inner, full, start, length](Node& self) {
        auto ga = grad_of(a);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < length * inner; ++i)
                ga[(o * full + start) * inner + i] += self.grad[o * length * inner + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    require(shape_size(shape) == a.size(), "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    std::vector<double> out(a.values().begin(), a.values().end());
    return make_result(std::move(shape), std::move(out), {a}, [a](Node& self) {
        auto ga = grad_of(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

Tensor flatten(const Tensor& a) { return reshape(a, {a.size()}); }

Tensor permute(const Tensor& a, std::span<const std::size_t> axes) {
    const std::size_t r = a.rank();
    require(axes.size() == r, "permute needs one axis per dimension");
    std::vector<bool> used(r, false);
    for (auto ax : axes) {
        require(ax < r && !used[ax], "permute axes are not a permutation");
        used[ax] = true;
    }
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.dim(i);
    Shape out_shape(r);
    std::vector<std::size_t> strides(r);  // input stride for each output axis
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = a.dim(axes[i]);
        strides[i] = in_strides[axes[i]];
    }
    // src[i] is the input offset of output element i.
    std::vector<std::size_t> src(a.size());
    std::vector<std::size_t> counter(r, 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        src[i] = offset;
        for (std::size_t ax = r; ax-- > 0;) {
            offset += strides[ax];
            if (++counter[ax] < out_shape[ax]) break;
            offset -= strides[ax] * out_shape[ax];
            counter[ax] = 0;
        }
    }
    std::vector<double> out(a.size());
    const auto av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[src[i]];
    return make_result(std::move(out_shape), std::move(out), {a}, [a, src = std::move(src)](Node& self) {
        auto ga = grad_of(a);
        for (std::size_t i = 0; i < src.size(); ++i) ga[src[i]] += self.grad[i];
    });
}

Tensor sum(const Tensor& a) {
    const auto av = a.values();
    const double s = std::accumulate(av.begin(), av.end(), 0.0);
    return make_result({1}, {s}, {a}, [a](Node& self) {
        auto ga = grad_of(a);
        for (auto& g : ga) g += self.grad[0];
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor squared_l2(const Tensor& a) { return sum(square(a)); }

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
    require(logits.rank() == 2, "cross_entropy expects [n,c] logits, got " + shape_str(logits.shape()));
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    require(targets.size() == n, "cross_entropy: one target per row required");
    const auto lv = logits.values();
    std::vector<double> probs(n * c);
    std::vector<double> out(n);
    std::vector<std::size_t> tgt(targets.begin(), targets.end());
    for (std::size_t i = 0; i < n; ++i) {
        if (tgt[i] >= c) throw ContractError("cross_entropy target " + std::to_string(tgt[i]) + " >= classes " +
                                             std::to_string(c));
        const double* row = lv.data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - mx) / z;
        out[i] = mx + std::log(z) - row[tgt[i]];
    }
    return make_result({n}, std::move(out), {logits},
                       [logits, probs = std::move(probs), tgt = std::move(tgt), c](Node& self) {
        auto gl = grad_of(logits);
        for (std::size_t i = 0; i < tgt.size(); ++i) {
            const double g = self.grad[i];
            for (std::size_t j = 0; j < c; ++j)
                gl[i * c + j] += g * (probs[i * c + j] - (j == tgt[i] ? 1.0 : 0.0));
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    const std::size_t t[1] = {target};
    return cross_entropy(reshape(logits, {1, logits.size()}), t);
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    require(axis < a.rank(), "softmax axis out of range");
    const std::size_t len = a.dim(axis);
    const std::size_t outer = prod(a.shape(), 0, axis), inner = prod(a.shape(), axis + 1, a.rank());
    const auto av = a.values();
    for (double v : av)
        if (!std::isfinite(v)) throw NumericError("softmax received a non-finite input");
    std::vector<double> out(a.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, av[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(av[base + j * inner] - mx);
                out[base + j * inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= z;
        }
    return make_result(a.shape(), std::move(out), {a}, [a, outer, inner, len](Node& self) {
        auto ga = grad_of(a);
        const auto& y = self.value;
        const auto& g = self.grad;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t idx = base + j * inner;
                    ga[idx] += y[idx] * (g[idx] - dot);
                }
            }
    });
}

Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> keep) {
    require(a.rank() == 2, "masked_softmax expects [n,m] scores");
    require(keep.size() == a.size(), "masked_softmax mask size mismatch");
    const std::size_t n = a.dim(0), m = a.dim(1);
    const auto av = a.values();
    std::vector<double> out(a.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j)
            if (keep[i * m + j]) {
                const double v = av[i * m + j];
                if (!std::isfinite(v)) throw NumericError("masked_softmax received a non-finite score");
                mx = std::max(mx, v);
            }
        if (!std::isfinite(mx)) continue;
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (keep[i * m + j]) z += (out[i * m + j] = std::exp(av[i * m + j] - mx));
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= z;
    }
    return make_result(a.shape(), std::move(out), {a}, [a, n, m](Node& self) {
        auto ga = grad_of(a);
        const auto& y = self.value;
        const auto& g = self.grad;
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * y[i * m + j];
            for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += y[i * m + j] * (g[i * m + j] - dot);
        }
    });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require(x.rank() >= 1, "layernorm of a scalar");
    const std::size_t e = x.dim(x.rank() - 1);
    require(gain.size() == e && bias.size() == e, "layernorm gain/bias must have the trailing size " + std::to_string(e));
    if (eps <= 0.0) throw ContractError("layernorm eps must be positive");
    const std::size_t rows = x.size() / e;
    const auto xv = x.values();
    const auto gv = gain.values();
    const auto bv = bias.values();
    std::vector<double> xhat(x.size()), inv(rows), out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * e;
        double mu = 0.0;
        for (std::size_t j = 0; j < e; ++j) mu += row[j];
        mu /= static_cast<double>(e);
        double var = 0.0;
        for (std::size_t j = 0; j < e; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(e);
        inv[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < e; ++j) {
            xhat[r * e + j] = (row[j] - mu) * inv[r];
            out[r * e + j] = xhat[r * e + j] * gv[j] + bv[j];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gain, bias},
                       [x, gain, bias, xhat = std::move(xhat), inv = std::move(inv), rows, e](Node& self) {
        auto gx = grad_of(x);
        auto gg = grad_of(gain);
        auto gb = grad_of(bias);
        const auto gv = gain.values();
        const auto& g = self.grad;
        std::vector<double> dxhat(e);
        for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < e; ++j) {
                const std::size_t i = r * e + j;
                if (!gg.empty()) gg[j] += g[i] * xhat[i];
                if (!gb.empty()) gb[j] += g[i];
                dxhat[j] = g[i] * gv[j];
                s1 += dxhat[j];
                s2 += dxhat[j] * xhat[i];
            }
            if (gx.empty()) continue;
            const double ne = static_cast<double>(e);
            for (std::size_t j = 0; j < e; ++j) {
                const std::size_t i = r * e + j;
                gx[i] += inv[r] / ne * (ne * dxhat[j] - s1 - xhat[i] * s2);
            }
        }
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> idx) {
    require(table.rank() == 2, "gather_rows expects a [r,e] table");
    const std::size_t r = table.dim(0), e = table.dim(1);
    std::vector<std::size_t> rows(idx.begin(), idx.end());
    std::vector<double> out(rows.size() * e);
    const auto tv = table.values();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= r) throw DimensionError("gather_rows index out of range");
        std::copy_n(tv.data() + rows[i] * e, e, out.data() + i * e);
    }
    const std::size_t count = rows.size();
    return make_result({count, e}, std::move(out), {table}, [table, rows = std::move(rows), e](Node& self) {
        auto gt = grad_of(table);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < e; ++j) gt[rows[i] * e + j] += self.grad[i * e + j];
    });
}

Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
            "pairwise_sq_dist expects [n,D] and [m,D], got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t n = a.dim(0), m = b.dim(0), D = a.dim(1);
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                const double diff = av[i * D + d] - bv[j * D + d];
                acc += diff * diff;
            }
            out[i * m + j] = acc;
        }
    return make_result({n, m}, std::move(out), {a, b}, [a, b, n, m, D](Node& self) {
        auto ga = grad_of(a);
        auto gb = grad_of(b);
        const auto av = a.values();
        const auto bv = b.values();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double g = self.grad[i * m + j];
                if (g == 0.0) continue;
                for (std::size_t d = 0; d < D; ++d) {
                    const double t = 2.0 * g * (av[i * D + d] - bv[j * D + d]);
                    if (!ga.empty()) ga[i * D + d] += t;
                    if (!gb.empty()) gb[j * D + d] -= t;
                }
            }
    });
}

Tensor pairwise_diff(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
            "pairwise_diff expects [n,D] and [m,D], got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t n = a.dim(0), m = b.dim(0), D = a.dim(1);
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(n * m * D);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t d = 0; d < D; ++d) out[(i * m + j) * D + d] = av[i * D + d] - bv[j * D + d];
    return make_result({n, m, D}, std::move(out), {a, b}, [a, b, n, m, D](Node& self) {
        auto ga = grad_of(a);
        auto gb = grad_of(b);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t d = 0; d < D; ++d) {
                    const double g = self.grad[(i * m + j) * D + d];
                    if (!ga.empty()) ga[i * D + d] += g;
                    if (!gb.empty()) gb[j * D + d] -= g;
                }
    });
}

}  // namespace tabrad
