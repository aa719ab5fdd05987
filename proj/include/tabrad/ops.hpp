#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tabrad/tensor.hpp"

namespace tabrad {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); streams keep consumers such as
/// masking, dropout and initialization from perturbing one another.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Differentiable operations. Every op validates shapes and throws
// DimensionError on mismatch; backward rules follow the standard definitions.

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [...,m,k] x [...,k,n] -> [...,m,n] with identical leading dims.
/// With transpose_b, b is read as [...,n,k].
Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

/// Elementwise; b may also have a shape equal to a trailing suffix of a's
/// shape, in which case it is broadcast over the leading dims.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);

/// Inverted dropout: surviving entries are scaled by 1/(1-p) in training,
/// identity (same values, no rng draws) otherwise.
Tensor dropout(const Tensor& a, double p, bool training, Rng& rng);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Contiguous range [start, start+length) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
Tensor permute(const Tensor& a, std::span<const std::size_t> axes);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Σ a_i²
Tensor squared_l2(const Tensor& a);

/// Row-wise cross-entropy of logits [n,c] against class indices -> [n].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
/// Single-row convenience: logits [c] -> [1].
Tensor cross_entropy(const Tensor& logits, std::size_t target);

/// Softmax along `axis` with max subtraction. Throws NumericError on
/// non-finite input.
Tensor softmax(const Tensor& a, std::size_t axis);
/// Row softmax of [n,m] restricted to entries where keep[i*m+j] != 0; the
/// remaining entries are exactly 0. A row with nothing kept is all zeros.
Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> keep);

/// Normalizes the trailing axis then applies gain/bias of shape [e].
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Rows of table[r,e] selected by index -> [idx.size(), e].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> idx);

/// [n,D], [m,D] -> [n,m] with entries ||a_i - b_j||².
Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b);
/// [n,D], [m,D] -> [n,m,D] with entries a_i - b_j.
Tensor pairwise_diff(const Tensor& a, const Tensor& b);

}  // namespace tabrad
