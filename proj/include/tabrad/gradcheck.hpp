#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tabrad/tensor.hpp"

namespace tabrad {

struct GradCheckResult {
    bool passed = false;
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    std::size_t refined_entries = 0;
};

/// Compares reverse-mode gradients of `f` (scalar-valued) with respect to
/// every tensor in `inputs` against central differences with step `h`.
///
/// Relative error of one entry is |analytic - numeric| / max(|analytic|,
/// |numeric|, 1e-4); the floor keeps round-off on near-zero gradients from
/// registering as large relative errors. An entry that fails at `h` is
/// re-measured at h/100, h/1000 and h/10000, keeping the best agreement: a
/// ReLU kink or a top-k boundary lying within `h` of the point corrupts the
/// wide differences only, while a wrong analytic gradient fails at every
/// step. `f` must recompute from the current values of `inputs`, which are
/// perturbed in place and restored.
/// Throws NumericError when f produces a non-finite value.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double tol,
                           double h = 1e-5);

/// Single-input convenience form.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double tol,
                           double h = 1e-5);

}  // namespace tabrad

namespace tabrad {

struct GradCheckCase {
    std::string name;
    bool passed = false;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t trials = 0;
    std::size_t entries_checked = 0;
    std::size_t refined_entries = 0;
};

/// Every differentiable primitive on `trials` random inputs each.
std::vector<GradCheckCase> check_primitives(std::size_t trials, std::uint64_t seed, double tol = 1e-4);

/// Tiny reconstructor (d=3 with one categorical feature, e=8, one layer)
/// under each retrieval kind, gradients with respect to every parameter.
std::vector<GradCheckCase> check_composite(std::size_t trials, std::uint64_t seed, double tol = 1e-3);

}  // namespace tabrad
