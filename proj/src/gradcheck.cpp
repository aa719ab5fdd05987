#include "tabrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tabrad/errors.hpp"

namespace tabrad {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
    NoGradGuard guard;
    const double v = f().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
    return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double tol, double h) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tensor root = f();
    if (!std::isfinite(root.item())) throw NumericError("grad_check: function value is not finite");
    backward(root);

    GradCheckResult result;
    for (auto& t : inputs) {
        const auto analytic = t.grad();
        auto vals = t.mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            auto central = [&](double step) {
                vals[i] = orig + step;
                const double up = eval_scalar(f);
                vals[i] = orig - step;
                const double down = eval_scalar(f);
                vals[i] = orig;
                return (up - down) / (2.0 * step);
            };
            auto rel = [&](double numeric) {
                const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-4});
                return std::abs(analytic[i] - numeric) / denom;
            };
            double err = rel(central(h));
            if (err >= tol) {
                ++result.refined_entries;
                for (double step = h * 1e-2; err >= tol && step >= h * 1e-4; step *= 1e-1)
                    err = std::min(err, rel(central(step)));
            }
            result.max_rel_error = std::max(result.max_rel_error, err);
            ++result.entries_checked;
        }
        t.zero_grad();
    }
    result.passed = result.max_rel_error < tol;
    return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double tol, double h) {
    return grad_check([&] { return f(x); }, std::vector<Tensor>{x}, tol, h);
}

}  // namespace tabrad
