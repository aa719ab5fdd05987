#include <algorithm>
#include <cmath>
#include <random>

#include "tabrad/gradcheck.hpp"
#include "tabrad/model.hpp"
#include "tabrad/ops.hpp"

namespace tabrad {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = u(rng);
    Tensor t = Tensor::from(shape, std::move(v));
    t.set_requires_grad(true);
    return t;
}

// Values bounded away from zero so a finite-difference step never crosses
// the ReLU kink.
Tensor away_from_zero(const Shape& shape, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = sign(rng) ? u(rng) : -u(rng);
    Tensor t = Tensor::from(shape, std::move(v));
    t.set_requires_grad(true);
    return t;
}

// Random linear functional so that every output entry carries a distinct
// upstream gradient.
std::function<Tensor(const Tensor&)> projector(Rng& rng) {
    auto seed = rng();
    return [seed](const Tensor& out) {
        Rng r(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> w(out.size());
        for (auto& x : w) x = u(r);
        return sum(mul(out, Tensor::from(out.shape(), std::move(w))));
    };
}

using Builder = std::function<std::pair<std::function<Tensor()>, std::vector<Tensor>>(Rng&)>;

GradCheckCase run_case(const std::string& name, const Builder& build, std::size_t trials, std::uint64_t seed,
                       double tol, std::uint64_t stream) {
    GradCheckCase c;
    c.name = name;
    c.tolerance = tol;
    c.trials = trials;
    c.passed = true;
    Rng rng = make_rng(seed, stream);
    for (std::size_t t = 0; t < trials; ++t) {
        auto [f, inputs] = build(rng);
        const auto r = grad_check(f, inputs, tol);
        c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
        c.entries_checked += r.entries_checked;
        c.refined_entries += r.refined_entries;
        c.passed = c.passed && r.passed;
    }
    return c;
}

}  // namespace

std::vector<GradCheckCase> check_primitives(std::size_t trials, std::uint64_t seed, double tol) {
    std::vector<std::pair<std::string, Builder>> cases;
    auto unary = [&](const std::string& name, Shape shape, std::function<Tensor(const Tensor&)> op, bool kinked = false) {
        cases.emplace_back(name, [=](Rng& rng) {
            Tensor x = kinked ? away_from_zero(shape, rng) : random_tensor(shape, rng);
            auto proj = projector(rng);
            return std::make_pair(std::function<Tensor()>([=] { return proj(op(x)); }), std::vector<Tensor>{x});
        });
    };
    auto binary = [&](const std::string& name, Shape sa, Shape sb, std::function<Tensor(const Tensor&, const Tensor&)> op) {
        cases.emplace_back(name, [=](Rng& rng) {
            Tensor a = random_tensor(sa, rng), b = random_tensor(sb, rng);
            auto proj = projector(rng);
            return std::make_pair(std::function<Tensor()>([=] { return proj(op(a, b)); }), std::vector<Tensor>{a, b});
        });
    };

    binary("matmul", {3, 4}, {4, 5}, [](const Tensor& a, const Tensor& b) { return matmul(a, b); });
    binary("batched_matmul", {2, 3, 4}, {2, 4, 5}, [](const Tensor& a, const Tensor& b) { return batched_matmul(a, b); });
    binary("batched_matmul_transposed", {2, 3, 4}, {2, 5, 4},
           [](const Tensor& a, const Tensor& b) { return batched_matmul(a, b, true); });
    binary("add", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return add(a, b); });
    binary("add_broadcast", {2, 3, 4}, {4}, [](const Tensor& a, const Tensor& b) { return add(a, b); });
    binary("sub_broadcast", {3, 4}, {4}, [](const Tensor& a, const Tensor& b) { return sub(a, b); });
    binary("mul", {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
    binary("mul_broadcast", {2, 3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
    unary("scale", {3, 4}, [](const Tensor& a) { return scale(a, -1.7); });
    unary("square", {3, 4}, [](const Tensor& a) { return square(a); });
    unary("relu", {3, 4}, [](const Tensor& a) { return relu(a); }, true);
    unary("dropout", {3, 4}, [](const Tensor& a) {
        Rng r(7);
        return dropout(a, 0.3, true, r);
    });
    binary("concat_axis1", {3, 2}, {3, 4}, [](const Tensor& a, const Tensor& b) {
        const Tensor parts[] = {a, b};
        return concat(parts, 1);
    });
    binary("concat_axis0", {2, 3}, {4, 3}, [](const Tensor& a, const Tensor& b) {
        const Tensor parts[] = {a, b};
        return concat(parts, 0);
    });
    unary("slice", {3, 5, 2}, [](const Tensor& a) { return slice(a, 1, 1, 3); });
    unary("reshape", {3, 4}, [](const Tensor& a) { return reshape(a, {2, 6}); });
    unary("flatten", {2, 3, 2}, [](const Tensor& a) { return flatten(a); });
    unary("permute", {2, 3, 4}, [](const Tensor& a) {
        const std::size_t axes[] = {2, 0, 1};
        return permute(a, axes);
    });
    unary("sum", {3, 4}, [](const Tensor& a) { return sum(a); });
    unary("mean", {3, 4}, [](const Tensor& a) { return mean(a); });
    unary("squared_l2", {3, 4}, [](const Tensor& a) { return squared_l2(a); });
    unary("cross_entropy", {4, 5}, [](const Tensor& a) {
        const std::size_t targets[] = {0, 4, 2, 2};
        return cross_entropy(a, targets);
    });
    unary("cross_entropy_single", {5}, [](const Tensor& a) { return cross_entropy(a, std::size_t{3}); });
    unary("softmax_last", {3, 4}, [](const Tensor& a) { return softmax(a, 1); });
    unary("softmax_first", {3, 4}, [](const Tensor& a) { return softmax(a, 0); });
    unary("softmax_3d_middle", {2, 3, 4}, [](const Tensor& a) { return softmax(a, 1); });
    unary("masked_softmax", {3, 4}, [](const Tensor& a) {
        const std::uint8_t keep[] = {1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 1};
        return masked_softmax(a, keep);
    });
    cases.emplace_back("layernorm", [](Rng& rng) {
        Tensor x = random_tensor({4, 6}, rng), g = random_tensor({6}, rng, 0.5, 1.5), b = random_tensor({6}, rng);
        auto proj = projector(rng);
        return std::make_pair(std::function<Tensor()>([=] { return proj(layernorm(x, g, b)); }), std::vector<Tensor>{x, g, b});
    });
    unary("gather_rows", {4, 3}, [](const Tensor& a) {
        const std::size_t idx[] = {2, 0, 2, 3, 2};
        return gather_rows(a, idx);
    });
    binary("pairwise_sq_dist", {3, 4}, {5, 4}, [](const Tensor& a, const Tensor& b) { return pairwise_sq_dist(a, b); });
    binary("pairwise_diff", {3, 4}, {5, 4}, [](const Tensor& a, const Tensor& b) { return pairwise_diff(a, b); });

    std::vector<GradCheckCase> out;
    std::uint64_t stream = 100;
    for (const auto& [name, build] : cases) out.push_back(run_case(name, build, trials, seed, tol, stream++));
    return out;
}

std::vector<GradCheckCase> check_composite(std::size_t trials, std::uint64_t seed, double tol) {
    std::vector<ColumnSpec> columns(3);
    columns[0].name = "a";
    columns[1].name = "b";
    columns[2].name = "c";
    columns[2].kind = ColumnKind::Categorical;
    columns[2].cardinality = 3;
    columns[2].vocabulary = {"x", "y", "z"};

    const std::pair<const char*, RetrievalKind> kinds[] = {
        {"composite/none", RetrievalKind::None},
        {"composite/knn", RetrievalKind::Knn},
        {"composite/v_attention", RetrievalKind::VAttention},
        {"composite/attention_bsim", RetrievalKind::AttentionBsim},
        {"composite/attention_bsim_bval", RetrievalKind::AttentionBsimBval},
    };
    std::vector<GradCheckCase> out;
    std::uint64_t stream = 200;
    for (const auto& [name, kind] : kinds) {
        const RetrievalKind k = kind;
        Builder build = [columns, k](Rng& rng) {
            ModelConfig mc;
            mc.hidden_dim = 8;
            mc.num_layers = 1;
            mc.num_heads = 2;
            mc.init_seed = rng();
            RetrievalConfig rc;
            rc.kind = k;
            if (k == RetrievalKind::Knn) rc.k = 2;
            auto model = std::make_shared<ReconstructorModel>(columns, mc, rc);
            // Larger-than-default weights so that every parameter carries a
            // gradient well above the finite-difference noise floor.
            // Retrieval maps get a milder nudge: their scores are dot products
            // over d*e entries and saturate the softmax otherwise.
            for (auto& p : model->parameters()) {
                const bool retrieval = p.name.rfind("retrieval.", 0) == 0;
                std::normal_distribution<double> nd(0.0, retrieval ? 0.15 : 0.5);
                for (auto& v : p.tensor.mutable_values()) v += nd(rng);
            }
            const std::size_t n = 5;
            auto batch = std::make_shared<MaskedBatch>();
            batch->n = n;
            batch->d = 3;
            std::normal_distribution<double> nd(0.0, 1.0);
            std::uniform_int_distribution<int> cat(0, 2);
            for (std::size_t i = 0; i < n; ++i) {
                batch->values.push_back(nd(rng));
                batch->values.push_back(nd(rng));
                batch->values.push_back(cat(rng));
                std::uint8_t m[3] = {0, 0, 0};
                m[i % 3] = 1;
                if (i == 4) m[(i + 1) % 3] = 1;
                batch->masks.insert(batch->masks.end(), m, m + 3);
            }
            std::vector<Tensor> inputs;
            for (const auto& p : model->parameters()) inputs.push_back(p.tensor);
            std::function<Tensor()> f = [model, batch] {
                ForwardContext ctx;
                return masked_loss(model->forward(*batch, ctx), *batch, model->columns());
            };
            return std::make_pair(f, inputs);
        };
        out.push_back(run_case(name, build, trials, seed, tol, stream++));
    }
    return out;
}

}  // namespace tabrad
