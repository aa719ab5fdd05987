#include "tabrad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "tabrad/errors.hpp"

namespace tabrad {

namespace {

std::atomic<std::uint64_t> next_node_id{1};
thread_local bool tl_grad_enabled = true;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> value, bool requires_grad) {
    if (shape_size(shape) != value.size()) {
        throw DimensionError("tensor of shape " + shape_str(shape) + " cannot hold " +
                             std::to_string(value.size()) + " values");
    }
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

std::span<double> detail::Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor::Tensor() : node_(new_node({1}, {0.0}, false)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = shape_size(shape);
    return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
    auto n = shape_size(shape);
    return Tensor(new_node(std::move(shape), std::vector<double>(n, fill), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return node_->shape[axis];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
    return node_->grad;
}

Tensor Tensor::clone(bool requires_grad) const {
    return Tensor(new_node(node_->shape, node_->value, requires_grad));
}

bool grad_enabled() { return tl_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(tl_grad_enabled) { tl_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tl_grad_enabled = previous_; }

Tensor detail::make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                           std::function<void(Node&)> fn) {
    bool track = false;
    if (tl_grad_enabled) {
        for (const auto& t : inputs) track = track || t.requires_grad();
    }
    auto n = new_node(std::move(shape), std::move(value), track);
    if (track) {
        n->parents.reserve(inputs.size());
        for (auto& t : inputs) n->parents.push_back(t.node_ptr());
        n->backward_fn = std::move(fn);
    }
    return Tensor(std::move(n));
}

void backward(const Tensor& root) {
    if (root.size() != 1) throw ContractError("backward() requires a scalar root, got " + shape_str(root.shape()));
    if (!root.requires_grad()) throw ContractError("backward() root is not on the tape");

    // Collect the reachable subgraph; node ids give a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> stack{&root.node()};
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (auto& p : n->parents) {
            if (p->requires_grad) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id > b->id; });

    for (auto* n : order) {
        if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
    }
    root.node().ensure_grad()[0] += 1.0;
    for (auto* n : order) {
        if (n->backward_fn) n->backward_fn(*n);
    }
}

void zero_grads(std::span<Tensor> tensors) {
    for (auto& t : tensors) t.zero_grad();
}

}  // namespace tabrad
