#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tabrad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One record of the computation tape. Nodes are created in program order and
// carry a monotonically increasing id, so every node's inputs precede it.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::span<double> ensure_grad();
    bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

/// Dense row-major tensor of doubles with optional gradient tracking.
///
/// Tensors are handles: copying a Tensor shares the underlying storage, the
/// same way a graph edge refers to a value. Use clone() for a deep copy.
class Tensor {
public:
    Tensor();
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double fill, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    /// Direct write access; intended for leaves (parameters, inputs).
    std::span<double> mutable_values() { return node_->value; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient buffer; all zeros when nothing has been accumulated yet.
    std::vector<double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    /// Deep copy detached from any tape.
    Tensor clone(bool requires_grad = false) const;
    /// Same values, no history.
    Tensor detach() const { return clone(false); }

    detail::Node& node() const { return *node_; }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Whether new operations are recorded on the tape (thread-local).
bool grad_enabled();

/// Disables recording for its lifetime; evaluation paths use it to avoid
/// holding intermediate buffers.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Reverse-mode sweep from a scalar root.
///
/// Gradient contract: leaf gradients ACCUMULATE across calls (`+=`), exactly
/// like repeated optimizer micro-batches; intermediate-node gradients are
/// reset at the start of every call. Calling backward twice on the same graph
/// therefore doubles every leaf gradient. Call Tensor::zero_grad() (or
/// zero_grads()) to reset leaves.
void backward(const Tensor& root);

void zero_grads(std::span<Tensor> tensors);

namespace detail {

/// Builds an op output. When gradients are enabled and any input requires
/// them, the node records `inputs` as parents and keeps `fn` for backward.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> fn);

}  // namespace detail

}  // namespace tabrad
