#include "dialectbert/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dialectbert {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (const std::size_t d : shape) {
        n *= d;
    }
    return n;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    for (const std::size_t d : shape) {
        if (d == 0) {
            throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(shape));
        }
    }
    if (values.size() != shape_numel(shape)) {
        throw std::invalid_argument("tensor data has " + std::to_string(values.size()) +
                                    " values but shape " + shape_str(shape) + " needs " +
                                    std::to_string(shape_numel(shape)));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

detail::Node& Tensor::node() const {
    if (!node_) {
        throw std::logic_error("use of an undefined tensor");
    }
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) {
        throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return node().data.size(); }

std::span<const double> Tensor::data() const { return node().data; }
std::span<double> Tensor::mutable_data() { return node().data; }
std::span<const double> Tensor::grad() const { return node().grad; }
std::span<double> Tensor::mutable_grad() { return node().ensure_grad(); }

double Tensor::item() const {
    if (numel() != 1) {
        throw std::invalid_argument("item() needs a single-element tensor, got shape " + shape_str(shape()));
    }
    return node().data[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool value) { node().requires_grad = value; }

void Tensor::zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const {
    return from(shape(), node().data, false);
}

Tensor Tensor::clone() const {
    return from(shape(), node().data, requires_grad());
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    const bool track = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                                     [](const Tensor& t) { return t.requires_grad(); });
    if (track) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& t : inputs) {
            node->parents.push_back(t.node_);
        }
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    detail::Node& root = node();
    if (root.data.size() != 1 || !root.shape.empty()) {
        throw std::invalid_argument("backward() needs a scalar loss, got shape " + shape_str(root.shape));
    }
    if (!root.requires_grad) {
        throw std::invalid_argument("backward() on a tensor that does not require grad");
    }

    // Iterative post-order DFS gives a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) {
                stack.emplace_back(p, 0);
            }
            continue;
        }
        order.push_back(n);
        stack.pop_back();
    }

    // Interior gradients are per-sweep; only leaves accumulate across calls.
    for (detail::Node* n : order) {
        if (n->backward) {
            n->grad.assign(n->data.size(), 0.0);
        }
    }
    root.ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
    }
}

}  // namespace dialectbert
