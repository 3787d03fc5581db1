#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dialectbert {

class Rng;

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // reads this->grad, accumulates into parents

    std::vector<double>& ensure_grad() {
        if (grad.empty()) {
            grad.assign(data.size(), 0.0);
        }
        return grad;
    }
};

}  // namespace detail

/// Shared handle to a dense row-major f64 array that may take part in
/// reverse-mode differentiation. Copies share storage; use `clone()` for a deep copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    /// Empty when no gradient has been accumulated.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    void zero_grad();

    /// Leaf copy of the values with no history.
    Tensor detach() const;
    /// Deep copy, same requires_grad flag, no history, no gradient.
    Tensor clone() const;

    /// Reverse-mode sweep from a scalar. Gradients accumulate into every reachable
    /// tensor that requires grad.
    void backward() const;

    // Used by op implementations.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::vector<Tensor> inputs,
                              std::function<void(detail::Node&)> backward);
    detail::Node& node() const;

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// While alive, newly created op results record no history.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Ops. Every op rejects non-finite inputs and mismatched shapes with
// std::invalid_argument naming the op and the offending shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// [m,k] x [k,n] or batched [g,m,k] x [g,k,n]. With `transpose_b`, b is [n,k] / [g,n,k].
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);
/// x[..., in] x weight[in, out] + bias[out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& x, Shape shape);
Tensor swap_axes(const Tensor& x, std::size_t axis_a, std::size_t axis_b);

Tensor softmax(const Tensor& x);
/// Softmax over the last axis of scores [batch*heads, rows, keys]; keys with
/// key_mask[b*keys + k] == 0 get probability exactly 0 (an additive -inf bias).
Tensor masked_softmax(const Tensor& scores, std::span<const std::uint8_t> key_mask, std::size_t batch);

/// Normalizes the last axis to zero mean / unit variance, then gamma * y + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-12);
/// Exact erf-based GELU.
Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Rows of table [V, H] selected by ids -> [ids.size(), H].
Tensor embedding(const Tensor& table, std::span<const int> ids);
/// Rows of x [N, H] selected by indices -> [indices.size(), H].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);

/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

/// Mean cross-entropy of logits [N, C] over rows whose target is not `ignore_index`.
/// Returns a zero scalar when every row is ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index = -1);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace dialectbert
