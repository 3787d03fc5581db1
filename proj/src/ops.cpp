#include "dialectbert/rng.hpp"
#include "dialectbert/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dialectbert {

namespace {

using detail::Node;

void require_finite(const Tensor& t, const char* op) {
    for (const double v : t.data()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(op) + ": non-finite input in tensor of shape " +
                                        shape_str(t.shape()));
        }
    }
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                                shape_str(b));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        shape_error(op, a.shape(), b.shape());
    }
}

std::vector<double>* grad_of(Node& self, std::size_t parent) {
    Node& p = *self.parents[parent];
    return p.requires_grad ? &p.ensure_grad() : nullptr;
}

const std::vector<double>& data_of(Node& self, std::size_t parent) { return self.parents[parent]->data; }

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) {
                continue;
            }
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// C[m,n] += A[m,k] B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += arow[p] * brow[p];
            }
            crow[j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) {
                continue;
            }
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

std::size_t last_dim(const Tensor& t, const char* op) {
    if (t.rank() == 0) {
        throw std::invalid_argument(std::string(op) + ": needs at least one axis, got a scalar");
    }
    return t.shape().back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    require_finite(a, "add");
    require_finite(b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] + b.data()[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (auto* g = grad_of(self, p)) {
                for (std::size_t i = 0; i < g->size(); ++i) {
                    (*g)[i] += self.grad[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    require_finite(a, "sub");
    require_finite(b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] - b.data()[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i];
            }
        }
        if (auto* g = grad_of(self, 1)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] -= self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    require_finite(a, "mul");
    require_finite(b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.data()[i] * b.data()[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& av = data_of(self, 0);
        const auto& bv = data_of(self, 1);
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * bv[i];
            }
        }
        if (auto* g = grad_of(self, 1)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * av[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    require_finite(a, "scale");
    std::vector<double> out(a.data().begin(), a.data().end());
    for (double& v : out) {
        v *= factor;
    }
    return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * factor;
            }
        }
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    const std::size_t n = last_dim(x, "add_bias");
    if (bias.rank() != 1 || bias.dim(0) != n) {
        shape_error("add_bias", x.shape(), bias.shape());
    }
    require_finite(x, "add_bias");
    require_finite(bias, "add_bias");
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bias.data()[i % n];
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [n](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i];
            }
        }
        if (auto* g = grad_of(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*g)[i % n] += self.grad[i];
            }
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3))) {
        shape_error("matmul", a.shape(), b.shape());
    }
    const bool batched = a.rank() == 3;
    const std::size_t groups = batched ? a.dim(0) : 1;
    const std::size_t m = a.dim(a.rank() - 2);
    const std::size_t k = a.dim(a.rank() - 1);
    const std::size_t b_rows = b.dim(b.rank() - 2);
    const std::size_t b_cols = b.dim(b.rank() - 1);
    const std::size_t kb = transpose_b ? b_cols : b_rows;
    const std::size_t n = transpose_b ? b_rows : b_cols;
    if (kb != k || (batched && b.dim(0) != groups)) {
        shape_error("matmul", a.shape(), b.shape());
    }
    require_finite(a, "matmul");
    require_finite(b, "matmul");

    std::vector<double> out(groups * m * n, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        const double* ap = a.data().data() + g * m * k;
        const double* bp = b.data().data() + g * k * n;
        double* cp = out.data() + g * m * n;
        if (transpose_b) {
            gemm_nt(m, n, k, ap, bp, cp);
        } else {
            gemm_nn(m, n, k, ap, bp, cp);
        }
    }
    Shape shape = batched ? Shape{groups, m, n} : Shape{m, n};
    return Tensor::make_result(std::move(shape), std::move(out), {a, b},
                               [groups, m, n, k, transpose_b](Node& self) {
        const auto& av = data_of(self, 0);
        const auto& bv = data_of(self, 1);
        auto* ga = grad_of(self, 0);
        auto* gb = grad_of(self, 1);
        for (std::size_t g = 0; g < groups; ++g) {
            const double* gc = self.grad.data() + g * m * n;
            const double* ap = av.data() + g * m * k;
            const double* bp = bv.data() + g * k * n;
            if (ga) {
                double* gap = ga->data() + g * m * k;
                if (transpose_b) {
                    gemm_nn(m, k, n, gc, bp, gap);  // dA = dC B
                } else {
                    gemm_nt(m, k, n, gc, bp, gap);  // dA = dC B^T
                }
            }
            if (gb) {
                double* gbp = gb->data() + g * k * n;
                if (transpose_b) {
                    gemm_tn(n, k, m, gc, ap, gbp);  // dB = dC^T A
                } else {
                    gemm_tn(k, n, m, ap, gc, gbp);  // dB = A^T dC
                }
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const std::size_t in = last_dim(x, "linear");
    if (weight.rank() != 2 || weight.dim(0) != in) {
        shape_error("linear", x.shape(), weight.shape());
    }
    const std::size_t out_dim = weight.dim(1);
    if (bias.rank() != 1 || bias.dim(0) != out_dim) {
        shape_error("linear", weight.shape(), bias.shape());
    }
    require_finite(x, "linear");
    require_finite(weight, "linear");
    require_finite(bias, "linear");
    const std::size_t rows = x.numel() / in;
    std::vector<double> out(rows * out_dim);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(bias.data().begin(), bias.data().end(), out.begin() + static_cast<std::ptrdiff_t>(r * out_dim));
    }
    gemm_nn(rows, out_dim, in, x.data().data(), weight.data().data(), out.data());
    Shape shape = x.shape();
    shape.back() = out_dim;
    return Tensor::make_result(std::move(shape), std::move(out), {x, weight, bias},
                               [rows, in, out_dim](Node& self) {
        const auto& xv = data_of(self, 0);
        const auto& wv = data_of(self, 1);
        if (auto* g = grad_of(self, 0)) {
            gemm_nt(rows, in, out_dim, self.grad.data(), wv.data(), g->data());
        }
        if (auto* g = grad_of(self, 1)) {
            gemm_tn(in, out_dim, rows, xv.data(), self.grad.data(), g->data());
        }
        if (auto* g = grad_of(self, 2)) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < out_dim; ++j) {
                    (*g)[j] += self.grad[r * out_dim + j];
                }
            }
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        shape_error("reshape", x.shape(), shape);
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i];
            }
        }
    });
}

Tensor swap_axes(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
    const Shape& in_shape = x.shape();
    if (axis_a >= in_shape.size() || axis_b >= in_shape.size()) {
        throw std::invalid_argument("swap_axes: axes " + std::to_string(axis_a) + "," + std::to_string(axis_b) +
                                    " out of range for shape " + shape_str(in_shape));
    }
    const std::size_t rank = in_shape.size();
    Shape out_shape = in_shape;
    std::swap(out_shape[axis_a], out_shape[axis_b]);

    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t d = rank; d-- > 1;) {
        in_strides[d - 1] = in_strides[d] * in_shape[d];
    }
    std::vector<std::size_t> src_strides = in_strides;
    std::swap(src_strides[axis_a], src_strides[axis_b]);

    // out[i] = in[source[i]]
    const std::size_t total = x.numel();
    std::vector<std::size_t> source(total);
    std::vector<std::size_t> index(rank, 0);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t offset = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            offset += index[d] * src_strides[d];
        }
        source[i] = offset;
        for (std::size_t d = rank; d-- > 0;) {
            if (++index[d] < out_shape[d]) {
                break;
            }
            index[d] = 0;
        }
    }
    std::vector<double> out(total);
    for (std::size_t i = 0; i < total; ++i) {
        out[i] = x.data()[source[i]];
    }
    return Tensor::make_result(std::move(out_shape), std::move(out), {x},
                               [source = std::move(source)](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < source.size(); ++i) {
                (*g)[source[i]] += self.grad[i];
            }
        }
    });
}

namespace {

// dx = y * (g - sum(g * y)) per row.
void softmax_backward(const std::vector<double>& y, const std::vector<double>& gy, std::vector<double>& gx,
                      std::size_t cols) {
    const std::size_t rows = y.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data() + r * cols;
        const double* gr = gy.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            dot += gr[c] * yr[c];
        }
        double* out = gx.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] += yr[c] * (gr[c] - dot);
        }
    }
}

}  // namespace

Tensor softmax(const Tensor& x) {
    const std::size_t cols = last_dim(x, "softmax");
    require_finite(x, "softmax");
    const std::size_t rows = x.numel() / cols;
    std::vector<double> y(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * cols;
        double* yr = y.data() + r * cols;
        const double mx = *std::max_element(xr, xr + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            total += yr[c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
            yr[c] /= total;
        }
    }
    return Tensor::make_result(x.shape(), std::move(y), {x}, [cols](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            softmax_backward(self.data, self.grad, *g, cols);
        }
    });
}

Tensor masked_softmax(const Tensor& scores, std::span<const std::uint8_t> key_mask, std::size_t batch) {
    if (scores.rank() != 3 || batch == 0 || scores.dim(0) % batch != 0) {
        throw std::invalid_argument("masked_softmax: scores " + shape_str(scores.shape()) +
                                    " incompatible with batch " + std::to_string(batch));
    }
    const std::size_t groups = scores.dim(0);
    const std::size_t heads = groups / batch;
    const std::size_t rows = scores.dim(1);
    const std::size_t cols = scores.dim(2);
    if (key_mask.size() != batch * cols) {
        throw std::invalid_argument("masked_softmax: mask of size " + std::to_string(key_mask.size()) +
                                    " does not cover scores " + shape_str(scores.shape()));
    }
    require_finite(scores, "masked_softmax");
    std::vector<double> y(scores.numel(), 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        const std::uint8_t* mask = key_mask.data() + (g / heads) * cols;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = scores.data().data() + (g * rows + r) * cols;
            double* yr = y.data() + (g * rows + r) * cols;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < cols; ++c) {
                if (mask[c]) {
                    mx = std::max(mx, xr[c]);
                }
            }
            if (!std::isfinite(mx)) {
                continue;  // every key masked: the row stays zero
            }
            double total = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                if (mask[c]) {
                    yr[c] = std::exp(xr[c] - mx);
                    total += yr[c];
                }
            }
            for (std::size_t c = 0; c < cols; ++c) {
                yr[c] /= total;
            }
        }
    }
    return Tensor::make_result(scores.shape(), std::move(y), {scores}, [cols](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            softmax_backward(self.data, self.grad, *g, cols);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t cols = last_dim(x, "layer_norm");
    if (gamma.rank() != 1 || gamma.dim(0) != cols) {
        shape_error("layer_norm", x.shape(), gamma.shape());
    }
    if (beta.rank() != 1 || beta.dim(0) != cols) {
        shape_error("layer_norm", x.shape(), beta.shape());
    }
    require_finite(x, "layer_norm");
    require_finite(gamma, "layer_norm");
    require_finite(beta, "layer_norm");
    const std::size_t rows = x.numel() / cols;
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    std::vector<double> y(x.numel());
    const auto n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            mu += xr[c];
        }
        mu /= n;
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            var += (xr[c] - mu) * (xr[c] - mu);
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (std::size_t c = 0; c < cols; ++c) {
            const double h = (xr[c] - mu) * inv;
            (*xhat)[r * cols + c] = h;
            y[r * cols + c] = gamma.data()[c] * h + beta.data()[c];
        }
    }
    return Tensor::make_result(x.shape(), std::move(y), {x, gamma, beta},
                               [rows, cols, xhat, inv_std](Node& self) {
        const auto& gv = data_of(self, 1);
        if (auto* gx = grad_of(self, 0)) {
            const auto n = static_cast<double>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                double sum_d = 0.0;
                double sum_dx = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = self.grad[r * cols + c] * gv[c];
                    sum_d += d;
                    sum_dx += d * (*xhat)[r * cols + c];
                }
                const double inv = (*inv_std)[r];
                for (std::size_t c = 0; c < cols; ++c) {
                    const double d = self.grad[r * cols + c] * gv[c];
                    (*gx)[r * cols + c] += inv / n * (n * d - sum_d - (*xhat)[r * cols + c] * sum_dx);
                }
            }
        }
        if (auto* gg = grad_of(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*gg)[i % cols] += self.grad[i] * (*xhat)[i];
            }
        }
        if (auto* gb = grad_of(self, 2)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*gb)[i % cols] += self.grad[i];
            }
        }
    });
}

Tensor gelu(const Tensor& x) {
    require_finite(x, "gelu");
    std::vector<double> y(x.numel());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = x.data()[i];
        y[i] = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
    }
    return Tensor::make_result(x.shape(), std::move(y), {x}, [](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            const auto& xv = data_of(self, 0);
            const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double v = xv[i];
                const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
                (*g)[i] += self.grad[i] * (cdf + v * pdf);
            }
        }
    });
}

Tensor tanh(const Tensor& x) {
    require_finite(x, "tanh");
    std::vector<double> y(x.numel());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = std::tanh(x.data()[i]);
    }
    return Tensor::make_result(x.shape(), std::move(y), {x}, [](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * (1.0 - self.data[i] * self.data[i]);
            }
        }
    });
}

namespace {

Tensor select_rows(const Tensor& x, std::vector<std::size_t> rows, const char* op) {
    if (x.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected a [rows, cols] tensor, got " +
                                    shape_str(x.shape()));
    }
    if (rows.empty()) {
        throw std::invalid_argument(std::string(op) + ": empty index list");
    }
    const std::size_t n_rows = x.dim(0);
    const std::size_t cols = x.dim(1);
    for (const std::size_t r : rows) {
        if (r >= n_rows) {
            throw std::out_of_range(std::string(op) + ": index " + std::to_string(r) + " out of range for " +
                                    std::to_string(n_rows) + " rows");
        }
    }
    require_finite(x, op);
    std::vector<double> out(rows.size() * cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                    out.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    Shape shape{rows.size(), cols};
    return Tensor::make_result(std::move(shape), std::move(out), {x},
                               [rows = std::move(rows), cols](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                double* dst = g->data() + rows[i] * cols;
                const double* src = self.grad.data() + i * cols;
                for (std::size_t c = 0; c < cols; ++c) {
                    dst[c] += src[c];
                }
            }
        }
    });
}

}  // namespace

Tensor embedding(const Tensor& table, std::span<const int> ids) {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const int id : ids) {
        if (id < 0 || (table.rank() == 2 && static_cast<std::size_t>(id) >= table.dim(0))) {
            throw std::out_of_range("embedding: id " + std::to_string(id) + " out of range for table " +
                                    shape_str(table.shape()));
        }
        rows.push_back(static_cast<std::size_t>(id));
    }
    return select_rows(table, std::move(rows), "embedding");
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
    return select_rows(x, {indices.begin(), indices.end()}, "gather_rows");
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw std::invalid_argument("dropout: probability must be in [0, 1), got " + std::to_string(p));
    }
    if (p == 0.0) {
        return x;
    }
    require_finite(x, "dropout");
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.numel());
    std::vector<double> y(x.numel());
    for (std::size_t i = 0; i < y.size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
        y[i] = x.data()[i] * mask[i];
    }
    return Tensor::make_result(x.shape(), std::move(y), {x}, [mask = std::move(mask)](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[i] * mask[i];
            }
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
    if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
        throw std::invalid_argument("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    require_finite(logits, "cross_entropy");
    const std::size_t rows = logits.dim(0);
    const std::size_t cols = logits.dim(1);
    auto probs = std::make_shared<std::vector<double>>(logits.numel(), 0.0);
    std::size_t counted = 0;
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const int t = targets[r];
        if (t == ignore_index) {
            continue;
        }
        if (t < 0 || static_cast<std::size_t>(t) >= cols) {
            throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " out of range for " +
                                    std::to_string(cols) + " classes");
        }
        const double* xr = logits.data().data() + r * cols;
        double* pr = probs->data() + r * cols;
        const double mx = *std::max_element(xr, xr + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            pr[c] = std::exp(xr[c] - mx);
            z += pr[c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
            pr[c] /= z;
        }
        total += (mx + std::log(z)) - xr[static_cast<std::size_t>(t)];
        ++counted;
    }
    if (counted == 0) {
        return Tensor::scalar(0.0);
    }
    const double inv = 1.0 / static_cast<double>(counted);
    std::vector<int> kept(targets.begin(), targets.end());
    return Tensor::make_result({}, {total * inv}, {logits},
                               [probs, kept = std::move(kept), rows, cols, inv, ignore_index](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            const double scale_g = self.grad[0] * inv;
            for (std::size_t r = 0; r < rows; ++r) {
                if (kept[r] == ignore_index) {
                    continue;
                }
                for (std::size_t c = 0; c < cols; ++c) {
                    const double onehot = static_cast<std::size_t>(kept[r]) == c ? 1.0 : 0.0;
                    (*g)[r * cols + c] += scale_g * ((*probs)[r * cols + c] - onehot);
                }
            }
        }
    });
}

Tensor sum(const Tensor& x) {
    require_finite(x, "sum");
    double total = 0.0;
    for (const double v : x.data()) {
        total += v;
    }
    return Tensor::make_result({}, {total}, {x}, [](Node& self) {
        if (auto* g = grad_of(self, 0)) {
            for (double& v : *g) {
                v += self.grad[0];
            }
        }
    });
}

Tensor mean(const Tensor& x) {
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace dialectbert
