#include "tdpg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <unordered_set>
#include <utility>

namespace tdpg {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

using detail::Node;

std::shared_ptr<Node> make_leaf(const Shape& shape, bool requires_grad) {
    for (std::size_t e : shape)
        require(e > 0, "Tensor: extents must be positive, got " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value.assign(numel(shape), 0.0);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->value.size(), 0.0);
    return n;
}

// Result node whose requires_grad is inherited from the parents that do.
std::shared_ptr<Node> make_result(const Shape& shape, const char* op,
                                  std::initializer_list<std::shared_ptr<Node>> parents) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value.assign(numel(shape), 0.0);
    n->op = op;
    for (const auto& p : parents) {
        if (p->requires_grad) n->requires_grad = true;
        n->parents.push_back(p);
    }
    if (n->requires_grad) n->grad.assign(n->value.size(), 0.0);
    return n;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

}  // namespace

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return wrap(make_leaf(shape, requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values, bool requires_grad) {
    require(numel(shape) == values.size(),
            "Tensor::from_values: " + std::to_string(values.size()) + " values for shape " +
                shape_str(shape));
    Tensor t = zeros(shape, requires_grad);
    t.values() = std::move(values);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    Tensor t = zeros(Shape{}, requires_grad);
    t.values()[0] = value;
    return t;
}

const Shape& Tensor::shape() const {
    require(defined(), "Tensor: use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::size() const { return numel(shape()); }

bool Tensor::requires_grad() const {
    require(defined(), "Tensor: use of undefined tensor");
    return node_->requires_grad;
}

std::vector<double>& Tensor::values() {
    require(defined(), "Tensor: use of undefined tensor");
    return node_->value;
}

const std::vector<double>& Tensor::values() const {
    require(defined(), "Tensor: use of undefined tensor");
    return node_->value;
}

std::vector<double>& Tensor::grad() {
    require(defined() && node_->requires_grad, "Tensor::grad: tensor does not require gradients");
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    require(defined() && node_->requires_grad, "Tensor::grad: tensor does not require gradients");
    return node_->grad;
}

void Tensor::clear_grad() {
    if (defined() && node_->requires_grad) {
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
        node_->backward_done = false;
    }
}

double Tensor::item() const {
    require(is_scalar(), "Tensor::item: tensor of shape " + shape_str(shape()) + " is not scalar");
    return values()[0];
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2,
            "matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    require(k == k2, "matmul: inner extents disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));

    auto out = make_result({m, n}, "matmul", {a.handle(), b.handle()});
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = bv + p * n;
            double* orow = ov + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    if (out->requires_grad) {
        Node* pa = a.node();
        Node* pb = b.node();
        out->backfn = [pa, pb, m, k, n](Node* self) {
            const double* g = self->grad.data();
            if (pa->requires_grad) {
                // da = g * b^T
                double* da = pa->grad.data();
                const double* bv = pb->value.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = g + i * n;
                        const double* brow = bv + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        da[i * k + p] += acc;
                    }
            }
            if (pb->requires_grad) {
                // db = a^T * g
                double* db = pb->grad.data();
                const double* av = pa->value.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = g + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = av[i * k + p];
                        double* drow = db + p * n;
                        for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
                    }
                }
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1,
            "affine: expected x[mxk], w[kxn], b[n]");
    const std::size_t m = x.shape()[0], k = x.shape()[1];
    const std::size_t n = w.shape()[1];
    require(w.shape()[0] == k, "affine: x/w extents disagree: " + shape_str(x.shape()) + " vs " +
                                   shape_str(w.shape()));
    require(b.shape()[0] == n, "affine: bias width " + std::to_string(b.shape()[0]) +
                                   " does not match output width " + std::to_string(n));

    auto out = make_result({m, n}, "affine", {x.handle(), w.handle(), b.handle()});
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    const double* bv = b.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = ov + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] = bv[j];
        for (std::size_t p = 0; p < k; ++p) {
            const double xip = xv[i * k + p];
            const double* wrow = wv + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += xip * wrow[j];
        }
    }
    if (out->requires_grad) {
        Node* px = x.node();
        Node* pw = w.node();
        Node* pb = b.node();
        out->backfn = [px, pw, pb, m, k, n](Node* self) {
            const double* g = self->grad.data();
            if (px->requires_grad) {
                double* dx = px->grad.data();
                const double* wv = pw->value.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* grow = g + i * n;
                        const double* wrow = wv + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * wrow[j];
                        dx[i * k + p] += acc;
                    }
            }
            if (pw->requires_grad) {
                double* dw = pw->grad.data();
                const double* xv = px->value.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = g + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const double xip = xv[i * k + p];
                        double* drow = dw + p * n;
                        for (std::size_t j = 0; j < n; ++j) drow[j] += xip * grow[j];
                    }
                }
            }
            if (pb->requires_grad) {
                double* db = pb->grad.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = g + i * n;
                    for (std::size_t j = 0; j < n; ++j) db[j] += grow[j];
                }
            }
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

namespace {

// Binary elementwise with equal shapes or a single-element operand broadcast.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, BwdA dfda,
                 BwdB dfdb) {
    const bool a_scalar = a.is_scalar();
    const bool b_scalar = b.is_scalar();
    require(same_shape(a.shape(), b.shape()) || a_scalar || b_scalar,
            std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()) + " (only scalar broadcast is supported)");
    const Shape& out_shape = a_scalar ? b.shape() : a.shape();
    auto out = make_result(out_shape, name, {a.handle(), b.handle()});
    const std::size_t n = out->value.size();
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < n; ++i)
        ov[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
    if (out->requires_grad) {
        Node* pa = a.node();
        Node* pb = b.node();
        out->backfn = [pa, pb, a_scalar, b_scalar, n, dfda, dfdb](Node* self) {
            const double* g = self->grad.data();
            const double* av = pa->value.data();
            const double* bv = pb->value.data();
            if (pa->requires_grad) {
                double* da = pa->grad.data();
                for (std::size_t i = 0; i < n; ++i)
                    da[a_scalar ? 0 : i] += g[i] * dfda(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
            }
            if (pb->requires_grad) {
                double* db = pb->grad.data();
                for (std::size_t i = 0; i < n; ++i)
                    db[b_scalar ? 0 : i] += g[i] * dfdb(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
            }
        };
    }
    return Tensor::wrap(out);
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Bwd dfdx) {
    auto out = make_result(x.shape(), name, {x.handle()});
    const std::size_t n = out->value.size();
    const double* xv = x.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
    if (out->requires_grad) {
        Node* px = x.node();
        out->backfn = [px, n, dfdx](Node* self) {
            const double* g = self->grad.data();
            const double* xv = px->value.data();
            const double* ov = self->value.data();
            double* dx = px->grad.data();
            for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * dfdx(xv[i], ov[i]);
        };
    }
    return Tensor::wrap(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor neg(const Tensor& x) {
    return unary_op(
        "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
    return unary_op(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& x) {
    const std::vector<double>& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        if (!(xv[i] > 0.0))
            throw NumericError("log: non-positive input " + std::to_string(xv[i]) +
                               " at flat index " + std::to_string(i));
    }
    return unary_op(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
    return unary_op(
        "tanh", x, [](double v) { return std::tanh(v); },
        [](double, double out) { return 1.0 - out * out; });
}

Tensor elu(const Tensor& x) {
    return unary_op(
        "elu", x, [](double v) { return v >= 0.0 ? v : std::expm1(v); },
        [](double v, double out) { return v >= 0.0 ? 1.0 : out + 1.0; });
}

Tensor square(const Tensor& x) {
    return unary_op(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor scale(const Tensor& x, double c) {
    return unary_op(
        "scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor shift(const Tensor& x, double c) {
    return unary_op(
        "shift", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    require(lo <= hi, "clamp: lo > hi");
    return unary_op(
        "clamp", x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor reduce(Reduce op, const Tensor& x, const std::vector<std::size_t>& axes) {
    require(!axes.empty(), "reduce: empty axis set");
    const Shape& in_shape = x.shape();
    std::vector<bool> reduced(in_shape.size(), false);
    for (std::size_t i = 0; i < axes.size(); ++i) {
        require(axes[i] < in_shape.size(), "reduce: axis " + std::to_string(axes[i]) +
                                               " out of range for " + shape_str(in_shape));
        require(i == 0 || axes[i] > axes[i - 1], "reduce: axes must be strictly ascending");
        reduced[axes[i]] = true;
    }

    Shape out_shape;
    for (std::size_t d = 0; d < in_shape.size(); ++d)
        if (!reduced[d]) out_shape.push_back(in_shape[d]);

    const std::size_t in_n = x.size();
    const std::size_t out_n = numel(out_shape);
    const std::size_t count = in_n / out_n;  // elements folded into each output

    // Flat input index -> flat output index.
    std::vector<std::size_t> in_strides(in_shape.size(), 1);
    for (std::size_t d = in_shape.size(); d-- > 1;)
        in_strides[d - 1] = in_strides[d] * in_shape[d];
    std::vector<std::size_t> out_strides(out_shape.size(), 1);
    for (std::size_t d = out_shape.size(); d-- > 1;)
        out_strides[d - 1] = out_strides[d] * out_shape[d];
    std::vector<std::size_t> out_index(in_n);
    for (std::size_t i = 0; i < in_n; ++i) {
        std::size_t rem = i, oi = 0, od = 0;
        for (std::size_t d = 0; d < in_shape.size(); ++d) {
            const std::size_t coord = rem / in_strides[d];
            rem %= in_strides[d];
            if (!reduced[d]) oi += coord * out_strides[od++];
        }
        out_index[i] = oi;
    }

    const char* name = op == Reduce::sum         ? "reduce_sum"
                       : op == Reduce::mean      ? "reduce_mean"
                       : op == Reduce::logsumexp ? "reduce_logsumexp"
                                                 : "reduce_max";
    auto out = make_result(out_shape, name, {x.handle()});
    const double* xv = x.values().data();
    double* ov = out->value.data();

    std::vector<std::size_t> argmax;  // max only: winning input per output
    switch (op) {
        case Reduce::sum:
        case Reduce::mean: {
            for (std::size_t i = 0; i < in_n; ++i) ov[out_index[i]] += xv[i];
            if (op == Reduce::mean)
                for (std::size_t j = 0; j < out_n; ++j) ov[j] /= static_cast<double>(count);
            break;
        }
        case Reduce::logsumexp: {
            std::vector<double> mx(out_n, -std::numeric_limits<double>::infinity());
            for (std::size_t i = 0; i < in_n; ++i)
                mx[out_index[i]] = std::max(mx[out_index[i]], xv[i]);
            std::vector<double> acc(out_n, 0.0);
            for (std::size_t i = 0; i < in_n; ++i) acc[out_index[i]] += std::exp(xv[i] - mx[out_index[i]]);
            for (std::size_t j = 0; j < out_n; ++j) ov[j] = mx[j] + std::log(acc[j]);
            break;
        }
        case Reduce::max: {
            argmax.assign(out_n, 0);
            std::vector<bool> seen(out_n, false);
            for (std::size_t i = 0; i < in_n; ++i) {
                const std::size_t j = out_index[i];
                if (!seen[j] || xv[i] > ov[j]) {
                    seen[j] = true;
                    ov[j] = xv[i];
                    argmax[j] = i;
                }
            }
            break;
        }
    }

    if (out->requires_grad) {
        Node* px = x.node();
        out->backfn = [px, op, out_index = std::move(out_index), argmax = std::move(argmax), in_n,
                       out_n, count](Node* self) {
            const double* g = self->grad.data();
            const double* ov = self->value.data();
            const double* xv = px->value.data();
            double* dx = px->grad.data();
            switch (op) {
                case Reduce::sum:
                    for (std::size_t i = 0; i < in_n; ++i) dx[i] += g[out_index[i]];
                    break;
                case Reduce::mean:
                    for (std::size_t i = 0; i < in_n; ++i)
                        dx[i] += g[out_index[i]] / static_cast<double>(count);
                    break;
                case Reduce::logsumexp:
                    // d lse / d x_i = exp(x_i - lse)
                    for (std::size_t i = 0; i < in_n; ++i)
                        dx[i] += g[out_index[i]] * std::exp(xv[i] - ov[out_index[i]]);
                    break;
                case Reduce::max:
                    for (std::size_t j = 0; j < out_n; ++j) dx[argmax[j]] += g[j];
                    break;
            }
        };
    }
    return Tensor::wrap(out);
}

namespace {
std::vector<std::size_t> all_axes(const Tensor& x) {
    std::vector<std::size_t> axes(x.rank());
    for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
    if (axes.empty()) axes.push_back(0);  // rank-0: treated below
    return axes;
}
}  // namespace

Tensor sum(const Tensor& x) {
    if (x.rank() == 0) return scale(x, 1.0);
    return reduce(Reduce::sum, x, all_axes(x));
}
Tensor mean(const Tensor& x) {
    if (x.rank() == 0) return scale(x, 1.0);
    return reduce(Reduce::mean, x, all_axes(x));
}
Tensor logsumexp(const Tensor& x) {
    if (x.rank() == 0) return scale(x, 1.0);
    return reduce(Reduce::logsumexp, x, all_axes(x));
}
Tensor reduce_max(const Tensor& x) {
    if (x.rank() == 0) return scale(x, 1.0);
    return reduce(Reduce::max, x, all_axes(x));
}
Tensor sum(const Tensor& x, std::size_t axis) { return reduce(Reduce::sum, x, {axis}); }
Tensor mean(const Tensor& x, std::size_t axis) { return reduce(Reduce::mean, x, {axis}); }
Tensor logsumexp(const Tensor& x, std::size_t axis) { return reduce(Reduce::logsumexp, x, {axis}); }

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride) {
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(kernels.rank() == 4, "conv2d: kernels must be [co x ci x k x k], got " +
                                     shape_str(kernels.shape()));
    require(input.rank() == 3 || input.rank() == 4,
            "conv2d: input must be [ci x h x w] or [n x ci x h x w], got " +
                shape_str(input.shape()));
    const bool batched = input.rank() == 4;
    const std::size_t n = batched ? input.shape()[0] : 1;
    const std::size_t ci = input.shape()[batched ? 1 : 0];
    const std::size_t h = input.shape()[batched ? 2 : 1];
    const std::size_t w = input.shape()[batched ? 3 : 2];
    const std::size_t co = kernels.shape()[0];
    const std::size_t kk = kernels.shape()[2];
    require(kernels.shape()[1] == ci, "conv2d: kernel channel count " +
                                          std::to_string(kernels.shape()[1]) +
                                          " does not match input channels " + std::to_string(ci));
    require(kernels.shape()[3] == kk, "conv2d: kernels must be square");
    require(kk <= h && kk <= w, "conv2d: kernel " + std::to_string(kk) + " larger than input " +
                                    std::to_string(h) + "x" + std::to_string(w));
    const std::size_t oh = (h - kk) / stride + 1;
    const std::size_t ow = (w - kk) / stride + 1;

    Shape out_shape = batched ? Shape{n, co, oh, ow} : Shape{co, oh, ow};
    auto out = make_result(out_shape, "conv2d", {input.handle(), kernels.handle()});
    const double* in = input.values().data();
    const double* ker = kernels.values().data();
    double* ov = out->value.data();

    const std::size_t in_img = ci * h * w;
    const std::size_t out_img = co * oh * ow;
    for (std::size_t b = 0; b < n; ++b) {
        const double* ib = in + b * in_img;
        double* ob = ov + b * out_img;
        for (std::size_t c = 0; c < co; ++c) {
            for (std::size_t y = 0; y < oh; ++y) {
                for (std::size_t x = 0; x < ow; ++x) {
                    double acc = 0.0;
                    for (std::size_t ic = 0; ic < ci; ++ic) {
                        const double* iplane = ib + ic * h * w;
                        const double* kplane = ker + (c * ci + ic) * kk * kk;
                        for (std::size_t ky = 0; ky < kk; ++ky) {
                            const double* irow = iplane + (y * stride + ky) * w + x * stride;
                            const double* krow = kplane + ky * kk;
                            for (std::size_t kx = 0; kx < kk; ++kx) acc += irow[kx] * krow[kx];
                        }
                    }
                    ob[(c * oh + y) * ow + x] = acc;
                }
            }
        }
    }

    if (out->requires_grad) {
        Node* pin = input.node();
        Node* pker = kernels.node();
        out->backfn = [pin, pker, n, ci, h, w, co, kk, stride, oh, ow, in_img,
                       out_img](Node* self) {
            const double* g = self->grad.data();
            const double* in = pin->value.data();
            const double* ker = pker->value.data();
            for (std::size_t b = 0; b < n; ++b) {
                const double* gb = g + b * out_img;
                const double* ib = in + b * in_img;
                for (std::size_t c = 0; c < co; ++c) {
                    for (std::size_t y = 0; y < oh; ++y) {
                        for (std::size_t x = 0; x < ow; ++x) {
                            const double gv = gb[(c * oh + y) * ow + x];
                            if (gv == 0.0) continue;
                            for (std::size_t ic = 0; ic < ci; ++ic) {
                                const std::size_t ibase = ic * h * w;
                                const std::size_t kbase = (c * ci + ic) * kk * kk;
                                for (std::size_t ky = 0; ky < kk; ++ky) {
                                    const std::size_t irow = ibase + (y * stride + ky) * w + x * stride;
                                    const std::size_t krow = kbase + ky * kk;
                                    if (pin->requires_grad) {
                                        double* dib = pin->grad.data() + b * in_img;
                                        for (std::size_t kx = 0; kx < kk; ++kx)
                                            dib[irow + kx] += gv * ker[krow + kx];
                                    }
                                    if (pker->requires_grad) {
                                        double* dk = pker->grad.data();
                                        for (std::size_t kx = 0; kx < kk; ++kx)
                                            dk[krow + kx] += gv * ib[irow + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.shape()[0] == b.shape()[0],
            "concat_cols: expected [m x k1] and [m x k2], got " + shape_str(a.shape()) + " and " +
                shape_str(b.shape()));
    const std::size_t m = a.shape()[0], ka = a.shape()[1], kb = b.shape()[1];
    auto out = make_result({m, ka + kb}, "concat_cols", {a.handle(), b.handle()});
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(av + i * ka, av + (i + 1) * ka, ov + i * (ka + kb));
        std::copy(bv + i * kb, bv + (i + 1) * kb, ov + i * (ka + kb) + ka);
    }
    if (out->requires_grad) {
        Node* pa = a.node();
        Node* pb = b.node();
        out->backfn = [pa, pb, m, ka, kb](Node* self) {
            const double* g = self->grad.data();
            for (std::size_t i = 0; i < m; ++i) {
                if (pa->requires_grad) {
                    double* da = pa->grad.data();
                    for (std::size_t j = 0; j < ka; ++j) da[i * ka + j] += g[i * (ka + kb) + j];
                }
                if (pb->requires_grad) {
                    double* db = pb->grad.data();
                    for (std::size_t j = 0; j < kb; ++j)
                        db[i * kb + j] += g[i * (ka + kb) + ka + j];
                }
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor slice_cols(const Tensor& x, std::size_t lo, std::size_t hi) {
    require(x.rank() == 2, "slice_cols: expected rank-2, got " + shape_str(x.shape()));
    const std::size_t m = x.shape()[0], k = x.shape()[1];
    require(lo < hi && hi <= k, "slice_cols: bad range [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + ") for width " + std::to_string(k));
    const std::size_t kw = hi - lo;
    auto out = make_result({m, kw}, "slice_cols", {x.handle()});
    const double* xv = x.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < m; ++i)
        std::copy(xv + i * k + lo, xv + i * k + hi, ov + i * kw);
    if (out->requires_grad) {
        Node* px = x.node();
        out->backfn = [px, m, k, lo, kw](Node* self) {
            const double* g = self->grad.data();
            double* dx = px->grad.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < kw; ++j) dx[i * k + lo + j] += g[i * kw + j];
        };
    }
    return Tensor::wrap(out);
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows) {
    require(x.rank() == 2, "gather_rows: expected rank-2, got " + shape_str(x.shape()));
    const std::size_t m = x.shape()[0], k = x.shape()[1];
    for (std::size_t r : rows)
        require(r < m, "gather_rows: row index " + std::to_string(r) + " out of range");
    auto out = make_result({rows.size(), k}, "gather_rows", {x.handle()});
    const double* xv = x.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(xv + rows[i] * k, xv + (rows[i] + 1) * k, ov + i * k);
    if (out->requires_grad) {
        Node* px = x.node();
        out->backfn = [px, rows = std::move(rows), k](Node* self) {
            const double* g = self->grad.data();
            double* dx = px->grad.data();
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < k; ++j) dx[rows[i] * k + j] += g[i * k + j];
        };
    }
    return Tensor::wrap(out);
}

Tensor reshape(const Tensor& x, const Shape& shape) {
    require(numel(shape) == x.size(), "reshape: element count mismatch: " +
                                          shape_str(x.shape()) + " -> " + shape_str(shape));
    auto out = make_result(shape, "reshape", {x.handle()});
    out->value = x.values();
    if (out->requires_grad) {
        Node* px = x.node();
        out->backfn = [px](Node* self) {
            double* dx = px->grad.data();
            const double* g = self->grad.data();
            for (std::size_t i = 0; i < self->grad.size(); ++i) dx[i] += g[i];
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

Tensor gaussian_log_prob(const Tensor& x, const Tensor& mean, const Tensor& log_std) {
    require(same_shape(x.shape(), mean.shape()) && same_shape(x.shape(), log_std.shape()),
            "gaussian_log_prob: shapes disagree: " + shape_str(x.shape()) + ", " +
                shape_str(mean.shape()) + ", " + shape_str(log_std.shape()));
    require(x.rank() == 1 || x.rank() == 2, "gaussian_log_prob: expected rank 1 or 2");
    const bool rowwise = x.rank() == 2;
    const std::size_t m = rowwise ? x.shape()[0] : 1;
    const std::size_t d = rowwise ? x.shape()[1] : x.shape()[0];
    constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

    Shape out_shape = rowwise ? Shape{m} : Shape{};
    auto out = make_result(out_shape, "gaussian_log_prob",
                           {x.handle(), mean.handle(), log_std.handle()});
    const double* xv = x.values().data();
    const double* mv = mean.values().data();
    const double* sv = log_std.values().data();
    double* ov = out->value.data();
    for (std::size_t i = 0; i < m; ++i) {
        double acc = -static_cast<double>(d) * kHalfLog2Pi;
        for (std::size_t j = 0; j < d; ++j) {
            const std::size_t e = i * d + j;
            const double z = (xv[e] - mv[e]) * std::exp(-sv[e]);
            acc += -sv[e] - 0.5 * z * z;
        }
        ov[i] = acc;
    }
    if (out->requires_grad) {
        Node* px = x.node();
        Node* pm = mean.node();
        Node* ps = log_std.node();
        out->backfn = [px, pm, ps, m, d](Node* self) {
            const double* g = self->grad.data();
            const double* xv = px->value.data();
            const double* mv = pm->value.data();
            const double* sv = ps->value.data();
            for (std::size_t i = 0; i < m; ++i) {
                const double gi = g[i];
                for (std::size_t j = 0; j < d; ++j) {
                    const std::size_t e = i * d + j;
                    const double inv_sigma = std::exp(-sv[e]);
                    const double z = (xv[e] - mv[e]) * inv_sigma;
                    if (px->requires_grad) px->grad[e] += gi * (-z * inv_sigma);
                    if (pm->requires_grad) pm->grad[e] += gi * (z * inv_sigma);
                    if (ps->requires_grad) ps->grad[e] += gi * (z * z - 1.0);
                }
            }
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    require(loss.defined(), "backward: undefined loss");
    require(loss.is_scalar(),
            "backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    Node* root = loss.node();
    require(!root->backward_done, "backward: called twice on the same graph without reset");
    root->backward_done = true;
    if (!root->requires_grad) return;  // nothing depends on parameters

    // Iterative post-order topological sort over grad-requiring nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    std::fill(root->grad.begin(), root->grad.end(), 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backfn) n->backfn(n);
    }
}

}  // namespace tdpg
