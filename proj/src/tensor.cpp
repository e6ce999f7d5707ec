#include "stcd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stcd {

int64_t numel(const Shape& shape) {
    int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

namespace {
bool g_debug_checks = false;

void check_finite(const char* op, const std::vector<double>& v) {
    if (!g_debug_checks) return;
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError(std::string("non-finite value produced by op '") + op + "'");
    }
}

void check_shape_positive(const Shape& shape) {
    for (int e : shape) {
        if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
}
}  // namespace

void set_debug_checks(bool on) { g_debug_checks = on; }
bool debug_checks() { return g_debug_checks; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return from(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape_positive(shape);
    auto node = std::make_shared<TensorNode>();
    node->data.assign(static_cast<size_t>(numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    check_shape_positive(shape);
    auto node = std::make_shared<TensorNode>();
    const int64_t n = numel(shape);
    if (data.empty()) data.assign(static_cast<size_t>(n), 0.0);
    if (static_cast<int64_t>(data.size()) != n)
        throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }
int Tensor::dim(int axis) const { return node_->shape.at(static_cast<size_t>(axis)); }
int64_t Tensor::size() const { return static_cast<int64_t>(node_->data.size()); }
const std::vector<double>& Tensor::data() const { return node_->data; }
std::vector<double>& Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() requires a scalar tensor, got " + shape_str(shape()));
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->data.size(), 0.0);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }
Tape::~Tape() { g_active_tape = prev_; }
Tape* Tape::active() { return g_active_tape; }
void Tape::record(std::shared_ptr<TensorNode> node) { ops_.push_back(std::move(node)); }

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw Error("backward requires a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) throw Error("backward requires a grad-enabled loss");
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        TensorNode& n = **it;
        if (n.grad.empty()) continue;  // not reachable from the loss
        if (n.backward_fn) n.backward_fn();
    }
}

void backward(const Tensor& loss) {
    Tape* t = Tape::active();
    if (!t) throw Error("backward called with no active tape");
    t->backward(loss);
}

Tensor make_op(const char* name, Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs, std::function<void(TensorNode&)> backward) {
    check_finite(name, data);
    Tensor out = Tensor::from(std::move(shape), std::move(data));
    TensorNode* node = out.node().get();
    node->op_name = name;
    bool need_grad = false;
    for (const auto& in : inputs)
        if (in.defined() && in.requires_grad()) need_grad = true;
    Tape* tape = Tape::active();
    if (need_grad && tape) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        // raw self-pointer avoids a shared_ptr cycle; backward_fn only runs
        // while the node is alive on the tape
        node->backward_fn = [node, fn = std::move(backward)]() { fn(*node); };
        tape->record(out.node());
    }
    return out;
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Elementwise binary op on identical shapes.
// dfa/dfb give d(out)/d(a) and d(out)/d(b) from (a, b, out).
template <class F, class DA, class DB>
Tensor ew_binary(const char* name, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb) {
    require_same_shape(name, a, b);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[i]);
    return make_op(name, a.shape(), std::move(out), {a, b}, [a, b, dfa, dfb](TensorNode& n) {
        const auto& av = a.data();
        const auto& bv = b.data();
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            auto& ga = a.node()->grad;
            for (size_t i = 0; i < av.size(); ++i) ga[i] += n.grad[i] * dfa(av[i], bv[i], n.data[i]);
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            auto& gb = b.node()->grad;
            for (size_t i = 0; i < bv.size(); ++i) gb[i] += n.grad[i] * dfb(av[i], bv[i], n.data[i]);
        }
    });
}

template <class F, class DF>
Tensor ew_unary(const char* name, const Tensor& a, F f, DF df) {
    const auto& av = a.data();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return make_op(name, a.shape(), std::move(out), {a}, [a, df](TensorNode& n) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        const auto& av = a.data();
        auto& ga = a.node()->grad;
        for (size_t i = 0; i < av.size(); ++i) ga[i] += n.grad[i] * df(av[i], n.data[i]);
    });
}

double sigmoid_scalar(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    if (x > 30) return x;
    return std::log1p(std::exp(x));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return ew_binary("add", a, b, [](double x, double y) { return x + y; },
                     [](double, double, double) { return 1.0; },
                     [](double, double, double) { return 1.0; });
}
Tensor add(const Tensor& a, double b) {
    return ew_unary("add_s", a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return ew_binary("sub", a, b, [](double x, double y) { return x - y; },
                     [](double, double, double) { return 1.0; },
                     [](double, double, double) { return -1.0; });
}
Tensor sub(const Tensor& a, double b) { return add(a, -b); }
Tensor sub(double a, const Tensor& b) {
    return ew_unary("rsub_s", b, [a](double x) { return a - x; }, [](double, double) { return -1.0; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
    return ew_binary("mul", a, b, [](double x, double y) { return x * y; },
                     [](double, double y, double) { return y; },
                     [](double x, double, double) { return x; });
}
Tensor mul(const Tensor& a, double b) {
    return ew_unary("mul_s", a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}
Tensor div(const Tensor& a, const Tensor& b) {
    if (debug_checks()) {
        for (double y : b.data())
            if (y == 0.0) throw DomainError("div: zero divisor");
    }
    return ew_binary("div", a, b, [](double x, double y) { return x / y; },
                     [](double, double y, double) { return 1.0 / y; },
                     [](double, double y, double o) { return -o / y; });
}
Tensor div(const Tensor& a, double b) { return mul(a, 1.0 / b); }
Tensor div(double a, const Tensor& b) {
    return ew_unary("rdiv_s", b, [a](double x) { return a / x; }, [a](double x, double) { return -a / (x * x); });
}
Tensor neg(const Tensor& a) { return mul(a, -1.0); }
Tensor abs(const Tensor& a) {
    // subgradient 0 at the kink
    return ew_unary("abs", a, [](double x) { return std::fabs(x); },
                    [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}
Tensor exp(const Tensor& a) {
    return ew_unary("exp", a, [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}
Tensor log(const Tensor& a) {
    if (debug_checks()) {
        for (double x : a.data())
            if (x <= 0.0) throw DomainError("log: non-positive operand");
    }
    return ew_unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
Tensor sigmoid(const Tensor& a) {
    return ew_unary("sigmoid", a, sigmoid_scalar, [](double, double o) { return o * (1.0 - o); });
}
Tensor relu(const Tensor& a) {
    return ew_unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}
Tensor silu(const Tensor& a) {
    return ew_unary("silu", a, [](double x) { return x * sigmoid_scalar(x); },
                    [](double x, double) {
                        double s = sigmoid_scalar(x);
                        return s + x * s * (1.0 - s);
                    });
}
Tensor softplus(const Tensor& a) {
    return ew_unary("softplus", a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}
Tensor pow(const Tensor& a, double p) {
    return ew_unary("pow", a, [p](double x) { return std::pow(x, p); },
                    [p](double x, double) { return p * std::pow(x, p - 1.0); });
}
Tensor clamp(const Tensor& a, double lo, double hi) {
    return ew_unary("clamp", a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
                    [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    return make_op("sum", {1}, {s}, {a}, [a](TensorNode& n) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (auto& g : a.node()->grad) g += n.grad[0];
    });
}

Tensor mean(const Tensor& a) { return div(sum(a), static_cast<double>(a.size())); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const double x = av[static_cast<size_t>(i) * k + kk];
            if (x == 0.0) continue;
            const double* brow = &bv[static_cast<size_t>(kk) * n];
            double* orow = &out[static_cast<size_t>(i) * n];
            for (int j = 0; j < n; ++j) orow[j] += x * brow[j];
        }
    return make_op("matmul", {m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorNode& nd) {
        const auto& av = a.data();
        const auto& bv = b.data();
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            auto& ga = a.node()->grad;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = nd.grad[static_cast<size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    for (int kk = 0; kk < k; ++kk)
                        ga[static_cast<size_t>(i) * k + kk] += g * bv[static_cast<size_t>(kk) * n + j];
                }
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            auto& gb = b.node()->grad;
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    const double x = av[static_cast<size_t>(i) * k + kk];
                    if (x == 0.0) continue;
                    for (int j = 0; j < n; ++j)
                        gb[static_cast<size_t>(kk) * n + j] += x * nd.grad[static_cast<size_t>(i) * n + j];
                }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
        throw DimensionError("linear: incompatible shapes " + shape_str(x.shape()) + " / " + shape_str(w.shape()));
    const int m = x.dim(0), in = x.dim(1), out_n = w.dim(0);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_n))
        throw DimensionError("linear: bad bias shape");
    std::vector<double> out(static_cast<size_t>(m) * out_n, 0.0);
    const auto& xv = x.data();
    const auto& wv = w.data();
    for (int i = 0; i < m; ++i)
        for (int o = 0; o < out_n; ++o) {
            double s = bias.defined() ? bias.data()[static_cast<size_t>(o)] : 0.0;
            const double* xr = &xv[static_cast<size_t>(i) * in];
            const double* wr = &wv[static_cast<size_t>(o) * in];
            for (int kk = 0; kk < in; ++kk) s += xr[kk] * wr[kk];
            out[static_cast<size_t>(i) * out_n + o] = s;
        }
    return make_op("linear", {m, out_n}, std::move(out), {x, w, bias}, [x, w, bias, m, in, out_n](TensorNode& nd) {
        const auto& xv = x.data();
        const auto& wv = w.data();
        if (x.requires_grad()) {
            x.node()->ensure_grad();
            auto& gx = x.node()->grad;
            for (int i = 0; i < m; ++i)
                for (int o = 0; o < out_n; ++o) {
                    const double g = nd.grad[static_cast<size_t>(i) * out_n + o];
                    if (g == 0.0) continue;
                    const double* wr = &wv[static_cast<size_t>(o) * in];
                    for (int kk = 0; kk < in; ++kk) gx[static_cast<size_t>(i) * in + kk] += g * wr[kk];
                }
        }
        if (w.requires_grad()) {
            w.node()->ensure_grad();
            auto& gw = w.node()->grad;
            for (int i = 0; i < m; ++i)
                for (int o = 0; o < out_n; ++o) {
                    const double g = nd.grad[static_cast<size_t>(i) * out_n + o];
                    if (g == 0.0) continue;
                    const double* xr = &xv[static_cast<size_t>(i) * in];
                    for (int kk = 0; kk < in; ++kk) gw[static_cast<size_t>(o) * in + kk] += g * xr[kk];
                }
        }
        if (bias.defined() && bias.requires_grad()) {
            bias.node()->ensure_grad();
            auto& gb = bias.node()->grad;
            for (int i = 0; i < m; ++i)
                for (int o = 0; o < out_n; ++o) gb[static_cast<size_t>(o)] += nd.grad[static_cast<size_t>(i) * out_n + o];
        }
    });
}

namespace {
// Gather-based layout op: out[i] = in[map[i]]. Backward scatter-adds.
Tensor gather_op(const char* name, const Tensor& in, Shape out_shape, std::vector<int64_t> map) {
    const auto& iv = in.data();
    std::vector<double> out(map.size());
    for (size_t i = 0; i < map.size(); ++i) out[i] = iv[static_cast<size_t>(map[i])];
    auto map_sp = std::make_shared<std::vector<int64_t>>(std::move(map));
    return make_op(name, std::move(out_shape), std::move(out), {in}, [in, map_sp](TensorNode& n) {
        if (!in.requires_grad()) return;
        in.node()->ensure_grad();
        auto& g = in.node()->grad;
        const auto& m = *map_sp;
        for (size_t i = 0; i < m.size(); ++i) g[static_cast<size_t>(m[i])] += n.grad[i];
    });
}

// Row-major strides
std::vector<int64_t> strides_of(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}
}  // namespace

Tensor concat(const std::vector<Tensor>& ts, int axis) {
    if (ts.empty()) throw DimensionError("concat: empty input list");
    const Shape& s0 = ts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(s0.size())) throw DimensionError("concat: bad axis");
    int total = 0;
    for (const auto& t : ts) {
        if (t.rank() != static_cast<int>(s0.size())) throw DimensionError("concat: rank mismatch");
        for (int a = 0; a < t.rank(); ++a)
            if (a != axis && t.dim(a) != s0[static_cast<size_t>(a)])
                throw DimensionError("concat: non-axis extent mismatch at axis " + std::to_string(a));
        total += t.dim(axis);
    }
    Shape out_shape = s0;
    out_shape[static_cast<size_t>(axis)] = total;
    // outer = product of dims before axis, inner = product after
    int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= s0[static_cast<size_t>(a)];
    for (int a = axis + 1; a < static_cast<int>(s0.size()); ++a) inner *= s0[static_cast<size_t>(a)];
    std::vector<double> out(static_cast<size_t>(outer) * total * inner);
    std::vector<Tensor> inputs = ts;
    int offset = 0;
    for (const auto& t : ts) {
        const int ext = t.dim(axis);
        const auto& tv = t.data();
        for (int64_t o = 0; o < outer; ++o) {
            const double* src = &tv[static_cast<size_t>(o) * ext * inner];
            double* dst = &out[(static_cast<size_t>(o) * total + offset) * inner];
            std::copy(src, src + static_cast<size_t>(ext) * inner, dst);
        }
        offset += ext;
    }
    return make_op("concat", std::move(out_shape), std::move(out), std::move(inputs),
                   [ts, axis, outer, inner, total](TensorNode& n) {
                       int offset = 0;
                       for (const auto& t : ts) {
                           const int ext = t.dim(axis);
                           if (t.requires_grad()) {
                               t.node()->ensure_grad();
                               auto& g = t.node()->grad;
                               for (int64_t o = 0; o < outer; ++o) {
                                   const double* src = &n.grad[(static_cast<size_t>(o) * total + offset) * inner];
                                   double* dst = &g[static_cast<size_t>(o) * ext * inner];
                                   for (int64_t i = 0; i < static_cast<int64_t>(ext) * inner; ++i) dst[i] += src[i];
                               }
                           }
                           offset += ext;
                       }
                   });
}

Tensor slice(const Tensor& t, int axis, int start, int len) {
    const Shape& s = t.shape();
    if (axis < 0 || axis >= t.rank()) throw DimensionError("slice: bad axis");
    if (start < 0 || len <= 0 || start + len > s[static_cast<size_t>(axis)])
        throw DimensionError("slice: range out of bounds");
    Shape out_shape = s;
    out_shape[static_cast<size_t>(axis)] = len;
    auto st = strides_of(s);
    int64_t outer = 1, inner = st[static_cast<size_t>(axis)];
    for (int a = 0; a < axis; ++a) outer *= s[static_cast<size_t>(a)];
    const int ext = s[static_cast<size_t>(axis)];
    std::vector<int64_t> map(static_cast<size_t>(numel(out_shape)));
    size_t k = 0;
    for (int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < len; ++j)
            for (int64_t i = 0; i < inner; ++i)
                map[k++] = (o * ext + start + j) * inner + i;
    return gather_op("slice", t, std::move(out_shape), std::move(map));
}

Tensor stride_slice(const Tensor& t, int axis, int start, int step) {
    const Shape& s = t.shape();
    if (axis < 0 || axis >= t.rank()) throw DimensionError("stride_slice: bad axis");
    const int ext = s[static_cast<size_t>(axis)];
    if (start < 0 || start >= ext || step <= 0) throw DimensionError("stride_slice: bad range");
    const int len = (ext - start + step - 1) / step;
    Shape out_shape = s;
    out_shape[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= s[static_cast<size_t>(a)];
    for (int a = axis + 1; a < t.rank(); ++a) inner *= s[static_cast<size_t>(a)];
    std::vector<int64_t> map(static_cast<size_t>(numel(out_shape)));
    size_t k = 0;
    for (int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < len; ++j)
            for (int64_t i = 0; i < inner; ++i)
                map[k++] = (o * ext + start + static_cast<int64_t>(j) * step) * inner + i;
    return gather_op("stride_slice", t, std::move(out_shape), std::move(map));
}

Tensor interleave(const Tensor& a, const Tensor& b, int axis) {
    require_same_shape("interleave", a, b);
    if (axis < 0 || axis >= a.rank()) throw DimensionError("interleave: bad axis");
    const Shape& s = a.shape();
    const int ext = s[static_cast<size_t>(axis)];
    Shape out_shape = s;
    out_shape[static_cast<size_t>(axis)] = 2 * ext;
    int64_t outer = 1, inner = 1;
    for (int aidx = 0; aidx < axis; ++aidx) outer *= s[static_cast<size_t>(aidx)];
    for (int aidx = axis + 1; aidx < a.rank(); ++aidx) inner *= s[static_cast<size_t>(aidx)];
    std::vector<double> out(static_cast<size_t>(numel(out_shape)));
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < ext; ++j) {
            const double* sa = &av[(o * ext + j) * inner];
            const double* sb = &bv[(o * ext + j) * inner];
            double* da = &out[(o * 2 * ext + 2 * j) * inner];
            double* db = &out[(o * 2 * ext + 2 * j + 1) * inner];
            std::copy(sa, sa + inner, da);
            std::copy(sb, sb + inner, db);
        }
    return make_op("interleave", std::move(out_shape), std::move(out), {a, b},
                   [a, b, axis, outer, inner, ext](TensorNode& n) {
                       auto scatter = [&](const Tensor& t, int off) {
                           if (!t.requires_grad()) return;
                           t.node()->ensure_grad();
                           auto& g = t.node()->grad;
                           for (int64_t o = 0; o < outer; ++o)
                               for (int j = 0; j < ext; ++j) {
                                   const double* src = &n.grad[(o * 2 * ext + 2 * j + off) * inner];
                                   double* dst = &g[(o * ext + j) * inner];
                                   for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
                               }
                       };
                       scatter(a, 0);
                       scatter(b, 1);
                   });
}

std::pair<Tensor, Tensor> deinterleave(const Tensor& t, int axis) {
    if (t.dim(axis) % 2 != 0) throw DimensionError("deinterleave: odd extent on axis");
    return {stride_slice(t, axis, 0, 2), stride_slice(t, axis, 1, 2)};
}

Tensor reshape(const Tensor& t, Shape shape) {
    if (numel(shape) != t.size())
        throw DimensionError("reshape: element count mismatch " + shape_str(t.shape()) + " -> " + shape_str(shape));
    return make_op("reshape", std::move(shape), t.data(), {t}, [t](TensorNode& n) {
        if (!t.requires_grad()) return;
        t.node()->ensure_grad();
        auto& g = t.node()->grad;
        for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

Tensor flip(const Tensor& t, int axis) {
    const Shape& s = t.shape();
    if (axis < 0 || axis >= t.rank()) throw DimensionError("flip: bad axis");
    const int ext = s[static_cast<size_t>(axis)];
    int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= s[static_cast<size_t>(a)];
    for (int a = axis + 1; a < t.rank(); ++a) inner *= s[static_cast<size_t>(a)];
    std::vector<int64_t> map(static_cast<size_t>(t.size()));
    size_t k = 0;
    for (int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < ext; ++j)
            for (int64_t i = 0; i < inner; ++i)
                map[k++] = (o * ext + (ext - 1 - j)) * inner + i;
    return gather_op("flip", t, s, std::move(map));
}

Tensor transpose_hw(const Tensor& t) {
    if (t.rank() != 4) throw DimensionError("transpose_hw: expected NCHW tensor");
    const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
    std::vector<int64_t> map(static_cast<size_t>(t.size()));
    size_t k = 0;
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc)
        for (int x = 0; x < w; ++x)
            for (int y = 0; y < h; ++y)
                map[k++] = (nc * h + y) * w + x;
    return gather_op("transpose_hw", t, {n, c, w, h}, std::move(map));
}

Tensor nchw_to_nlc(const Tensor& t) {
    if (t.rank() != 4) throw DimensionError("nchw_to_nlc: expected NCHW tensor");
    const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
    const int64_t l = static_cast<int64_t>(h) * w;
    std::vector<int64_t> map(static_cast<size_t>(t.size()));
    size_t k = 0;
    for (int b = 0; b < n; ++b)
        for (int64_t p = 0; p < l; ++p)
            for (int ch = 0; ch < c; ++ch)
                map[k++] = (static_cast<int64_t>(b) * c + ch) * l + p;
    return gather_op("nchw_to_nlc", t, {n, static_cast<int>(l), c}, std::move(map));
}

Tensor nlc_to_nchw(const Tensor& t, int h, int w) {
    if (t.rank() != 3) throw DimensionError("nlc_to_nchw: expected (N,L,C) tensor");
    const int n = t.dim(0), l = t.dim(1), c = t.dim(2);
    if (l != h * w) throw DimensionError("nlc_to_nchw: L != H*W");
    std::vector<int64_t> map(static_cast<size_t>(t.size()));
    size_t k = 0;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int p = 0; p < l; ++p)
                map[k++] = (static_cast<int64_t>(b) * l + p) * c + ch;
    return gather_op("nlc_to_nchw", t, {n, c, h, w}, std::move(map));
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
    if (x.rank() != 4 || s.rank() != 2 || s.dim(0) != x.dim(0) || s.dim(1) != x.dim(1))
        throw DimensionError("scale_channels: expected x (N,C,H,W) and s (N,C)");
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    std::vector<double> out(static_cast<size_t>(x.size()));
    const auto& xv = x.data();
    const auto& sv = s.data();
    for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
        const double f = sv[static_cast<size_t>(nc)];
        for (int64_t i = 0; i < hw; ++i) out[static_cast<size_t>(nc * hw + i)] = xv[static_cast<size_t>(nc * hw + i)] * f;
    }
    return make_op("scale_channels", x.shape(), std::move(out), {x, s}, [x, s, n, c, hw](TensorNode& nd) {
        const auto& xv = x.data();
        const auto& sv = s.data();
        if (x.requires_grad()) {
            x.node()->ensure_grad();
            auto& gx = x.node()->grad;
            for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
                const double f = sv[static_cast<size_t>(nc)];
                for (int64_t i = 0; i < hw; ++i) gx[static_cast<size_t>(nc * hw + i)] += nd.grad[static_cast<size_t>(nc * hw + i)] * f;
            }
        }
        if (s.requires_grad()) {
            s.node()->ensure_grad();
            auto& gs = s.node()->grad;
            for (int64_t nc = 0; nc < static_cast<int64_t>(n) * c; ++nc) {
                double acc = 0.0;
                for (int64_t i = 0; i < hw; ++i) acc += nd.grad[static_cast<size_t>(nc * hw + i)] * xv[static_cast<size_t>(nc * hw + i)];
                gs[static_cast<size_t>(nc)] += acc;
            }
        }
    });
}

Tensor scale_spatial(const Tensor& x, const Tensor& m) {
    if (x.rank() != 4 || m.rank() != 4 || m.dim(0) != x.dim(0) || m.dim(1) != 1 ||
        m.dim(2) != x.dim(2) || m.dim(3) != x.dim(3))
        throw DimensionError("scale_spatial: expected x (N,C,H,W) and m (N,1,H,W)");
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
    std::vector<double> out(static_cast<size_t>(x.size()));
    const auto& xv = x.data();
    const auto& mv = m.data();
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int64_t i = 0; i < hw; ++i) {
                const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + i;
                out[xi] = xv[xi] * mv[static_cast<size_t>(b) * hw + i];
            }
    return make_op("scale_spatial", x.shape(), std::move(out), {x, m}, [x, m, n, c, hw](TensorNode& nd) {
        const auto& xv = x.data();
        const auto& mv = m.data();
        if (x.requires_grad()) {
            x.node()->ensure_grad();
            auto& gx = x.node()->grad;
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < hw; ++i) {
                        const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + i;
                        gx[xi] += nd.grad[xi] * mv[static_cast<size_t>(b) * hw + i];
                    }
        }
        if (m.requires_grad()) {
            m.node()->ensure_grad();
            auto& gm = m.node()->grad;
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c; ++ch)
                    for (int64_t i = 0; i < hw; ++i) {
                        const size_t xi = (static_cast<size_t>(b) * c + ch) * hw + i;
                        gm[static_cast<size_t>(b) * hw + i] += nd.grad[xi] * xv[xi];
                    }
        }
    });
}

}  // namespace stcd
