#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stcd {

// Error hierarchy; the CLI maps these to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// When enabled, every op verifies its output is finite and throws
// DomainError otherwise. Off by default for training throughput.
void set_debug_checks(bool on);
bool debug_checks();

struct TensorNode;

// Value-semantics handle to a shared tensor node. Data is immutable once an
// op has consumed the tensor; leaves may be mutated through mutable_data()
// between training steps.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    int dim(int axis) const;
    int64_t size() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data();
    double item() const;

    bool requires_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    std::shared_ptr<TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    const char* op_name = "leaf";
    std::vector<Tensor> inputs;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Records ops in creation order while active; backward replays in reverse.
// Tapes nest (RAII); the innermost one records.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();
    void record(std::shared_ptr<TensorNode> node);
    size_t size() const { return ops_.size(); }

    // loss must be a scalar recorded on this tape.
    void backward(const Tensor& loss);

private:
    std::vector<std::shared_ptr<TensorNode>> ops_;
    Tape* prev_ = nullptr;
};

// Registers `out` on the active tape with the given backward rule when any
// input requires grad. Op implementations call this once per output.
Tensor make_op(const char* name, Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs, std::function<void(TensorNode&)> backward);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, double b);
Tensor div(double a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor pow(const Tensor& a, double p);
Tensor clamp(const Tensor& a, double lo, double hi);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// ---- linear algebra ----
// a: (M, K), b: (K, N) -> (M, N)
Tensor matmul(const Tensor& a, const Tensor& b);
// x: (M, In), w: (Out, In), bias: optional (Out) -> (M, Out)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

// ---- layout ----
Tensor concat(const std::vector<Tensor>& ts, int axis);
Tensor slice(const Tensor& t, int axis, int start, int len);
// Every `step`-th index along axis, starting at `start`.
Tensor stride_slice(const Tensor& t, int axis, int start, int step);
Tensor interleave(const Tensor& a, const Tensor& b, int axis);
std::pair<Tensor, Tensor> deinterleave(const Tensor& t, int axis);
Tensor reshape(const Tensor& t, Shape shape);
Tensor flip(const Tensor& t, int axis);
// (N, C, H, W) -> (N, C, W, H)
Tensor transpose_hw(const Tensor& t);
// (N, C, H, W) -> (N, H*W, C) row-major token order, and back.
Tensor nchw_to_nlc(const Tensor& t);
Tensor nlc_to_nchw(const Tensor& t, int h, int w);

// ---- limited broadcasting products (mask application) ----
// x: (N, C, H, W), s: (N, C) -> per-channel scaling
Tensor scale_channels(const Tensor& x, const Tensor& s);
// x: (N, C, H, W), m: (N, 1, H, W) -> per-pixel scaling
Tensor scale_spatial(const Tensor& x, const Tensor& m);

void backward(const Tensor& loss);

}  // namespace stcd
