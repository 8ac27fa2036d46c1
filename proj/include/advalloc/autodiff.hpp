#pragma once
// Reverse-mode automatic differentiation on a dynamic tape, plus the small
// parameter/optimizer/MLP toolkit built on top of it.
//
// Nodes hold vector values; creation order is the topological order, so
// backward() is a single reverse sweep. Value and adjoint storage live in
// chunked arenas owned by the tape: spans stay valid until clear().

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace advalloc::ad {

// Raised when a forward value turns non-finite; names the offending node.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(std::span<const double> value);
  Var leaf(double value);

  // Elementwise, equal lengths. Ties in minimum/maximum follow the first
  // argument; relu is 0-gradient at 0 (inactive branch).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var minimum(Var a, Var b);
  Var maximum(Var a, Var b);
  Var relu(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sigmoid(Var a);
  Var gauss_cdf(Var a);  // standard normal CDF
  Var scale(Var a, double s);
  Var add_const(Var a, double c);

  Var slice(Var a, int offset, int len);
  Var concat(std::span<const Var> parts);
  Var index(Var a, int i) { return slice(a, i, 1); }

  Var sum(Var a);                               // length-1 result
  Var dot(Var a, Var b);                        // length-1 result
  Var affine(Var w, Var x, Var b, int rows, int cols);  // y = Wx + b
  Var softmax(Var a);

  // Row-batched forms. `xs` packs one sample per row (row-major); each output
  // row is the same op applied to the matching input row, so a batch of b
  // samples costs one node instead of b.
  Var affine_rows(Var w, Var xs, Var b, int rows, int cols);  // y_t = Wx_t + b
  Var softmax_rows(Var a, int row_len);
  Var row_sums(Var a, int row_len);  // one scalar per row

  // Scalar whose value and gradient w.r.t. `input` were computed externally
  // (e.g. by an LP solve with an envelope-theorem gradient).
  Var external_scalar(Var input, double value, std::vector<double> grad);

  int size(Var v) const;
  std::span<const double> value(Var v) const;
  double scalar(Var v) const;

  // Seeds the (length-1) root with adjoint 1 and sweeps the tape in reverse.
  void backward(Var root);
  std::span<const double> adjoint(Var v) const;

  // Drops all nodes but keeps arena capacity for reuse.
  void clear();
  std::size_t node_count() const;

 private:
  struct Node;
  struct Arena;
  Var push(Node n, const char* what);
  double* val(int32_t id);
  const double* val(int32_t id) const;
  double* adj(int32_t id);

  std::vector<Node> nodes_;
  std::unique_ptr<Arena> values_;
  std::unique_ptr<Arena> adjoints_;
  std::vector<int32_t> extra_;           // concat child lists
  std::vector<std::vector<double>> ext_grads_;  // external_scalar gradients
};

// ---------------------------------------------------------------------------
// Flat parameter vector with named segments.

struct ParamSegment {
  std::string name;
  std::vector<int> shape;
  int offset = 0;
  int size = 0;
};

struct ParamVector {
  std::vector<double> values;
  std::vector<ParamSegment> segments;

  int add(const std::string& name, std::vector<int> shape);  // zero-filled
  bool has(const std::string& name) const;
  const ParamSegment& segment(const std::string& name) const;
  std::span<double> view(const std::string& name);
  std::span<const double> view(const std::string& name) const;
  int size() const { return static_cast<int>(values.size()); }
};

// Runs `program` on a fresh tape with the parameters as one flat leaf and
// returns (value, d value / d params). The program must return a scalar.
std::pair<double, std::vector<double>> evaluate_and_grad(
    const std::function<Var(Tape&, Var)>& program, const ParamVector& params);

// ---------------------------------------------------------------------------
// Adam with bias correction.

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<double> m, v;

  AdamState() = default;
  explicit AdamState(int dim, double lr = 1e-3);
  void step(std::vector<double>& params, std::span<const double> grad,
            bool ascend = false);
};

// ---------------------------------------------------------------------------
// Dense MLP. Parameters are laid out as segments "L<k>.W" (out x in,
// row-major) and "L<k>.b" (out) in layer order.

enum class Act { linear, relu, sigmoid };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Act act = Act::linear;
};

struct MlpSpec {
  std::vector<LayerSpec> layers;
  static MlpSpec dense(const std::vector<int>& dims, Act hidden, Act out);
  int input_dim() const;
  int output_dim() const;
  int param_count() const;
};

// Weights uniform in +-sqrt(6/(fan_in+fan_out)); biases zero.
ParamVector mlp_init(const MlpSpec& spec, std::mt19937_64& rng);

// Plain double-path forward.
std::vector<double> mlp_apply(const MlpSpec& spec, const ParamVector& params,
                              std::span<const double> x);

// Double-path forward over a batch of inputs packed row-major; returns the
// outputs packed the same way. Each row matches mlp_apply on that row.
std::vector<double> mlp_apply_batch(const MlpSpec& spec,
                                    const ParamVector& params,
                                    std::span<const double> xs);

// Tape-path forward over a flat parameter leaf laid out by mlp_init.
Var mlp_apply(Tape& tape, const MlpSpec& spec, Var params_flat, Var x);

// Tape-path forward over row-major batched inputs (one node per layer).
Var mlp_apply_rows(Tape& tape, const MlpSpec& spec, Var params_flat, Var xs);

// Permutation-invariant accumulation: sorts a copy ascending before adding,
// so any reordering of the inputs produces the bit-identical sum.
double stable_sum(std::span<const double> xs);

}  // namespace advalloc::ad
