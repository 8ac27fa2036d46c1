#include "advalloc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace advalloc::ad {

namespace {

enum class Op : uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  min,
  max,
  relu,
  exp,
  log,
  sigmoid,
  gauss_cdf,
  scale,
  add_const,
  slice,
  concat,
  sum,
  dot,
  affine,
  softmax,
  external,
  affine_rows,
  softmax_rows,
  row_sums,
};

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

struct Tape::Node {
  Op op = Op::leaf;
  int32_t a = -1, b = -1, c = -1;  // inputs (affine: W, x, bias)
  int32_t len = 0;
  int64_t off = -1;      // value offset in the arena
  int64_t adj_off = -1;  // adjoint offset, assigned during backward
  int32_t aux0 = 0, aux1 = 0;  // slice offset / concat list / affine dims
  double scalar_arg = 0.0;
};

// Bump allocator with stable addresses (fixed-size chunks).
struct Tape::Arena {
  static constexpr int64_t kChunk = 1 << 19;
  std::vector<std::unique_ptr<double[]>> chunks;
  int64_t used = 0;

  int64_t alloc(int32_t n, bool zero) {
    if (n > kChunk) throw std::invalid_argument("tape: node too large");
    int64_t chunk = used / kChunk;
    int64_t within = used % kChunk;
    if (within + n > kChunk) {  // skip chunk tail; keep nodes contiguous
      used = (chunk + 1) * kChunk;
      chunk += 1;
      within = 0;
    }
    while (chunk >= static_cast<int64_t>(chunks.size()))
      chunks.push_back(std::make_unique<double[]>(kChunk));
    int64_t off = used;
    used += n;
    if (zero) std::memset(chunks[chunk].get() + within, 0, sizeof(double) * n);
    return off;
  }
  double* at(int64_t off) {
    return chunks[off / kChunk].get() + (off % kChunk);
  }
  const double* at(int64_t off) const {
    return chunks[off / kChunk].get() + (off % kChunk);
  }
  void reset() { used = 0; }
};

Tape::Tape()
    : values_(std::make_unique<Arena>()), adjoints_(std::make_unique<Arena>()) {}
Tape::~Tape() = default;

double* Tape::val(int32_t id) { return values_->at(nodes_[id].off); }
const double* Tape::val(int32_t id) const { return values_->at(nodes_[id].off); }
double* Tape::adj(int32_t id) { return adjoints_->at(nodes_[id].adj_off); }

Var Tape::push(Node n, const char* what) {
  const double* v = values_->at(n.off);
  for (int32_t i = 0; i < n.len; ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(std::string("non-finite value in node ") +
                         std::to_string(nodes_.size()) + " (" + what + ")");
    }
  }
  nodes_.push_back(n);
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

int Tape::size(Var v) const { return nodes_.at(v.id).len; }

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return {values_->at(n.off), static_cast<size_t>(n.len)};
}

double Tape::scalar(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.len != 1) throw std::invalid_argument("tape: scalar() on vector node");
  return *values_->at(n.off);
}

std::span<const double> Tape::adjoint(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.adj_off < 0) throw std::logic_error("tape: adjoint before backward");
  return {adjoints_->at(n.adj_off), static_cast<size_t>(n.len)};
}

std::size_t Tape::node_count() const { return nodes_.size(); }

void Tape::clear() {
  nodes_.clear();
  extra_.clear();
  ext_grads_.clear();
  values_->reset();
  adjoints_->reset();
}

Var Tape::leaf(std::span<const double> value) {
  Node n;
  n.op = Op::leaf;
  n.len = static_cast<int32_t>(value.size());
  n.off = values_->alloc(n.len, false);
  std::copy(value.begin(), value.end(), values_->at(n.off));
  return push(n, "leaf");
}

Var Tape::leaf(double value) { return leaf(std::span<const double>(&value, 1)); }

namespace {
void check_same_len(const char* what, int a, int b) {
  if (a != b)
    throw std::invalid_argument(std::string("tape: ") + what +
                                " length mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}
}  // namespace

#define ADV_BINARY_PRELUDE(WHAT)                        \
  check_same_len(WHAT, size(a), size(b));               \
  Node n;                                               \
  n.a = a.id;                                           \
  n.b = b.id;                                           \
  n.len = nodes_[a.id].len;                             \
  n.off = values_->alloc(n.len, false);                 \
  const double* pa = val(a.id);                         \
  const double* pb = val(b.id);                         \
  double* out = values_->at(n.off);

Var Tape::add(Var a, Var b) {
  ADV_BINARY_PRELUDE("add")
  n.op = Op::add;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] + pb[i];
  return push(n, "add");
}

Var Tape::sub(Var a, Var b) {
  ADV_BINARY_PRELUDE("sub")
  n.op = Op::sub;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] - pb[i];
  return push(n, "sub");
}

Var Tape::mul(Var a, Var b) {
  ADV_BINARY_PRELUDE("mul")
  n.op = Op::mul;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] * pb[i];
  return push(n, "mul");
}

Var Tape::div(Var a, Var b) {
  ADV_BINARY_PRELUDE("div")
  n.op = Op::div;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] / pb[i];
  return push(n, "div");
}

Var Tape::minimum(Var a, Var b) {
  ADV_BINARY_PRELUDE("min")
  n.op = Op::min;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] <= pb[i] ? pa[i] : pb[i];
  return push(n, "min");
}

Var Tape::maximum(Var a, Var b) {
  ADV_BINARY_PRELUDE("max")
  n.op = Op::max;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] >= pb[i] ? pa[i] : pb[i];
  return push(n, "max");
}

#undef ADV_BINARY_PRELUDE

#define ADV_UNARY_PRELUDE                               \
  Node n;                                               \
  n.a = a.id;                                           \
  n.len = nodes_[a.id].len;                             \
  n.off = values_->alloc(n.len, false);                 \
  const double* pa = val(a.id);                         \
  double* out = values_->at(n.off);

Var Tape::relu(Var a) {
  ADV_UNARY_PRELUDE
  n.op = Op::relu;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  return push(n, "relu");
}

Var Tape::exp(Var a) {
  ADV_UNARY_PRELUDE
  n.op = Op::exp;
  for (int32_t i = 0; i < n.len; ++i) out[i] = std::exp(pa[i]);
  return push(n, "exp");
}

Var Tape::log(Var a) {
  ADV_UNARY_PRELUDE
  n.op = Op::log;
  for (int32_t i = 0; i < n.len; ++i) out[i] = std::log(pa[i]);
  return push(n, "log");
}

Var Tape::sigmoid(Var a) {
  ADV_UNARY_PRELUDE
  n.op = Op::sigmoid;
  for (int32_t i = 0; i < n.len; ++i) out[i] = 1.0 / (1.0 + std::exp(-pa[i]));
  return push(n, "sigmoid");
}

Var Tape::gauss_cdf(Var a) {
  ADV_UNARY_PRELUDE
  n.op = Op::gauss_cdf;
  for (int32_t i = 0; i < n.len; ++i)
    out[i] = 0.5 * std::erfc(-pa[i] * kInvSqrt2);
  return push(n, "gauss_cdf");
}

Var Tape::scale(Var a, double s) {
  ADV_UNARY_PRELUDE
  n.op = Op::scale;
  n.scalar_arg = s;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] * s;
  return push(n, "scale");
}

Var Tape::add_const(Var a, double c) {
  ADV_UNARY_PRELUDE
  n.op = Op::add_const;
  n.scalar_arg = c;
  for (int32_t i = 0; i < n.len; ++i) out[i] = pa[i] + c;
  return push(n, "add_const");
}

#undef ADV_UNARY_PRELUDE

Var Tape::slice(Var a, int offset, int len) {
  if (offset < 0 || len < 0 || offset + len > size(a))
    throw std::invalid_argument("tape: slice out of range");
  Node n;
  n.op = Op::slice;
  n.a = a.id;
  n.len = len;
  n.aux0 = offset;
  n.off = values_->alloc(len, false);
  const double* pa = val(a.id);
  std::copy(pa + offset, pa + offset + len, values_->at(n.off));
  return push(n, "slice");
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("tape: concat of nothing");
  int32_t total = 0;
  for (Var p : parts) total += nodes_.at(p.id).len;
  Node n;
  n.op = Op::concat;
  n.len = total;
  n.aux0 = static_cast<int32_t>(extra_.size());
  n.aux1 = static_cast<int32_t>(parts.size());
  n.off = values_->alloc(total, false);
  double* out = values_->at(n.off);
  for (Var p : parts) {
    extra_.push_back(p.id);
    const Node& pn = nodes_[p.id];
    std::copy(values_->at(pn.off), values_->at(pn.off) + pn.len, out);
    out += pn.len;
  }
  return push(n, "concat");
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::sum;
  n.a = a.id;
  n.len = 1;
  n.off = values_->alloc(1, false);
  const double* pa = val(a.id);
  double acc = 0.0;
  for (int32_t i = 0; i < nodes_[a.id].len; ++i) acc += pa[i];
  *values_->at(n.off) = acc;
  return push(n, "sum");
}

Var Tape::dot(Var a, Var b) {
  check_same_len("dot", size(a), size(b));
  Node n;
  n.op = Op::dot;
  n.a = a.id;
  n.b = b.id;
  n.len = 1;
  n.off = values_->alloc(1, false);
  const double* pa = val(a.id);
  const double* pb = val(b.id);
  double acc = 0.0;
  for (int32_t i = 0; i < nodes_[a.id].len; ++i) acc += pa[i] * pb[i];
  *values_->at(n.off) = acc;
  return push(n, "dot");
}

Var Tape::affine(Var w, Var x, Var b, int rows, int cols) {
  if (size(w) != rows * cols)
    throw std::invalid_argument("tape: affine weight size mismatch");
  check_same_len("affine input", size(x), cols);
  check_same_len("affine bias", size(b), rows);
  Node n;
  n.op = Op::affine;
  n.a = w.id;
  n.b = x.id;
  n.c = b.id;
  n.len = rows;
  n.aux0 = rows;
  n.aux1 = cols;
  n.off = values_->alloc(rows, false);
  const double* pw = val(w.id);
  const double* px = val(x.id);
  const double* pb = val(b.id);
  double* out = values_->at(n.off);
  for (int r = 0; r < rows; ++r) {
    double acc = pb[r];
    const double* wr = pw + static_cast<int64_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * px[c];
    out[r] = acc;
  }
  return push(n, "affine");
}

Var Tape::softmax(Var a) {
  Node n;
  n.op = Op::softmax;
  n.a = a.id;
  n.len = nodes_[a.id].len;
  n.off = values_->alloc(n.len, false);
  const double* pa = val(a.id);
  double* out = values_->at(n.off);
  double mx = pa[0];
  for (int32_t i = 1; i < n.len; ++i) mx = std::max(mx, pa[i]);
  double denom = 0.0;
  for (int32_t i = 0; i < n.len; ++i) {
    out[i] = std::exp(pa[i] - mx);
    denom += out[i];
  }
  for (int32_t i = 0; i < n.len; ++i) out[i] /= denom;
  return push(n, "softmax");
}

namespace {
int batch_of(const char* what, int total, int row_len) {
  if (row_len < 1 || total % row_len != 0) {
    throw std::invalid_argument(std::string("tape: ") + what +
                                " row length " + std::to_string(row_len) +
                                " does not divide " + std::to_string(total));
  }
  return total / row_len;
}
}  // namespace

Var Tape::affine_rows(Var w, Var xs, Var b, int rows, int cols) {
  if (size(w) != rows * cols)
    throw std::invalid_argument("tape: affine_rows weight size mismatch");
  check_same_len("affine_rows bias", size(b), rows);
  const int batch = batch_of("affine_rows input", size(xs), cols);
  Node n;
  n.op = Op::affine_rows;
  n.a = w.id;
  n.b = xs.id;
  n.c = b.id;
  n.len = batch * rows;
  n.aux0 = rows;
  n.aux1 = cols;
  n.off = values_->alloc(n.len, false);
  const double* pw = val(w.id);
  const double* px = val(xs.id);
  const double* pb = val(b.id);
  double* out = values_->at(n.off);
  for (int t = 0; t < batch; ++t) {
    const double* xt = px + static_cast<int64_t>(t) * cols;
    double* ot = out + static_cast<int64_t>(t) * rows;
    for (int r = 0; r < rows; ++r) {
      double acc = pb[r];
      const double* wr = pw + static_cast<int64_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += wr[c] * xt[c];
      ot[r] = acc;
    }
  }
  return push(n, "affine_rows");
}

Var Tape::softmax_rows(Var a, int row_len) {
  const int batch = batch_of("softmax_rows", size(a), row_len);
  Node n;
  n.op = Op::softmax_rows;
  n.a = a.id;
  n.len = nodes_[a.id].len;
  n.aux0 = row_len;
  n.off = values_->alloc(n.len, false);
  const double* pa = val(a.id);
  double* out = values_->at(n.off);
  for (int t = 0; t < batch; ++t) {
    const double* at = pa + static_cast<int64_t>(t) * row_len;
    double* ot = out + static_cast<int64_t>(t) * row_len;
    double mx = at[0];
    for (int i = 1; i < row_len; ++i) mx = std::max(mx, at[i]);
    double denom = 0.0;
    for (int i = 0; i < row_len; ++i) {
      ot[i] = std::exp(at[i] - mx);
      denom += ot[i];
    }
    for (int i = 0; i < row_len; ++i) ot[i] /= denom;
  }
  return push(n, "softmax_rows");
}

Var Tape::row_sums(Var a, int row_len) {
  const int batch = batch_of("row_sums", size(a), row_len);
  Node n;
  n.op = Op::row_sums;
  n.a = a.id;
  n.len = batch;
  n.aux0 = row_len;
  n.off = values_->alloc(batch, false);
  const double* pa = val(a.id);
  double* out = values_->at(n.off);
  for (int t = 0; t < batch; ++t) {
    const double* at = pa + static_cast<int64_t>(t) * row_len;
    double acc = 0.0;
    for (int i = 0; i < row_len; ++i) acc += at[i];
    out[t] = acc;
  }
  return push(n, "row_sums");
}

Var Tape::external_scalar(Var input, double value, std::vector<double> grad) {
  check_same_len("external gradient", size(input),
                 static_cast<int>(grad.size()));
  Node n;
  n.op = Op::external;
  n.a = input.id;
  n.len = 1;
  n.aux0 = static_cast<int32_t>(ext_grads_.size());
  n.off = values_->alloc(1, false);
  *values_->at(n.off) = value;
  for (double g : grad) {
    if (!std::isfinite(g))
      throw NumericError("non-finite external gradient entry");
  }
  ext_grads_.push_back(std::move(grad));
  return push(n, "external");
}

void Tape::backward(Var root) {
  const Node& r = nodes_.at(root.id);
  if (r.len != 1) throw std::invalid_argument("tape: backward needs a scalar");
  adjoints_->reset();
  for (int32_t i = 0; i <= root.id; ++i) {
    nodes_[i].adj_off = adjoints_->alloc(nodes_[i].len, true);
  }
  for (int32_t i = root.id + 1; i < static_cast<int32_t>(nodes_.size()); ++i)
    nodes_[i].adj_off = -1;
  *adj(root.id) = 1.0;

  for (int32_t id = root.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    const double* g = adj(id);
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (int32_t i = 0; i < n.len; ++i) {
          da[i] += g[i];
          db[i] += g[i];
        }
        break;
      }
      case Op::sub: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (int32_t i = 0; i < n.len; ++i) {
          da[i] += g[i];
          db[i] -= g[i];
        }
        break;
      }
      case Op::mul: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        for (int32_t i = 0; i < n.len; ++i) {
          da[i] += g[i] * pb[i];
          db[i] += g[i] * pa[i];
        }
        break;
      }
      case Op::div: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        for (int32_t i = 0; i < n.len; ++i) {
          da[i] += g[i] / pb[i];
          db[i] -= g[i] * pa[i] / (pb[i] * pb[i]);
        }
        break;
      }
      case Op::min: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        for (int32_t i = 0; i < n.len; ++i) {
          if (pa[i] <= pb[i])
            da[i] += g[i];
          else
            db[i] += g[i];
        }
        break;
      }
      case Op::max: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        for (int32_t i = 0; i < n.len; ++i) {
          if (pa[i] >= pb[i])
            da[i] += g[i];
          else
            db[i] += g[i];
        }
        break;
      }
      case Op::relu: {
        double* da = adj(n.a);
        const double* pa = val(n.a);
        for (int32_t i = 0; i < n.len; ++i)
          if (pa[i] > 0.0) da[i] += g[i];
        break;
      }
      case Op::exp: {
        double* da = adj(n.a);
        const double* out = values_->at(n.off);
        for (int32_t i = 0; i < n.len; ++i) da[i] += g[i] * out[i];
        break;
      }
      case Op::log: {
        double* da = adj(n.a);
        const double* pa = val(n.a);
        for (int32_t i = 0; i < n.len; ++i) da[i] += g[i] / pa[i];
        break;
      }
      case Op::sigmoid: {
        double* da = adj(n.a);
        const double* out = values_->at(n.off);
        for (int32_t i = 0; i < n.len; ++i)
          da[i] += g[i] * out[i] * (1.0 - out[i]);
        break;
      }
      case Op::gauss_cdf: {
        double* da = adj(n.a);
        const double* pa = val(n.a);
        for (int32_t i = 0; i < n.len; ++i)
          da[i] += g[i] * kInvSqrt2Pi * std::exp(-0.5 * pa[i] * pa[i]);
        break;
      }
      case Op::scale: {
        double* da = adj(n.a);
        for (int32_t i = 0; i < n.len; ++i) da[i] += g[i] * n.scalar_arg;
        break;
      }
      case Op::add_const: {
        double* da = adj(n.a);
        for (int32_t i = 0; i < n.len; ++i) da[i] += g[i];
        break;
      }
      case Op::slice: {
        double* da = adj(n.a);
        for (int32_t i = 0; i < n.len; ++i) da[n.aux0 + i] += g[i];
        break;
      }
      case Op::concat: {
        int32_t pos = 0;
        for (int32_t k = 0; k < n.aux1; ++k) {
          int32_t child = extra_[n.aux0 + k];
          double* dc = adj(child);
          int32_t clen = nodes_[child].len;
          for (int32_t i = 0; i < clen; ++i) dc[i] += g[pos + i];
          pos += clen;
        }
        break;
      }
      case Op::sum: {
        double* da = adj(n.a);
        int32_t alen = nodes_[n.a].len;
        for (int32_t i = 0; i < alen; ++i) da[i] += g[0];
        break;
      }
      case Op::dot: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        int32_t alen = nodes_[n.a].len;
        for (int32_t i = 0; i < alen; ++i) {
          da[i] += g[0] * pb[i];
          db[i] += g[0] * pa[i];
        }
        break;
      }
      case Op::affine: {
        const int rows = n.aux0, cols = n.aux1;
        double* dw = adj(n.a);
        double* dx = adj(n.b);
        double* db = adj(n.c);
        const double* pw = val(n.a);
        const double* px = val(n.b);
        for (int r = 0; r < rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* dwr = dw + static_cast<int64_t>(r) * cols;
          const double* wr = pw + static_cast<int64_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            dwr[c] += gr * px[c];
            dx[c] += gr * wr[c];
          }
          db[r] += gr;
        }
        break;
      }
      case Op::softmax: {
        double* da = adj(n.a);
        const double* out = values_->at(n.off);
        double gy = 0.0;
        for (int32_t i = 0; i < n.len; ++i) gy += g[i] * out[i];
        for (int32_t i = 0; i < n.len; ++i) da[i] += out[i] * (g[i] - gy);
        break;
      }
      case Op::external: {
        double* da = adj(n.a);
        const std::vector<double>& eg = ext_grads_[n.aux0];
        for (size_t i = 0; i < eg.size(); ++i) da[i] += g[0] * eg[i];
        break;
      }
      case Op::affine_rows: {
        const int rows = n.aux0, cols = n.aux1;
        const int batch = n.len / rows;
        double* dw = adj(n.a);
        double* dx = adj(n.b);
        double* db = adj(n.c);
        const double* pw = val(n.a);
        const double* px = val(n.b);
        for (int t = 0; t < batch; ++t) {
          const double* gt = g + static_cast<int64_t>(t) * rows;
          const double* xt = px + static_cast<int64_t>(t) * cols;
          double* dxt = dx + static_cast<int64_t>(t) * cols;
          for (int r = 0; r < rows; ++r) {
            const double gr = gt[r];
            if (gr == 0.0) continue;
            double* dwr = dw + static_cast<int64_t>(r) * cols;
            const double* wr = pw + static_cast<int64_t>(r) * cols;
            for (int c = 0; c < cols; ++c) {
              dwr[c] += gr * xt[c];
              dxt[c] += gr * wr[c];
            }
            db[r] += gr;
          }
        }
        break;
      }
      case Op::softmax_rows: {
        const int row_len = n.aux0;
        const int batch = n.len / row_len;
        double* da = adj(n.a);
        const double* out = values_->at(n.off);
        for (int t = 0; t < batch; ++t) {
          const double* gt = g + static_cast<int64_t>(t) * row_len;
          const double* ot = out + static_cast<int64_t>(t) * row_len;
          double* dt = da + static_cast<int64_t>(t) * row_len;
          double gy = 0.0;
          for (int i = 0; i < row_len; ++i) gy += gt[i] * ot[i];
          for (int i = 0; i < row_len; ++i) dt[i] += ot[i] * (gt[i] - gy);
        }
        break;
      }
      case Op::row_sums: {
        const int row_len = n.aux0;
        double* da = adj(n.a);
        for (int t = 0; t < n.len; ++t) {
          double* dt = da + static_cast<int64_t>(t) * row_len;
          for (int i = 0; i < row_len; ++i) dt[i] += g[t];
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

int ParamVector::add(const std::string& name, std::vector<int> shape) {
  int sz = 1;
  for (int d : shape) sz *= d;
  ParamSegment seg;
  seg.name = name;
  seg.shape = std::move(shape);
  seg.offset = static_cast<int>(values.size());
  seg.size = sz;
  segments.push_back(std::move(seg));
  values.resize(values.size() + sz, 0.0);
  return segments.back().offset;
}

bool ParamVector::has(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return true;
  return false;
}

const ParamSegment& ParamVector::segment(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown parameter segment: " + name);
}

std::span<double> ParamVector::view(const std::string& name) {
  const ParamSegment& s = segment(name);
  return {values.data() + s.offset, static_cast<size_t>(s.size)};
}

std::span<const double> ParamVector::view(const std::string& name) const {
  const ParamSegment& s = segment(name);
  return {values.data() + s.offset, static_cast<size_t>(s.size)};
}

std::pair<double, std::vector<double>> evaluate_and_grad(
    const std::function<Var(Tape&, Var)>& program, const ParamVector& params) {
  if (params.values.empty())
    throw std::invalid_argument("evaluate_and_grad: empty parameter vector");
  Tape tape;
  Var p = tape.leaf(params.values);
  Var out = program(tape, p);
  double value = tape.scalar(out);
  tape.backward(out);
  auto g = tape.adjoint(p);
  return {value, std::vector<double>(g.begin(), g.end())};
}

// ---------------------------------------------------------------------------

AdamState::AdamState(int dim, double lr_)
    : lr(lr_), m(dim, 0.0), v(dim, 0.0) {}

void AdamState::step(std::vector<double>& params, std::span<const double> grad,
                     bool ascend) {
  if (params.size() != grad.size() || params.size() != m.size())
    throw std::invalid_argument("adam: size mismatch");
  t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  const double sign = ascend ? 1.0 : -1.0;
  for (size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    params[i] += sign * lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// ---------------------------------------------------------------------------

MlpSpec MlpSpec::dense(const std::vector<int>& dims, Act hidden, Act out) {
  if (dims.size() < 2) throw std::invalid_argument("mlp: need >= 2 dims");
  MlpSpec spec;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerSpec l;
    l.in = dims[i];
    l.out = dims[i + 1];
    l.act = (i + 2 < dims.size()) ? hidden : out;
    spec.layers.push_back(l);
  }
  return spec;
}

int MlpSpec::input_dim() const { return layers.front().in; }
int MlpSpec::output_dim() const { return layers.back().out; }

int MlpSpec::param_count() const {
  int n = 0;
  for (const auto& l : layers) n += l.out * (l.in + 1);
  return n;
}

ParamVector mlp_init(const MlpSpec& spec, std::mt19937_64& rng) {
  ParamVector p;
  for (size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerSpec& l = spec.layers[k];
    p.add("L" + std::to_string(k) + ".W", {l.out, l.in});
    p.add("L" + std::to_string(k) + ".b", {l.out});
    const double bound = std::sqrt(6.0 / (l.in + l.out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : p.view("L" + std::to_string(k) + ".W")) w = u(rng);
  }
  return p;
}

namespace {
void apply_act(Act act, std::vector<double>& y) {
  switch (act) {
    case Act::linear:
      break;
    case Act::relu:
      for (double& v : y) v = v > 0.0 ? v : 0.0;
      break;
    case Act::sigmoid:
      for (double& v : y) v = 1.0 / (1.0 + std::exp(-v));
      break;
  }
}
}  // namespace

std::vector<double> mlp_apply(const MlpSpec& spec, const ParamVector& params,
                              std::span<const double> x) {
  if (static_cast<int>(x.size()) != spec.input_dim())
    throw std::invalid_argument("mlp: input size mismatch");
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerSpec& l = spec.layers[k];
    auto W = params.view("L" + std::to_string(k) + ".W");
    auto b = params.view("L" + std::to_string(k) + ".b");
    next.assign(l.out, 0.0);
    for (int r = 0; r < l.out; ++r) {
      double acc = b[r];
      const double* wr = W.data() + static_cast<int64_t>(r) * l.in;
      for (int c = 0; c < l.in; ++c) acc += wr[c] * cur[c];
      next[r] = acc;
    }
    apply_act(l.act, next);
    cur.swap(next);
  }
  return cur;
}

std::vector<double> mlp_apply_batch(const MlpSpec& spec,
                                    const ParamVector& params,
                                    std::span<const double> xs) {
  const int in = spec.input_dim();
  if (in < 1 || xs.size() % static_cast<size_t>(in) != 0)
    throw std::invalid_argument("mlp: batch input size mismatch");
  const int batch = static_cast<int>(xs.size()) / in;
  std::vector<double> cur(xs.begin(), xs.end());
  std::vector<double> next;
  for (size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerSpec& l = spec.layers[k];
    auto W = params.view("L" + std::to_string(k) + ".W");
    auto b = params.view("L" + std::to_string(k) + ".b");
    next.assign(static_cast<size_t>(batch) * l.out, 0.0);
    for (int t = 0; t < batch; ++t) {
      const double* xt = cur.data() + static_cast<int64_t>(t) * l.in;
      double* ot = next.data() + static_cast<int64_t>(t) * l.out;
      for (int r = 0; r < l.out; ++r) {
        double acc = b[r];
        const double* wr = W.data() + static_cast<int64_t>(r) * l.in;
        for (int c = 0; c < l.in; ++c) acc += wr[c] * xt[c];
        ot[r] = acc;
      }
    }
    apply_act(l.act, next);
    cur.swap(next);
  }
  return cur;
}

namespace {
Var mlp_layers(Tape& tape, const MlpSpec& spec, Var params_flat, Var x,
               bool rows) {
  int off = 0;
  Var cur = x;
  for (const LayerSpec& l : spec.layers) {
    Var W = tape.slice(params_flat, off, l.out * l.in);
    off += l.out * l.in;
    Var b = tape.slice(params_flat, off, l.out);
    off += l.out;
    cur = rows ? tape.affine_rows(W, cur, b, l.out, l.in)
               : tape.affine(W, cur, b, l.out, l.in);
    switch (l.act) {
      case Act::linear:
        break;
      case Act::relu:
        cur = tape.relu(cur);
        break;
      case Act::sigmoid:
        cur = tape.sigmoid(cur);
        break;
    }
  }
  return cur;
}
}  // namespace

Var mlp_apply(Tape& tape, const MlpSpec& spec, Var params_flat, Var x) {
  return mlp_layers(tape, spec, params_flat, x, /*rows=*/false);
}

Var mlp_apply_rows(Tape& tape, const MlpSpec& spec, Var params_flat, Var xs) {
  return mlp_layers(tape, spec, params_flat, xs, /*rows=*/true);
}

double stable_sum(std::span<const double> xs) {
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  double acc = 0.0;
  for (double v : s) acc += v;
  return acc;
}

}  // namespace advalloc::ad
