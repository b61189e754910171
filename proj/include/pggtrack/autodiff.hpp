#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pggtrack/errors.hpp"

namespace pggtrack::ad {

// Reverse-mode differentiation over dense row-major arrays. One Tape records
// one forward computation; backward() replays it in reverse. The primitive
// set is deliberately small: just enough to express every loss kernel and
// the recurrent mean-shift update. Tapes are single-threaded; values cross
// threads only as plain numbers.
class Tape;

struct Var {
  int id = -1;
  Tape* tape = nullptr;

  bool valid() const { return id >= 0 && tape != nullptr; }
};

class Tape {
 public:
  enum class Op {
    kLeaf,
    kConst,
    kAdd,
    kAddScalar,
    kMul,
    kScale,
    kNeg,
    kExp,
    kLog,
    kReciprocal,
    kAbs,       // elementwise norm; subgradient at 0 is 0
    kRelu,      // max(0, x) elementwise; subgradient at 0 is 0
    kSoftplus,  // log(1 + exp(x)), overflow-stable
    kSum,
    kMax,  // reduction; gradient goes to the first maximal element
    kMatmul,
    kTranspose,
    kGather,
  };

  Var leaf(std::span<const double> values, int rows, int cols = 1) {
    return push(Op::kLeaf, {}, {}, values, rows, cols);
  }
  Var constant(std::span<const double> values, int rows, int cols = 1) {
    return push(Op::kConst, {}, {}, values, rows, cols);
  }
  Var constant(double value) {
    double v[1] = {value};
    return constant(std::span<const double>(v, 1), 1, 1);
  }
  // Column vector of ones, the usual broadcast helper.
  Var ones(int rows, int cols = 1) {
    std::vector<double> v(static_cast<std::size_t>(rows) * cols, 1.0);
    return constant(v, rows, cols);
  }

  Var add(Var a, Var b) {
    check_pair(a, b);
    same_size(a, b);
    std::vector<double> out(node(a).value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(a).value[i] + node(b).value[i];
    return push(Op::kAdd, a, b, out, node(a).rows, node(a).cols);
  }

  Var add_scalar(Var a, double c) {
    check(a);
    std::vector<double> out(node(a).value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(a).value[i] + c;
    Var v = push(Op::kAddScalar, a, {}, out, node(a).rows, node(a).cols);
    node(v).scalar = c;
    return v;
  }

  Var sub(Var a, Var b) { return add(a, neg(b)); }

  Var mul(Var a, Var b) {
    check_pair(a, b);
    same_size(a, b);
    std::vector<double> out(node(a).value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(a).value[i] * node(b).value[i];
    return push(Op::kMul, a, b, out, node(a).rows, node(a).cols);
  }

  Var scale(Var a, double c) {
    check(a);
    std::vector<double> out(node(a).value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(a).value[i] * c;
    Var v = push(Op::kScale, a, {}, out, node(a).rows, node(a).cols);
    node(v).scalar = c;
    return v;
  }

  Var neg(Var a) { return unary(Op::kNeg, a, [](double x) { return -x; }); }
  Var exp(Var a) { return unary(Op::kExp, a, [](double x) { return std::exp(x); }); }
  Var log(Var a) { return unary(Op::kLog, a, [](double x) { return std::log(x); }); }
  Var reciprocal(Var a) { return unary(Op::kReciprocal, a, [](double x) { return 1.0 / x; }); }
  Var abs(Var a) { return unary(Op::kAbs, a, [](double x) { return std::abs(x); }); }
  Var relu(Var a) { return unary(Op::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
  Var softplus(Var a) {
    return unary(Op::kSoftplus, a, [](double x) {
      if (x > 34.0) return x;  // exp(x) would swamp the 1
      if (x < -34.0) return std::exp(x);
      return std::log1p(std::exp(x));
    });
  }

  Var square(Var a) { return mul(a, a); }

  Var sum(Var a) {
    check(a);
    double s = 0.0;
    for (double v : node(a).value) s += v;
    std::vector<double> out{s};
    return push(Op::kSum, a, {}, out, 1, 1);
  }

  Var max(Var a) {
    check(a);
    const auto& v = node(a).value;
    if (v.empty()) throw InvalidInput("max of empty array");
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[arg]) arg = i;
    std::vector<double> out{v[arg]};
    Var r = push(Op::kMax, a, {}, out, 1, 1);
    node(r).indices = {static_cast<int>(arg)};
    return r;
  }

  Var matmul(Var a, Var b) {
    check_pair(a, b);
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.cols != nb.rows) throw InvalidInput("matmul inner dimensions disagree");
    const int m = na.rows, k = na.cols, n = nb.cols;
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const double av = na.value[static_cast<std::size_t>(i) * k + l];
        if (av == 0.0) continue;
        const double* brow = &nb.value[static_cast<std::size_t>(l) * n];
        double* orow = &out[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    return push(Op::kMatmul, a, b, out, m, n);
  }

  Var transpose(Var a) {
    check(a);
    const Node& na = node(a);
    std::vector<double> out(na.value.size());
    for (int i = 0; i < na.rows; ++i)
      for (int j = 0; j < na.cols; ++j)
        out[static_cast<std::size_t>(j) * na.rows + i] =
            na.value[static_cast<std::size_t>(i) * na.cols + j];
    return push(Op::kTranspose, a, {}, out, na.cols, na.rows);
  }

  // Picks flat elements; gradient scatter-adds back.
  Var gather(Var a, std::vector<int> indices, int rows = -1, int cols = 1) {
    check(a);
    const Node& na = node(a);
    std::vector<double> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= na.value.size())
        throw InvalidInput("gather index out of range");
      out[i] = na.value[indices[i]];
    }
    if (rows < 0) rows = static_cast<int>(indices.size());
    Var v = push(Op::kGather, a, {}, out, rows, cols);
    node(v).indices = std::move(indices);
    return v;
  }

  double scalar_value(Var a) const {
    check(a);
    if (node(a).value.size() != 1) throw InvalidInput("expected a scalar value");
    return node(a).value[0];
  }

  std::span<const double> value(Var a) const {
    check(a);
    return node(a).value;
  }

  // Reverse accumulation from a scalar root. Clears previous gradients, so
  // repeated calls over an unchanged tape are identical.
  void backward(Var root) {
    check(root);
    if (node(root).value.size() != 1) throw InvalidInput("backward root must be scalar");
    for (auto& n : nodes_) {
      n.grad.assign(n.value.size(), 0.0);
    }
    nodes_[root.id].grad[0] = 1.0;
    for (int id = root.id; id >= 0; --id) accumulate(id);
  }

  std::span<const double> gradient(Var a) const {
    check(a);
    if (node(a).grad.size() != node(a).value.size())
      throw InvalidInput("gradient requested before backward()");
    return node(a).grad;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int rows = 0;
    int cols = 0;
    double scalar = 0.0;
    std::vector<int> indices;
    std::vector<double> value;
    std::vector<double> grad;
  };

  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }

  void check(Var v) const {
    if (!v.valid() || v.tape != this || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw InvalidInput("variable does not belong to this tape");
  }
  void check_pair(Var a, Var b) const {
    check(a);
    check(b);
  }
  void same_size(Var a, Var b) const {
    if (node(a).value.size() != node(b).value.size())
      throw InvalidInput("elementwise op on mismatched sizes");
  }

  template <typename F>
  Var unary(Op op, Var a, F f) {
    check(a);
    std::vector<double> out(node(a).value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(node(a).value[i]);
    return push(op, a, {}, out, node(a).rows, node(a).cols);
  }

  Var push(Op op, Var a, Var b, std::span<const double> value, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != value.size())
      throw InvalidInput("node shape does not match its payload");
    Node n;
    n.op = op;
    n.a = a.valid() ? a.id : -1;
    n.b = b.valid() ? b.id : -1;
    n.rows = rows;
    n.cols = cols;
    n.value.assign(value.begin(), value.end());
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1, this};
  }

  Var push(Op op, Var a, Var b, const std::vector<double>& value, int rows, int cols) {
    return push(op, a, b, std::span<const double>(value), rows, cols);
  }

  void accumulate(int id) {
    Node& n = nodes_[id];
    if (n.op == Op::kLeaf || n.op == Op::kConst) return;
    const std::vector<double>& g = n.grad;
    Node& a = nodes_[n.a];
    switch (n.op) {
      case Op::kAdd: {
        Node& b = nodes_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          a.grad[i] += g[i];
          b.grad[i] += g[i];
        }
        break;
      }
      case Op::kAddScalar:
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
        break;
      case Op::kMul: {
        Node& b = nodes_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          a.grad[i] += g[i] * b.value[i];
          b.grad[i] += g[i] * a.value[i];
        }
        break;
      }
      case Op::kScale:
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.scalar;
        break;
      case Op::kNeg:
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] -= g[i];
        break;
      case Op::kExp:
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.value[i];
        break;
      case Op::kLog:
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] / a.value[i];
        break;
      case Op::kReciprocal:
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] -= g[i] * n.value[i] * n.value[i];
        break;
      case Op::kAbs:
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a.value[i] > 0.0)
            a.grad[i] += g[i];
          else if (a.value[i] < 0.0)
            a.grad[i] -= g[i];
        }
        break;
      case Op::kRelu:
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a.value[i] > 0.0) a.grad[i] += g[i];
        break;
      case Op::kSoftplus:
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double x = a.value[i];
          const double sig = x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
          a.grad[i] += g[i] * sig;
        }
        break;
      case Op::kSum:
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += g[0];
        break;
      case Op::kMax:
        a.grad[n.indices[0]] += g[0];
        break;
      case Op::kMatmul: {
        Node& b = nodes_[n.b];
        const int m = a.rows, k = a.cols, c = b.cols;
        // dA = G * B^T, dB = A^T * G
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            double acc = 0.0;
            const double* grow = &g[static_cast<std::size_t>(i) * c];
            const double* brow = &b.value[static_cast<std::size_t>(l) * c];
            for (int j = 0; j < c; ++j) acc += grow[j] * brow[j];
            a.grad[static_cast<std::size_t>(i) * k + l] += acc;
          }
        for (int l = 0; l < k; ++l)
          for (int j = 0; j < c; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
              acc += a.value[static_cast<std::size_t>(i) * k + l] *
                     g[static_cast<std::size_t>(i) * c + j];
            b.grad[static_cast<std::size_t>(l) * c + j] += acc;
          }
        break;
      }
      case Op::kTranspose:
        // n is (a.cols x a.rows); dA(i,j) = G(j,i)
        for (int i = 0; i < a.rows; ++i)
          for (int j = 0; j < a.cols; ++j)
            a.grad[static_cast<std::size_t>(i) * a.cols + j] +=
                g[static_cast<std::size_t>(j) * n.cols + i];
        break;
      case Op::kGather:
        for (std::size_t i = 0; i < n.indices.size(); ++i) a.grad[n.indices[i]] += g[i];
        break;
      default:
        break;
    }
  }

  std::vector<Node> nodes_;
};

// A scalar result plus the tape that produced it. Loss kernels hand one of
// these back so callers can read the value cheaply and pull gradients for
// the registered input leaves on demand.
class DualValue {
 public:
  DualValue(std::shared_ptr<Tape> tape, Var root, std::vector<Var> leaves)
      : tape_(std::move(tape)), root_(root), leaves_(std::move(leaves)) {}

  // Constant result with no differentiable inputs (empty-case losses).
  static DualValue constant(double value) {
    auto tape = std::make_shared<Tape>();
    Var root = tape->constant(value);
    return DualValue(std::move(tape), root, {});
  }

  double value() const { return tape_->scalar_value(root_); }

  std::size_t leaf_count() const { return leaves_.size(); }

  // Gradient of the root w.r.t. registered leaf i (flat, row-major).
  std::vector<double> gradient(std::size_t leaf = 0) {
    if (leaf >= leaves_.size()) throw InvalidInput("no such input leaf");
    ensure_backward();
    auto g = tape_->gradient(leaves_[leaf]);
    return std::vector<double>(g.begin(), g.end());
  }

  Tape& tape() { return *tape_; }
  Var root() const { return root_; }

 private:
  void ensure_backward() {
    if (!ran_backward_) {
      tape_->backward(root_);
      ran_backward_ = true;
    }
  }

  std::shared_ptr<Tape> tape_;
  Var root_;
  std::vector<Var> leaves_;
  bool ran_backward_ = false;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
  std::vector<int> excluded;  // coordinates sitting on a non-smooth point
  int checked = 0;
};

// Central-difference gradient verification. `f` must rebuild its tape per
// call and register `x` as leaf 0. Coordinates where the second difference
// reveals a derivative jump (an l1 kink under the probe) are excluded and
// reported rather than scored.
inline FiniteDiffReport finite_difference_check(
    const std::function<DualValue(std::span<const double>)>& f, std::span<const double> x,
    double step = 1e-4, double kink_threshold = 0.5) {
  if (step <= 0.0) throw InvalidInput("finite difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  DualValue at_x = f(probe);
  const double f0 = at_x.value();
  std::vector<double> analytic = at_x.gradient(0);
  if (analytic.size() != probe.size())
    throw InvalidInput("gradient size does not match probe size");

  FiniteDiffReport report;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double fp = f(probe).value();
    probe[i] = saved - step;
    const double fm = f(probe).value();
    probe[i] = saved;

    const double curvature = std::abs(fp + fm - 2.0 * f0) / step;
    if (curvature > kink_threshold) {
      report.excluded.push_back(static_cast<int>(i));
      continue;
    }
    const double fd = (fp - fm) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max(std::abs(a), std::abs(fd));
    double rel = 0.0;
    if (denom >= 1e-6) rel = std::abs(a - fd) / std::max(denom, 1e-3);
    ++report.checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = static_cast<int>(i);
    }
  }
  return report;
}

}  // namespace pggtrack::ad
