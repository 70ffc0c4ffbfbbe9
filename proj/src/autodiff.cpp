#include "sodgp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sodgp::ad {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const char* what, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": shapes " + shape_str(a) + " and " +
                            shape_str(b) + " differ");
  }
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw UsageError("autodiff: operands live on different tapes");
  }
}

// Broadcast mode of rhs against lhs: 0 same shape, 1 scalar, 2 row, 3 column.
int broadcast_mode(const char* what, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return 0;
  if (b.rows() == 1 && b.cols() == 1) return 1;
  if (b.rows() == 1 && b.cols() == a.cols()) return 2;
  if (b.cols() == 1 && b.rows() == a.rows()) return 3;
  throw DimensionMismatch(std::string(what) + ": cannot broadcast " + shape_str(b) + " onto " +
                          shape_str(a));
}

Tensor expand(const Tensor& b, int mode, Eigen::Index rows, Eigen::Index cols) {
  switch (mode) {
    case 0:
      return b;
    case 1:
      return Tensor::Constant(rows, cols, b(0, 0));
    case 2:
      return b.replicate(rows, 1);
    default:
      return b.replicate(1, cols);
  }
}

Tensor reduce(const Tensor& g, int mode) {
  switch (mode) {
    case 0:
      return g;
    case 1:
      return Tensor::Constant(1, 1, g.sum());
    case 2:
      return g.colwise().sum();
    default:
      return g.rowwise().sum();
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Node unary(Op op, Var a, Tensor value) {
  Node n;
  n.op = op;
  n.parents[0] = a.id;
  n.value = std::move(value);
  n.requires_grad = a.tape->node(a.id).requires_grad;
  return n;
}

Node binary(Op op, Var a, Var b, Tensor value) {
  require_same_tape(a, b);
  Node n;
  n.op = op;
  n.parents[0] = a.id;
  n.parents[1] = b.id;
  n.value = std::move(value);
  n.requires_grad = a.tape->node(a.id).requires_grad || a.tape->node(b.id).requires_grad;
  return n;
}

Tensor tril(const Tensor& m) {
  Tensor out = m.triangularView<Eigen::Lower>();
  return out;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Subtract: return "subtract";
    case Op::Multiply: return "multiply";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Cholesky: return "cholesky";
    case Op::TriSolve: return "triangular-solve";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Softplus: return "softplus";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Sum: return "sum";
    case Op::Trace: return "trace";
    case Op::Diag: return "diagonal-extract";
    case Op::BroadcastAdd: return "broadcast-add";
    case Op::BroadcastMul: return "broadcast-multiply";
    case Op::Scale: return "scalar-multiply";
    case Op::ScaleBy: return "scale-by";
    case Op::Shift: return "shift";
    case Op::LogSumExp: return "log-sum-exp";
    case Op::SqDist: return "squared-distance";
    case Op::RowSum: return "row-sum";
    case Op::ClampMin: return "clamp-min";
    case Op::CholParam: return "cholesky-parameter";
    case Op::BlockMatVec: return "block-matvec";
    case Op::BlockDiag: return "block-diagonal";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape->node(id).value; }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw DimensionMismatch("scalar(): node is " + shape_str(v));
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  Var v = push(std::move(n));
  parameter_ids_.push_back(v.id);
  return v;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::scalar_constant(double v) { return constant(Tensor::Constant(1, 1, v)); }

void Tape::clear() {
  nodes_.clear();
  parameter_ids_.clear();
}

// ---- forward ops ---------------------------------------------------------

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  return a.tape->push(binary(Op::Add, a, b, a.value() + b.value()));
}

Var subtract(Var a, Var b) {
  require_same_shape("subtract", a.value(), b.value());
  return a.tape->push(binary(Op::Subtract, a, b, a.value() - b.value()));
}

Var multiply(Var a, Var b) {
  require_same_shape("multiply", a.value(), b.value());
  return a.tape->push(binary(Op::Multiply, a, b, a.value().cwiseProduct(b.value())));
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: " + shape_str(a.value()) + " times " + shape_str(b.value()));
  }
  Tensor v = a.value() * b.value();
  return a.tape->push(binary(Op::MatMul, a, b, std::move(v)));
}

Var transpose(Var a) {
  Tensor v = a.value().transpose();
  return a.tape->push(unary(Op::Transpose, a, std::move(v)));
}

Var cholesky(Var a, const JitterPolicy& policy) {
  double jitter = 0.0;
  Tensor l = cholesky_lower(a.value(), policy, &jitter);
  Node n = unary(Op::Cholesky, a, std::move(l));
  n.scalar = jitter;
  return a.tape->push(std::move(n));
}

Var tri_solve(Var lower, Var b, bool transpose) {
  Tensor x = solve_lower(lower.value(), b.value(), transpose);
  Node n = binary(Op::TriSolve, lower, b, std::move(x));
  n.flag = transpose;
  return lower.tape->push(std::move(n));
}

Var exp(Var a) {
  const auto& x = a.value().array();
  Tensor v = (x < kExpFlush).select(0.0, x.exp()).matrix();
  return a.tape->push(unary(Op::Exp, a, std::move(v)));
}

Var log(Var a) { return a.tape->push(unary(Op::Log, a, a.value().array().log().matrix())); }

Var softplus(Var a) {
  Tensor v = a.value().unaryExpr([](double x) { return softplus_value(x); });
  return a.tape->push(unary(Op::Softplus, a, std::move(v)));
}

Var square(Var a) { return a.tape->push(unary(Op::Square, a, a.value().array().square().matrix())); }

Var sqrt(Var a) { return a.tape->push(unary(Op::Sqrt, a, a.value().array().sqrt().matrix())); }

Var sum(Var a) { return a.tape->push(unary(Op::Sum, a, Tensor::Constant(1, 1, a.value().sum()))); }

Var trace(Var a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("trace: " + shape_str(a.value()));
  return a.tape->push(unary(Op::Trace, a, Tensor::Constant(1, 1, a.value().trace())));
}

Var diag(Var a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("diag: " + shape_str(a.value()));
  Tensor v = a.value().diagonal();
  return a.tape->push(unary(Op::Diag, a, std::move(v)));
}

Var broadcast_add(Var a, Var b) {
  const int mode = broadcast_mode("broadcast_add", a.value(), b.value());
  Tensor v = a.value() + expand(b.value(), mode, a.rows(), a.cols());
  Node n = binary(Op::BroadcastAdd, a, b, std::move(v));
  n.ia = mode;
  return a.tape->push(std::move(n));
}

Var broadcast_mul(Var a, Var b) {
  const int mode = broadcast_mode("broadcast_mul", a.value(), b.value());
  Tensor v = a.value().cwiseProduct(expand(b.value(), mode, a.rows(), a.cols()));
  Node n = binary(Op::BroadcastMul, a, b, std::move(v));
  n.ia = mode;
  return a.tape->push(std::move(n));
}

Var scale(Var a, double c) {
  Node n = unary(Op::Scale, a, a.value() * c);
  n.scalar = c;
  return a.tape->push(std::move(n));
}

Var scale_by(Var a, Var s) {
  if (s.value().size() != 1) throw DimensionMismatch("scale_by: factor is " + shape_str(s.value()));
  return a.tape->push(binary(Op::ScaleBy, a, s, a.value() * s.value()(0, 0)));
}

Var shift(Var a, double c) {
  Node n = unary(Op::Shift, a, (a.value().array() + c).matrix());
  n.scalar = c;
  return a.tape->push(std::move(n));
}

Var log_sum_exp(Var a) {
  const Tensor& x = a.value();
  if (x.cols() == 0) throw DimensionMismatch("log_sum_exp: no columns");
  Tensor v(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    v(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
  }
  return a.tape->push(unary(Op::LogSumExp, a, std::move(v)));
}

Var sq_dist(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.cols()) {
    throw DimensionMismatch("sq_dist: " + shape_str(x) + " vs " + shape_str(y));
  }
  // |x|^2 + |y|^2 - 2 x y^T, clamped at zero; exact zeros on the diagonal
  // when both sides are the same node.
  Tensor d = -2.0 * (x * y.transpose());
  const Vector xn = x.rowwise().squaredNorm();
  const Eigen::RowVectorXd yn = y.rowwise().squaredNorm().transpose();
  d.colwise() += xn;
  d.rowwise() += yn;
  d = d.cwiseMax(0.0);
  if (a.id == b.id) d.diagonal().setZero();
  return a.tape->push(binary(Op::SqDist, a, b, std::move(d)));
}

Var row_sum(Var a) {
  Tensor v = a.value().rowwise().sum();
  return a.tape->push(unary(Op::RowSum, a, std::move(v)));
}

Var clamp_min(Var a, double floor) {
  Node n = unary(Op::ClampMin, a, a.value().cwiseMax(floor));
  n.scalar = floor;
  return a.tape->push(std::move(n));
}

Var chol_param(Var packed, int m, int blocks) {
  const Tensor& raw = packed.value();
  if (raw.size() != static_cast<Eigen::Index>(blocks) * packed_size(m)) {
    throw DimensionMismatch("chol_param: expected " + std::to_string(blocks * packed_size(m)) +
                            " packed entries, got " + std::to_string(raw.size()));
  }
  Tensor out = Tensor::Zero(m, static_cast<Eigen::Index>(m) * blocks);
  const double* p = raw.data();
  for (int d = 0; d < blocks; ++d) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double r = *p++;
        out(i, d * m + j) = (i == j) ? softplus_value(r) : r;
      }
    }
  }
  Node n = unary(Op::CholParam, packed, std::move(out));
  n.ia = m;
  n.ib = blocks;
  return packed.tape->push(std::move(n));
}

Var block_matvec(Var stacked, Var e) {
  const Tensor& l = stacked.value();
  const Tensor& x = e.value();
  const Eigen::Index m = l.rows();
  if (x.rows() != m || l.cols() != m * x.cols()) {
    throw DimensionMismatch("block_matvec: blocks " + shape_str(l) + " vs " + shape_str(x));
  }
  Tensor out(m, x.cols());
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    out.col(d) = l.middleCols(d * m, m) * x.col(d);
  }
  return stacked.tape->push(binary(Op::BlockMatVec, stacked, e, std::move(out)));
}

Var block_diag(Var stacked) {
  const Tensor& l = stacked.value();
  const Eigen::Index m = l.rows();
  if (m == 0 || l.cols() % m != 0) throw DimensionMismatch("block_diag: " + shape_str(l));
  const Eigen::Index blocks = l.cols() / m;
  Tensor out(m, blocks);
  for (Eigen::Index d = 0; d < blocks; ++d) {
    for (Eigen::Index i = 0; i < m; ++i) out(i, d) = l(i, d * m + i);
  }
  return stacked.tape->push(unary(Op::BlockDiag, stacked, std::move(out)));
}

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw UsageError("softplus_inverse: argument must be positive");
  // log(exp(y) - 1) written to stay accurate for both tiny and large y.
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

// ---- backward ------------------------------------------------------------

Gradients Tape::backward(Var root) const {
  if (root.tape != this) throw UsageError("backward: root belongs to another tape");
  const Tensor& rv = node(root.id).value;
  if (rv.size() != 1) throw NonScalarRoot("backward: root is " + shape_str(rv) + ", not scalar");

  std::vector<Tensor> adj(nodes_.size());
  adj[static_cast<std::size_t>(root.id)] = Tensor::Ones(1, 1);

  auto needs = [&](int p) { return p >= 0 && nodes_[static_cast<std::size_t>(p)].requires_grad; };
  auto acc = [&](int p, Tensor contrib) {
    Tensor& slot = adj[static_cast<std::size_t>(p)];
    if (slot.size() == 0) {
      slot = std::move(contrib);
    } else {
      slot += contrib;
    }
  };

  for (int id = root.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    Tensor& g = adj[static_cast<std::size_t>(id)];
    if (!n.requires_grad || g.size() == 0) continue;
    const int pa = n.parents[0];
    const int pb = n.parents[1];
    const Tensor* a = pa >= 0 ? &nodes_[static_cast<std::size_t>(pa)].value : nullptr;
    const Tensor* b = pb >= 0 ? &nodes_[static_cast<std::size_t>(pb)].value : nullptr;

    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        if (needs(pa)) acc(pa, g);
        if (needs(pb)) acc(pb, g);
        break;
      case Op::Subtract:
        if (needs(pa)) acc(pa, g);
        if (needs(pb)) acc(pb, -g);
        break;
      case Op::Multiply:
        if (needs(pa)) acc(pa, g.cwiseProduct(*b));
        if (needs(pb)) acc(pb, g.cwiseProduct(*a));
        break;
      case Op::MatMul:
        if (needs(pa)) acc(pa, g * b->transpose());
        if (needs(pb)) acc(pb, a->transpose() * g);
        break;
      case Op::Transpose:
        if (needs(pa)) acc(pa, g.transpose());
        break;
      case Op::Cholesky: {
        if (!needs(pa)) break;
        // Symmetric pullback: A_bar = sym(L^-T Phi(L^T L_bar) L^-1), where Phi
        // keeps the lower triangle and halves the diagonal.
        const Tensor& l = n.value;
        Tensor p = tril(l.transpose() * tril(g));
        p.diagonal() *= 0.5;
        Tensor x = solve_lower(l, p, true);                    // L^-T P
        Tensor s = solve_lower(l, Tensor(x.transpose()), true);  // (L^-T P L^-1)^T
        acc(pa, 0.5 * (s + s.transpose()));
        break;
      }
      case Op::TriSolve: {
        const bool trans = n.flag;
        Tensor bbar = solve_lower(*a, g, !trans);
        if (needs(pa)) {
          if (trans) {
            acc(pa, -tril(n.value * bbar.transpose()));
          } else {
            acc(pa, -tril(bbar * n.value.transpose()));
          }
        }
        if (needs(pb)) acc(pb, bbar);
        break;
      }
      case Op::Exp:
        acc(pa, g.cwiseProduct(n.value));
        break;
      case Op::Log:
        acc(pa, g.cwiseQuotient(*a));
        break;
      case Op::Softplus:
        acc(pa, g.cwiseProduct(a->unaryExpr([](double x) { return sigmoid(x); })));
        break;
      case Op::Square:
        acc(pa, 2.0 * g.cwiseProduct(*a));
        break;
      case Op::Sqrt: {
        Tensor d = n.value.unaryExpr([](double v) { return v > 0.0 ? 0.5 / v : 0.0; });
        acc(pa, g.cwiseProduct(d));
        break;
      }
      case Op::Sum:
        acc(pa, Tensor::Constant(a->rows(), a->cols(), g(0, 0)));
        break;
      case Op::Trace:
        acc(pa, g(0, 0) * Tensor::Identity(a->rows(), a->cols()));
        break;
      case Op::Diag: {
        Tensor d = Tensor::Zero(a->rows(), a->cols());
        d.diagonal() = g.col(0);
        acc(pa, d);
        break;
      }
      case Op::BroadcastAdd:
        if (needs(pa)) acc(pa, g);
        if (needs(pb)) acc(pb, reduce(g, n.ia));
        break;
      case Op::BroadcastMul:
        if (needs(pa)) acc(pa, g.cwiseProduct(expand(*b, n.ia, a->rows(), a->cols())));
        if (needs(pb)) acc(pb, reduce(g.cwiseProduct(*a), n.ia));
        break;
      case Op::Scale:
        acc(pa, n.scalar * g);
        break;
      case Op::ScaleBy:
        if (needs(pa)) acc(pa, (*b)(0, 0) * g);
        if (needs(pb)) acc(pb, Tensor::Constant(1, 1, g.cwiseProduct(*a).sum()));
        break;
      case Op::Shift:
        acc(pa, g);
        break;
      case Op::LogSumExp: {
        Tensor d(a->rows(), a->cols());
        for (Eigen::Index i = 0; i < a->rows(); ++i) {
          d.row(i) = g(i, 0) * (a->row(i).array() - n.value(i, 0)).exp();
        }
        acc(pa, d);
        break;
      }
      case Op::SqDist: {
        if (needs(pa)) {
          const Vector rs = g.rowwise().sum();
          Tensor ga = -2.0 * (g * (*b));
          ga += 2.0 * (rs.asDiagonal() * (*a));
          acc(pa, std::move(ga));
        }
        if (needs(pb)) {
          const Vector cs = g.colwise().sum().transpose();
          Tensor gb = -2.0 * (g.transpose() * (*a));
          gb += 2.0 * (cs.asDiagonal() * (*b));
          acc(pb, std::move(gb));
        }
        break;
      }
      case Op::RowSum: {
        Tensor d(a->rows(), a->cols());
        for (Eigen::Index i = 0; i < d.rows(); ++i) d.row(i).setConstant(g(i, 0));
        acc(pa, std::move(d));
        break;
      }
      case Op::ClampMin: {
        const double floor = n.scalar;
        Tensor mask = a->unaryExpr([floor](double v) { return v > floor ? 1.0 : 0.0; });
        acc(pa, g.cwiseProduct(mask));
        break;
      }
      case Op::CholParam: {
        const int m = n.ia;
        const int blocks = n.ib;
        Tensor d(a->rows(), a->cols());
        double* out = d.data();
        const double* raw = a->data();
        for (int blk = 0; blk < blocks; ++blk) {
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j <= i; ++j) {
              const double gij = g(i, blk * m + j);
              *out++ = (i == j) ? gij * sigmoid(*raw) : gij;
              ++raw;
            }
          }
        }
        acc(pa, d);
        break;
      }
      case Op::BlockMatVec: {
        const Eigen::Index m = a->rows();
        if (needs(pa)) {
          Tensor d(a->rows(), a->cols());
          for (Eigen::Index k = 0; k < b->cols(); ++k) {
            d.middleCols(k * m, m) = g.col(k) * b->col(k).transpose();
          }
          acc(pa, d);
        }
        if (needs(pb)) {
          Tensor d(b->rows(), b->cols());
          for (Eigen::Index k = 0; k < b->cols(); ++k) {
            d.col(k) = a->middleCols(k * m, m).transpose() * g.col(k);
          }
          acc(pb, d);
        }
        break;
      }
      case Op::BlockDiag: {
        const Eigen::Index m = a->rows();
        Tensor d = Tensor::Zero(a->rows(), a->cols());
        for (Eigen::Index k = 0; k < g.cols(); ++k) {
          for (Eigen::Index i = 0; i < m; ++i) d(i, k * m + i) = g(i, k);
        }
        acc(pa, d);
        break;
      }
    }
  }

  Gradients grads;
  for (int pid : parameter_ids_) {
    const Tensor& slot = adj[static_cast<std::size_t>(pid)];
    const Tensor& v = nodes_[static_cast<std::size_t>(pid)].value;
    grads.emplace(pid, slot.size() == 0 ? Tensor::Zero(v.rows(), v.cols()) : slot);
  }
  return grads;
}

// ---- gradient checking ---------------------------------------------------

GradientCheck check_gradients(const ScalarFunction& f, const std::vector<Tensor>& params,
                              double h) {
  GradientCheck out;
  {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(tape.parameter(p));
    Var root = f(tape, leaves);
    Gradients g = tape.backward(root);
    for (const Var& v : leaves) out.analytic.push_back(g.at(v.id));
  }

  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(values.size());
    for (const Tensor& p : values) leaves.push_back(tape.parameter(p));
    return f(tape, leaves).scalar();
  };

  std::vector<Tensor> work = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor numeric(params[k].rows(), params[k].cols());
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      const double orig = params[k].data()[i];
      work[k].data()[i] = orig + h;
      const double fp = evaluate(work);
      work[k].data()[i] = orig - h;
      const double fm = evaluate(work);
      work[k].data()[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      numeric.data()[i] = fd;
      const double err = std::abs(out.analytic[k].data()[i] - fd) / (std::abs(fd) + 1e-8);
      out.max_relative_error = std::max(out.max_relative_error, err);
    }
    out.numeric.push_back(std::move(numeric));
  }
  return out;
}

}  // namespace sodgp::ad
