#pragma once

#include <array>
#include <functional>
#include <unordered_map>
#include <vector>

#include "sodgp/numerics.hpp"

namespace sodgp::ad {

inline constexpr double kExpFlush = -575.0;

enum class Op {
  Leaf,
  Constant,
  Add,
  Subtract,
  Multiply,      // elementwise
  MatMul,
  Transpose,
  Cholesky,
  TriSolve,      // lower-triangular solve, optionally with the transposed factor
  Exp,
  Log,
  Softplus,
  Square,
  Sqrt,
  Sum,           // full reduction to 1x1
  Trace,
  Diag,          // n x n -> n x 1
  BroadcastAdd,  // rhs is 1x1, 1 x cols or rows x 1
  BroadcastMul,
  Scale,         // constant multiplier
  ScaleBy,       // multiply by a 1x1 node
  Shift,         // add a constant
  LogSumExp,     // per row: n x T -> n x 1
  SqDist,        // pairwise squared distances between rows
  RowSum,        // n x m -> n x 1
  ClampMin,
  CholParam,     // packed unconstrained lower triangles -> stacked factors
  BlockMatVec,   // out[:, d] = L_d * e[:, d]
  BlockDiag,     // diagonals of stacked square blocks -> M x D
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives
/// and has not been cleared.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

struct Node {
  Op op = Op::Constant;
  std::array<int, 3> parents{-1, -1, -1};
  Tensor value;
  bool requires_grad = false;
  double scalar = 0.0;  // op-specific constant
  int ia = 0;           // op-specific integers
  int ib = 0;
  bool flag = false;
};

using Gradients = std::unordered_map<int, Tensor>;

/// Eager reverse-mode tape. Values are computed when an op is recorded;
/// backward() walks the nodes in reverse order. Subgraphs that do not depend
/// on any parameter are skipped during the backward sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Tensor value);
  Var constant(Tensor value);
  Var scalar_constant(double v);

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<int>& parameter_ids() const { return parameter_ids_; }

  /// Gradients of a scalar root with respect to every parameter leaf.
  /// Adjoint storage is rebuilt on each call, so backward may be repeated.
  Gradients backward(Var root) const;

  void clear();

  // Appends a node; used by the op functions below.
  Var push(Node node);

 private:
  std::vector<Node> nodes_;
  std::vector<int> parameter_ids_;
};

// ---- primitives ----------------------------------------------------------

Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var multiply(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var cholesky(Var a, const JitterPolicy& policy = {});
Var tri_solve(Var lower, Var b, bool transpose = false);
/// Arguments below kExpFlush give exact zeros instead of subnormal results.
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var square(Var a);
Var sqrt(Var a);
Var sum(Var a);
Var trace(Var a);
Var diag(Var a);
Var broadcast_add(Var a, Var b);
Var broadcast_mul(Var a, Var b);
Var scale(Var a, double c);
Var scale_by(Var a, Var s);
Var shift(Var a, double c);
Var log_sum_exp(Var a);
Var sq_dist(Var a, Var b);
Var row_sum(Var a);
Var clamp_min(Var a, double floor);
Var chol_param(Var packed, int m, int blocks);
Var block_matvec(Var stacked, Var e);
Var block_diag(Var stacked);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return subtract(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }

// ---- helpers shared with the model ---------------------------------------

double softplus_value(double x);
double softplus_inverse(double y);
// Number of entries in a packed lower triangle of an m x m matrix.
inline int packed_size(int m) { return m * (m + 1) / 2; }

// ---- gradient checking ---------------------------------------------------

/// Scalar objective evaluated on a fresh tape with the given parameter leaves.
using ScalarFunction = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;
};

/// Compares tape gradients against central differences with step `h`.
/// Relative error per coordinate is |ad - fd| / (|fd| + 1e-8).
GradientCheck check_gradients(const ScalarFunction& f, const std::vector<Tensor>& params,
                              double h = 1e-5);

}  // namespace sodgp::ad
