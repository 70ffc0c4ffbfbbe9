#pragma once

#include <Eigen/Dense>

#include <vector>

#include "sodgp/error.hpp"

namespace sodgp {

// Dense row-major 64-bit matrix; vectors are N x 1 tensors or Eigen column
// vectors where the API is inherently one-dimensional.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Jitter escalation for Cholesky factorizations. Candidates are tried in
/// order: zero (when `try_zero`), then each `ladder` entry times the mean
/// diagonal of the input. The first candidate that factorizes wins.
struct JitterPolicy {
  bool try_zero = true;
  std::vector<double> ladder{1e-8, 1e-6, 1e-4, 1e-2};

  static JitterPolicy none() { return JitterPolicy{true, {}}; }
};

/// Lower Cholesky factor of `a + jitter_used * I`.
struct CholFactor {
  Tensor lower;
  double jitter_used = 0.0;

  Eigen::Index size() const { return lower.rows(); }
  Tensor reconstruct() const { return lower * lower.transpose(); }
};

CholFactor cholesky(const Tensor& a, const JitterPolicy& policy = {});

// Raw factorization used by both the public API and the autodiff tape.
// Returns the lower factor and writes the jitter that succeeded.
Tensor cholesky_lower(const Tensor& a, const JitterPolicy& policy, double* jitter_used);

/// Solves L x = b, or L^T x = b when `transpose` is set.
Tensor solve_triangular(const CholFactor& l, const Tensor& b, bool transpose = false);
Tensor solve_lower(const Tensor& lower, const Tensor& b, bool transpose);

/// Solves (L L^T) x = b.
Tensor cho_solve(const CholFactor& l, const Tensor& b);

double logdet(const CholFactor& l);

bool all_finite(const Tensor& t);

inline Tensor as_column(const Vector& v) { return Tensor(v); }
inline Vector as_vector(const Tensor& t) {
  return Eigen::Map<const Vector>(t.data(), t.size());
}

}  // namespace sodgp
