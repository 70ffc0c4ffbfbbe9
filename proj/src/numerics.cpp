#include "sodgp/numerics.hpp"

#include <cmath>
#include <string>

namespace sodgp {

namespace {

void check_square_symmetric(const Tensor& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("cholesky: matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", expected square");
  }
  const double scale = a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
  const double asym = a.size() == 0 ? 0.0 : (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(scale, 1e-300)) {
    throw DimensionMismatch("cholesky: matrix is not symmetric (max asymmetry " +
                            std::to_string(asym) + ")");
  }
}

bool try_factor(const Tensor& a, double jitter, Tensor* out) {
  Tensor shifted = a;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Tensor> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  Tensor lower = llt.matrixL();
  const auto diag = lower.diagonal();
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) return false;
  *out = std::move(lower);
  return true;
}

}  // namespace

Tensor cholesky_lower(const Tensor& a, const JitterPolicy& policy, double* jitter_used) {
  check_square_symmetric(a);
  if (a.rows() == 0) {
    if (jitter_used) *jitter_used = 0.0;
    return Tensor(0, 0);
  }
  if (!a.allFinite()) throw NotPositiveDefinite("cholesky: matrix has non-finite entries");

  Tensor lower;
  if (policy.try_zero && try_factor(a, 0.0, &lower)) {
    if (jitter_used) *jitter_used = 0.0;
    return lower;
  }
  const double mean_diag = std::abs(a.diagonal().mean());
  const double base = mean_diag > 0.0 ? mean_diag : 1.0;
  for (double rel : policy.ladder) {
    const double jitter = rel * base;
    if (try_factor(a, jitter, &lower)) {
      if (jitter_used) *jitter_used = jitter;
      return lower;
    }
  }
  throw NotPositiveDefinite("cholesky: factorization failed at maximum jitter (n=" +
                            std::to_string(a.rows()) + ")");
}

CholFactor cholesky(const Tensor& a, const JitterPolicy& policy) {
  CholFactor f;
  f.lower = cholesky_lower(a, policy, &f.jitter_used);
  return f;
}

Tensor solve_lower(const Tensor& lower, const Tensor& b, bool transpose) {
  if (lower.rows() != lower.cols() || lower.rows() != b.rows()) {
    throw DimensionMismatch("solve_triangular: factor is " + std::to_string(lower.rows()) + "x" +
                            std::to_string(lower.cols()) + ", right-hand side has " +
                            std::to_string(b.rows()) + " rows");
  }
  if (transpose) {
    return lower.triangularView<Eigen::Lower>().transpose().solve(b);
  }
  return lower.triangularView<Eigen::Lower>().solve(b);
}

Tensor solve_triangular(const CholFactor& l, const Tensor& b, bool transpose) {
  return solve_lower(l.lower, b, transpose);
}

Tensor cho_solve(const CholFactor& l, const Tensor& b) {
  return solve_lower(l.lower, solve_lower(l.lower, b, false), true);
}

double logdet(const CholFactor& l) {
  return 2.0 * l.lower.diagonal().array().log().sum();
}

bool all_finite(const Tensor& t) { return t.allFinite(); }

}  // namespace sodgp
