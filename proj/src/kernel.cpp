#include "sodgp/kernel.hpp"

#include <cmath>
#include <string>

namespace sodgp {

namespace {

void check_dims(const SqExpParams& p, const Tensor& x) {
  if (!p.isotropic() && p.log_lengthscales.size() != x.cols()) {
    throw DimensionMismatch("kernel: " + std::to_string(p.log_lengthscales.size()) +
                            " lengthscales for " + std::to_string(x.cols()) + " input columns");
  }
}

Tensor scaled(const SqExpParams& p, const Tensor& x) {
  if (p.isotropic()) return x * std::exp(-p.log_lengthscales(0));
  Eigen::RowVectorXd inv = (-p.log_lengthscales.array()).exp().matrix().transpose();
  return x.array().rowwise() * inv.array();
}

ad::Var scaled(const SqExpVars& p, ad::Var x) {
  const auto& ls = p.log_lengthscales.value();
  if (ls.size() != 1 && ls.cols() != x.cols()) {
    throw DimensionMismatch("kernel: " + std::to_string(ls.size()) + " lengthscales for " +
                            std::to_string(x.cols()) + " input columns");
  }
  ad::Var inv = ad::exp(ad::scale(p.log_lengthscales, -1.0));
  return ls.size() == 1 ? ad::scale_by(x, inv) : ad::broadcast_mul(x, inv);
}

}  // namespace

double SqExpParams::variance() const { return std::exp(log_variance); }

Vector SqExpParams::lengthscales() const { return log_lengthscales.array().exp(); }

SqExpParams SqExpParams::from_constrained(double variance, double lengthscale, int count) {
  SqExpParams p;
  p.log_variance = std::log(variance);
  p.log_lengthscales = Vector::Constant(count, std::log(lengthscale));
  return p;
}

Tensor cross(const SqExpParams& params, const Tensor& x1, const Tensor& x2) {
  if (x1.cols() != x2.cols()) {
    throw DimensionMismatch("kernel: inputs have " + std::to_string(x1.cols()) + " and " +
                            std::to_string(x2.cols()) + " columns");
  }
  check_dims(params, x1);
  const Tensor a = scaled(params, x1);
  const Tensor b = scaled(params, x2);
  const double var = params.variance();
  Tensor k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double e = -0.5 * (a.row(i) - b.row(j)).squaredNorm();
      k(i, j) = e < ad::kExpFlush ? 0.0 : var * std::exp(e);
    }
  }
  return k;
}

Tensor gram(const SqExpParams& params, const Tensor& x) { return cross(params, x, x); }

ad::Var cross(const SqExpVars& params, ad::Var x1, ad::Var x2) {
  if (x1.cols() != x2.cols()) {
    throw DimensionMismatch("kernel: inputs have " + std::to_string(x1.cols()) + " and " +
                            std::to_string(x2.cols()) + " columns");
  }
  ad::Var a = scaled(params, x1);
  ad::Var b = x1.id == x2.id ? a : scaled(params, x2);
  ad::Var k = ad::exp(ad::scale(ad::sq_dist(a, b), -0.5));
  return ad::scale_by(k, ad::exp(params.log_variance));
}

ad::Var gram(const SqExpVars& params, ad::Var x) { return cross(params, x, x); }

}  // namespace sodgp
