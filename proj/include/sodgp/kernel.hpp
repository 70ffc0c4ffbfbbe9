#pragma once

#include "sodgp/autodiff.hpp"
#include "sodgp/numerics.hpp"

namespace sodgp {

/// Squared-exponential kernel k(x, x') = v * exp(-0.5 * sum_h (x_h - x'_h)^2 / l_h^2)
/// with unconstrained (log) storage. A single lengthscale entry means the
/// kernel is isotropic; otherwise there is one lengthscale per input column.
struct SqExpParams {
  double log_variance = 0.0;
  Vector log_lengthscales = Vector::Zero(1);

  double variance() const;
  Vector lengthscales() const;
  bool isotropic() const { return log_lengthscales.size() == 1; }

  static SqExpParams from_constrained(double variance, double lengthscale, int count = 1);
};

Tensor gram(const SqExpParams& params, const Tensor& x);
Tensor cross(const SqExpParams& params, const Tensor& x1, const Tensor& x2);

// Tape versions. `log_variance` is 1x1, `log_lengthscales` is 1x1 or 1xD.
struct SqExpVars {
  ad::Var log_variance;
  ad::Var log_lengthscales;
};

ad::Var gram(const SqExpVars& params, ad::Var x);
ad::Var cross(const SqExpVars& params, ad::Var x1, ad::Var x2);

}  // namespace sodgp
