#pragma once

#include "sodgp/numerics.hpp"

namespace sodgp {

/// N(mean, L L^T) with the covariance held as its Cholesky factor.
struct MvnNatural {
  Vector mean;
  CholFactor cov_chol;

  Eigen::Index size() const { return mean.size(); }
  Tensor covariance() const { return cov_chol.reconstruct(); }
};

/// Marginals of a zero-mean GP at A points given M conditioning points:
/// mean = projector * f_S, variance = cond_var_diag.
struct GpConditional {
  Tensor projector;    // A x M, K_{A,S} K_{S,S}^{-1}
  Vector cond_var_diag;
};

/// Likelihood-tilted posterior over the subset, kept in square-root form:
/// covariance = sqrt_cov * sqrt_cov^T. Avoids re-factorizing the covariance
/// when only products with it are needed.
struct PosteriorSqrt {
  Vector mean;
  Tensor sqrt_cov;
};

/// KL(N(mu, Sigma) || N(0, K)) given the Cholesky factor of K.
double kl_to_gp_prior(const MvnNatural& q, const CholFactor& prior_gram_chol);

/// Combines q(F_S) with a Gaussian likelihood N(y_S; F_S, noise_var I).
MvnNatural exact_posterior_update(const MvnNatural& q, const Vector& y_s, double noise_var);
PosteriorSqrt exact_posterior_sqrt(const MvnNatural& q, const Vector& y_s, double noise_var);

GpConditional gp_conditional(const CholFactor& gram_s_chol, const Tensor& cross_sb_s,
                             const Vector& prior_diag_sb);

/// mean + L * eps.
Vector reparam_sample(const MvnNatural& q, const Vector& eps);

/// E_{f ~ N(mean, var)} [log N(y; f, noise_var)].
double expected_gaussian_loglik(double y, double mean, double var, double noise_var);

}  // namespace sodgp
