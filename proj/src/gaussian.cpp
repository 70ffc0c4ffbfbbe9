#include "sodgp/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sodgp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

}  // namespace

double kl_to_gp_prior(const MvnNatural& q, const CholFactor& prior_gram_chol) {
  const Eigen::Index n = q.size();
  require(q.cov_chol.size() == n && prior_gram_chol.size() == n,
          "kl_to_gp_prior: dimensions " + std::to_string(n) + ", " +
              std::to_string(q.cov_chol.size()) + ", " + std::to_string(prior_gram_chol.size()));
  const Tensor a = solve_triangular(prior_gram_chol, q.cov_chol.lower);
  const Tensor b = solve_triangular(prior_gram_chol, as_column(q.mean));
  const double kl = 0.5 * (a.squaredNorm() + b.squaredNorm() - static_cast<double>(n) +
                           logdet(prior_gram_chol) - logdet(q.cov_chol));
  return kl;
}

PosteriorSqrt exact_posterior_sqrt(const MvnNatural& q, const Vector& y_s, double noise_var) {
  const Eigen::Index m = q.size();
  require(y_s.size() == m, "exact_posterior_update: " + std::to_string(y_s.size()) +
                               " targets for a " + std::to_string(m) + "-dimensional posterior");
  if (!(noise_var > 0.0)) throw UsageError("exact_posterior_update: noise_var must be positive");

  // Sigma_hat = L (I + L^T L / s2)^{-1} L^T = R R^T with R = L Lb^{-T}.
  const Tensor& l = q.cov_chol.lower;
  Tensor inner = (l.transpose() * l) / noise_var;
  inner.diagonal().array() += 1.0;
  const CholFactor lb = cholesky(inner);
  PosteriorSqrt out;
  out.sqrt_cov = solve_triangular(lb, Tensor(l.transpose())).transpose();
  // mu_hat = mu + Sigma (Sigma + s2 I)^{-1} (y - mu) = mu + Sigma_hat (y - mu) / s2.
  const Vector resid = y_s - q.mean;
  out.mean = q.mean + out.sqrt_cov * (out.sqrt_cov.transpose() * resid) / noise_var;
  return out;
}

MvnNatural exact_posterior_update(const MvnNatural& q, const Vector& y_s, double noise_var) {
  PosteriorSqrt post = exact_posterior_sqrt(q, y_s, noise_var);
  Tensor cov = post.sqrt_cov * post.sqrt_cov.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return MvnNatural{post.mean, cholesky(cov)};
}

GpConditional gp_conditional(const CholFactor& gram_s_chol, const Tensor& cross_sb_s,
                             const Vector& prior_diag_sb) {
  const Eigen::Index m = gram_s_chol.size();
  require(cross_sb_s.cols() == m && cross_sb_s.rows() == prior_diag_sb.size(),
          "gp_conditional: cross block " + std::to_string(cross_sb_s.rows()) + "x" +
              std::to_string(cross_sb_s.cols()) + " against " + std::to_string(m) +
              " conditioning points and " + std::to_string(prior_diag_sb.size()) + " variances");
  // A = L^{-1} K_{S,A}; projector = A^T L^{-1}; var = k_aa - |A_{:,a}|^2.
  const Tensor a = solve_triangular(gram_s_chol, Tensor(cross_sb_s.transpose()));
  GpConditional out;
  out.projector = solve_triangular(gram_s_chol, a, true).transpose();
  out.cond_var_diag = (prior_diag_sb.array() - a.colwise().squaredNorm().transpose().array())
                          .cwiseMax(0.0);
  return out;
}

Vector reparam_sample(const MvnNatural& q, const Vector& eps) {
  require(eps.size() == q.size(), "reparam_sample: eps has " + std::to_string(eps.size()) +
                                      " entries, expected " + std::to_string(q.size()));
  return q.mean + q.cov_chol.lower * eps;
}

double expected_gaussian_loglik(double y, double mean, double var, double noise_var) {
  const double r = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * noise_var) - (r * r + var) / (2.0 * noise_var);
}

}  // namespace sodgp
