#include "sodgp/elbo.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace sodgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Tensor standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  return t;
}

ad::Var sum_log_diag(ad::Var lower) { return ad::sum(ad::log(ad::diag(lower))); }

ad::Var linear_mean(ad::Var z_in, int out_width) {
  Tensor w = Tensor::Zero(z_in.cols(), out_width);
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(z_in.cols(), out_width); ++i) w(i, i) = 1.0;
  return ad::matmul(z_in, z_in.tape->constant(std::move(w)));
}

// Expected Gaussian log-likelihood summed over rows:
// -n/2 log 2pi - n/2 log s2 - 1/(2 s2) * sum((y - m)^2 + v).
ad::Var expected_loglik_sum(ad::Var y, ad::Var mean, ad::Var var, ad::Var log_noise) {
  const auto n = static_cast<double>(y.rows());
  ad::Var sq = ad::sum(ad::square(y - mean) + var);
  ad::Var inv_noise = ad::exp(ad::scale(log_noise, -1.0));
  ad::Var quad = ad::scale(ad::multiply(sq, inv_noise), -0.5);
  return ad::shift(quad + ad::scale(log_noise, -0.5 * n), -0.5 * n * kLog2Pi);
}

struct LastLayerPosterior {
  ad::Var mean;         // mu-hat, M x 1
  ad::Var sqrt_cov;     // R, Sigma-hat = R R^T
  ad::Var logdet_cov;   // 1 x 1
};

LastLayerPosterior last_layer_posterior(ad::Tape& tape, const LayerVars& last, const Vector& y_s) {
  const auto m = static_cast<Eigen::Index>(y_s.size());
  ad::Var lq = last.chol;  // M x M, single output
  ad::Var inv_noise = ad::exp(ad::scale(last.log_noise, -1.0));
  ad::Var inner = ad::scale_by(ad::matmul(ad::transpose(lq), lq), inv_noise) +
                  tape.constant(Tensor::Identity(m, m));
  ad::Var lb = ad::cholesky(inner, JitterPolicy::none());
  LastLayerPosterior post;
  post.sqrt_cov = ad::transpose(ad::tri_solve(lb, ad::transpose(lq)));
  ad::Var resid = tape.constant(as_column(y_s)) - last.mean;
  ad::Var shift_mean = ad::matmul(post.sqrt_cov, ad::matmul(ad::transpose(post.sqrt_cov), resid));
  post.mean = last.mean + ad::scale_by(shift_mean, inv_noise);
  post.logdet_cov = ad::scale(sum_log_diag(lq) - sum_log_diag(lb), 2.0);
  return post;
}

// KL(N(mu_hat, R R^T) || N(0, Lk Lk^T)).
ad::Var posterior_kl(const LastLayerPosterior& post, ad::Var lk) {
  const auto m = static_cast<double>(lk.rows());
  ad::Var a = ad::tri_solve(lk, post.sqrt_cov);
  ad::Var b = ad::tri_solve(lk, post.mean);
  ad::Var quad = ad::sum(ad::square(a)) + ad::sum(ad::square(b));
  ad::Var logdet_k = ad::scale(sum_log_diag(lk), 2.0);
  return ad::scale(ad::shift(quad + logdet_k - post.logdet_cov, -m), 0.5);
}

// Batch likelihood term of the last layer for one input sample.
ad::Var last_layer_loglik(const LastLayerPosterior& post, const LayerGeometry& geom,
                          ad::Var y_batch, ad::Var log_noise) {
  ad::Var a = ad::tri_solve(geom.lk, post.mean);
  ad::Var c = ad::tri_solve(geom.lk, post.sqrt_cov);
  ad::Var mean = ad::matmul(geom.at, a);
  ad::Var var = geom.cond_var + ad::row_sum(ad::square(ad::matmul(geom.at, c)));
  return expected_loglik_sum(y_batch, mean, var, log_noise);
}

}  // namespace

EpsBundle draw_eps(const Architecture& arch, int subset_size, int batch_size, int t_samples,
                   Rng& rng) {
  if (t_samples < 1) throw InvalidSize("draw_eps: need at least one sample");
  EpsBundle bundle;
  bundle.samples.resize(static_cast<std::size_t>(t_samples));
  for (auto& sample : bundle.samples) {
    for (int l = 0; l + 1 < arch.num_layers(); ++l) {
      const int d = arch.width(l);
      LayerEps e;
      e.f_s = standard_normal(subset_size, d, rng);
      e.f_b = standard_normal(batch_size, d, rng);
      e.z_s = standard_normal(subset_size, d, rng);
      e.z_b = standard_normal(batch_size, d, rng);
      sample.push_back(std::move(e));
    }
  }
  return bundle;
}

LayerGeometry layer_geometry(const SqExpVars& kernel, ad::Var z_s, ad::Var z_b,
                             const JitterPolicy& jitter) {
  LayerGeometry g;
  g.lk = ad::cholesky(gram(kernel, z_s), jitter);
  ad::Var k_sb = cross(kernel, z_s, z_b);
  g.at = ad::transpose(ad::tri_solve(g.lk, k_sb));
  ad::Var explained = ad::scale(ad::row_sum(ad::square(g.at)), -1.0);
  g.cond_var = ad::clamp_min(ad::broadcast_add(explained, ad::exp(kernel.log_variance)), 0.0);
  return g;
}

LayerSampleState propagate_layer(const LayerSampleState& prev, const LayerVars& layer,
                                 const LayerGeometry& geom, const LayerEps& eps,
                                 bool linear_mean_on) {
  ad::Tape& tape = *layer.mean.tape;
  const Eigen::Index m = layer.mean.rows();
  const Eigen::Index d = layer.mean.cols();
  const Eigen::Index b = prev.z_batch.rows();
  if (eps.f_s.rows() != m || eps.f_s.cols() != d || eps.f_b.rows() != b || eps.f_b.cols() != d ||
      eps.z_s.rows() != m || eps.z_b.rows() != b) {
    throw DimensionMismatch("propagate_layer: noise shapes do not match an M=" +
                            std::to_string(m) + ", B=" + std::to_string(b) + ", D=" +
                            std::to_string(d) + " layer");
  }
  LayerSampleState next;
  ad::Var g_s = layer.mean + ad::block_matvec(layer.chol, tape.constant(eps.f_s));
  ad::Var proj = ad::matmul(geom.at, ad::tri_solve(geom.lk, g_s));
  ad::Var g_b = proj + ad::broadcast_mul(tape.constant(eps.f_b), ad::sqrt(geom.cond_var));
  if (linear_mean_on) {
    next.f_s = g_s + linear_mean(prev.z_s, static_cast<int>(d));
    g_b = g_b + linear_mean(prev.z_batch, static_cast<int>(d));
  } else {
    next.f_s = g_s;
  }
  ad::Var noise_sd = ad::exp(ad::scale(layer.log_noise, 0.5));
  next.z_s = next.f_s + ad::scale_by(tape.constant(eps.z_s), noise_sd);
  next.z_batch = g_b + ad::scale_by(tape.constant(eps.z_b), noise_sd);
  return next;
}

ad::Var layer_kl(const LayerVars& layer, ad::Var lk) {
  const auto m = static_cast<double>(layer.mean.rows());
  const auto d = static_cast<double>(layer.mean.cols());
  ad::Var a = ad::tri_solve(lk, layer.chol);
  ad::Var b = ad::tri_solve(lk, layer.mean);
  ad::Var quad = ad::sum(ad::square(a)) + ad::sum(ad::square(b));
  ad::Var logdet_k = ad::scale(sum_log_diag(lk), 2.0 * d);
  ad::Var logdet_q = ad::scale(ad::sum(ad::log(ad::block_diag(layer.chol))), 2.0);
  return ad::scale(ad::shift(quad + logdet_k - logdet_q, -m * d), 0.5);
}

ElboBreakdown ElboVars::values() const {
  ElboBreakdown out;
  out.loglik_sbar = loglik_sbar.scalar();
  out.loglik_s = loglik_s.scalar();
  out.kl_first_layer = kl_first_layer.scalar();
  out.kl_intermediate = kl_intermediate.scalar();
  out.kl_last_layer = kl_last_layer.scalar();
  out.total = total.scalar();
  return out;
}

ElboVars deep_elbo(ad::Tape& tape, const std::vector<LayerVars>& vars, const DgpModel& model,
                   const Tensor& x_batch, const Vector& y_batch, int sbar_size,
                   const EpsBundle& eps) {
  if (!model.has_subset()) throw UntrainedModel("deep_elbo: model has no subset attached");
  const int layers = model.arch.num_layers();
  if (static_cast<int>(vars.size()) != layers) {
    throw DimensionMismatch("deep_elbo: parameter bindings do not match the architecture");
  }
  if (x_batch.rows() != y_batch.size()) {
    throw DimensionMismatch("deep_elbo: batch has " + std::to_string(x_batch.rows()) +
                            " inputs and " + std::to_string(y_batch.size()) + " targets");
  }
  if (x_batch.cols() != model.x_s.cols()) {
    throw DimensionMismatch("deep_elbo: batch has " + std::to_string(x_batch.cols()) +
                            " features, model expects " + std::to_string(model.x_s.cols()));
  }
  const auto b = static_cast<double>(x_batch.rows());
  const double batch_scale = b > 0.0 ? static_cast<double>(sbar_size) / b : 0.0;
  const LayerVars& last = vars.back();

  ElboVars out;
  ad::Var zero = tape.scalar_constant(0.0);
  ad::Var x_s = tape.constant(model.x_s);
  ad::Var x_b = tape.constant(x_batch);
  ad::Var y_b = tape.constant(as_column(y_batch));

  LayerGeometry first = layer_geometry(vars[0].kernel, x_s, x_b, model.jitter);
  LastLayerPosterior post = last_layer_posterior(tape, last, model.y_s);

  {
    const auto m = static_cast<double>(model.y_s.size());
    ad::Var resid = tape.constant(as_column(model.y_s)) - post.mean;
    ad::Var sq = ad::sum(ad::square(resid)) + ad::sum(ad::square(post.sqrt_cov));
    ad::Var inv_noise = ad::exp(ad::scale(last.log_noise, -1.0));
    out.loglik_s = ad::shift(ad::scale(ad::multiply(sq, inv_noise), -0.5) +
                                 ad::scale(last.log_noise, -0.5 * m),
                             -0.5 * m * kLog2Pi);
  }

  if (layers == 1) {
    out.kl_first_layer = zero;
    out.kl_intermediate = zero;
    out.kl_last_layer = posterior_kl(post, first.lk);
    out.loglik_sbar = b > 0.0
                          ? ad::scale(last_layer_loglik(post, first, y_b, last.log_noise), batch_scale)
                          : zero;
  } else {
    const int t = eps.num_samples();
    if (t < 1) throw InvalidSize("deep_elbo: eps bundle has no samples");
    out.kl_first_layer = layer_kl(vars[0], first.lk);
    ad::Var kl_mid = zero;
    ad::Var kl_last = zero;
    ad::Var ll = zero;
    for (const auto& sample : eps.samples) {
      if (static_cast<int>(sample.size()) != layers - 1) {
        throw DimensionMismatch("deep_elbo: eps bundle built for a different depth");
      }
      LayerSampleState state{x_s, x_b, {}};
      for (int l = 0; l + 1 < layers; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        LayerGeometry geom =
            l == 0 ? first : layer_geometry(vars[lu].kernel, state.z_s, state.z_batch, model.jitter);
        if (l > 0) kl_mid = kl_mid + layer_kl(vars[lu], geom.lk);
        state = propagate_layer(state, vars[lu], geom, sample[lu], model.arch.linear_mean);
      }
      LayerGeometry geom = layer_geometry(last.kernel, state.z_s, state.z_batch, model.jitter);
      kl_last = kl_last + posterior_kl(post, geom.lk);
      if (b > 0.0) ll = ll + last_layer_loglik(post, geom, y_b, last.log_noise);
    }
    const double inv_t = 1.0 / static_cast<double>(t);
    out.kl_intermediate = ad::scale(kl_mid, inv_t);
    out.kl_last_layer = ad::scale(kl_last, inv_t);
    out.loglik_sbar = ad::scale(ll, batch_scale * inv_t);
  }
  out.total = out.loglik_sbar + out.loglik_s - out.kl_first_layer - out.kl_intermediate -
              out.kl_last_layer;
  return out;
}

ElboBreakdown deep_elbo(const DgpModel& model, const Tensor& x_batch, const Vector& y_batch,
                        int sbar_size, const EpsBundle& eps) {
  ad::Tape tape;
  const std::vector<LayerVars> vars = bind_parameters(tape, model);
  return deep_elbo(tape, vars, model, x_batch, y_batch, sbar_size, eps).values();
}

ElboBreakdown single_layer_elbo(const DgpModel& model, const Tensor& x, const Vector& y,
                                const SubsetIndex& subset) {
  if (model.arch.num_layers() != 1) {
    throw InvalidArchitecture("single_layer_elbo: model has " +
                              std::to_string(model.arch.num_layers()) + " layers");
  }
  if (x.rows() != y.size()) throw DimensionMismatch("single_layer_elbo: x and y row counts differ");
  const LayerState& layer = model.layers.front();
  const int m = subset.size();
  if (m != layer.subset_size()) {
    throw DimensionMismatch("single_layer_elbo: subset size " + std::to_string(m) +
                            " does not match the model's " + std::to_string(layer.subset_size()));
  }
  Tensor x_s(m, x.cols());
  Vector y_s(m);
  for (int i = 0; i < m; ++i) {
    x_s.row(i) = x.row(subset.s[static_cast<std::size_t>(i)]);
    y_s(i) = y(subset.s[static_cast<std::size_t>(i)]);
  }
  const auto nb = static_cast<Eigen::Index>(subset.sbar.size());
  Tensor x_b(nb, x.cols());
  Vector y_b(nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    x_b.row(i) = x.row(subset.sbar[static_cast<std::size_t>(i)]);
    y_b(i) = y(subset.sbar[static_cast<std::size_t>(i)]);
  }

  const double noise = layer.noise_var();
  const PosteriorSqrt post = exact_posterior_sqrt(layer.variational(0), y_s, noise);
  const CholFactor lk = cholesky(gram(layer.kernel, x_s), model.jitter);

  ElboBreakdown out;
  const double md = m;
  out.loglik_s = -0.5 * md * std::log(2.0 * std::numbers::pi * noise) -
                 0.5 * ((y_s - post.mean).squaredNorm() + post.sqrt_cov.squaredNorm()) / noise;

  // KL(N(mu_hat, R R^T) || N(0, K)); log|R R^T| from the square-root factors.
  const Tensor lq = layer.chol_factor(0);
  Tensor inner = lq.transpose() * lq / noise;
  inner.diagonal().array() += 1.0;
  const CholFactor lb = cholesky(inner, JitterPolicy::none());
  const double logdet_post = 2.0 * (lq.diagonal().array().log().sum() -
                                    lb.lower.diagonal().array().log().sum());
  const Tensor a = solve_triangular(lk, post.sqrt_cov);
  const Tensor bm = solve_triangular(lk, as_column(post.mean));
  out.kl_last_layer =
      0.5 * (a.squaredNorm() + bm.squaredNorm() - md + logdet(lk) - logdet_post);

  if (nb > 0) {
    const Vector prior_diag = Vector::Constant(nb, layer.kernel.variance());
    const GpConditional cond = gp_conditional(lk, cross(layer.kernel, x_b, x_s), prior_diag);
    const Vector mean = cond.projector * post.mean;
    const Vector var =
        cond.cond_var_diag + (cond.projector * post.sqrt_cov).rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < nb; ++i) {
      out.loglik_sbar += expected_gaussian_loglik(y_b(i), mean(i), var(i), noise);
    }
  }
  out.total = out.loglik_sbar + out.loglik_s - out.kl_last_layer;
  return out;
}

}  // namespace sodgp
