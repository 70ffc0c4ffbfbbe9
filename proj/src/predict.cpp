#include "sodgp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sodgp/elbo.hpp"
#include "sodgp/rng.hpp"

namespace sodgp {

namespace {

// Final-layer marginals given the subset and test representations.
void last_layer_marginals(const LayerState& last, const PosteriorSqrt& post, const Tensor& z_s,
                          const Tensor& z_star, const JitterPolicy& jitter, Vector& mean,
                          Vector& var) {
  const CholFactor lk = cholesky(gram(last.kernel, z_s), jitter);
  const Vector prior_diag = Vector::Constant(z_star.rows(), last.kernel.variance());
  const GpConditional cond = gp_conditional(lk, cross(last.kernel, z_star, z_s), prior_diag);
  mean = cond.projector * post.mean;
  var = cond.cond_var_diag + (cond.projector * post.sqrt_cov).rowwise().squaredNorm();
}

void check_targets(const std::vector<PredictiveMixture>& mixtures, const Vector& y_true) {
  if (static_cast<Eigen::Index>(mixtures.size()) != y_true.size()) {
    throw DimensionMismatch("metrics: " + std::to_string(mixtures.size()) + " predictions for " +
                            std::to_string(y_true.size()) + " targets");
  }
}

}  // namespace

double PredictiveMixture::mean() const {
  double s = 0.0;
  for (const Component& c : components) s += c.mean;
  return components.empty() ? 0.0 : s / static_cast<double>(components.size());
}

std::vector<PredictiveMixture> predict(const DgpModel& model, const Tensor& x_star, int t_samples,
                                       std::uint64_t seed) {
  if (!model.has_subset()) throw UntrainedModel("predict: model has no subset attached");
  if (x_star.cols() != model.x_s.cols()) {
    throw DimensionMismatch("predict: inputs have " + std::to_string(x_star.cols()) +
                            " features, model expects " + std::to_string(model.x_s.cols()));
  }
  if (t_samples < 1) throw InvalidSize("predict: need at least one sample");
  const auto p = x_star.rows();
  std::vector<PredictiveMixture> out(static_cast<std::size_t>(p));
  if (p == 0) return out;

  const LayerState& last = model.layers.back();
  const PosteriorSqrt post = exact_posterior_sqrt(last.variational(0), model.y_s, last.noise_var());
  const int layers = model.arch.num_layers();
  const int t = layers == 1 ? 1 : t_samples;
  for (auto& mix : out) {
    mix.noise_var = last.noise_var();
    mix.components.reserve(static_cast<std::size_t>(t));
  }

  Rng rng = make_stream(seed, Stream::Predict);
  Vector mean;
  Vector var;
  if (layers == 1) {
    last_layer_marginals(last, post, model.x_s, x_star, model.jitter, mean, var);
    for (Eigen::Index i = 0; i < p; ++i) out[static_cast<std::size_t>(i)].components.push_back({mean(i), var(i)});
    return out;
  }

  for (int s = 0; s < t; ++s) {
    const EpsBundle eps = draw_eps(model.arch, model.subset_size(), static_cast<int>(p), 1, rng);
    ad::Tape tape;
    const std::vector<LayerVars> vars = bind_parameters(tape, model);
    LayerSampleState state{tape.constant(model.x_s), tape.constant(x_star), {}};
    for (int l = 0; l + 1 < layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      const LayerGeometry geom =
          layer_geometry(vars[lu].kernel, state.z_s, state.z_batch, model.jitter);
      state = propagate_layer(state, vars[lu], geom, eps.samples[0][lu], model.arch.linear_mean);
    }
    last_layer_marginals(last, post, state.z_s.value(), state.z_batch.value(), model.jitter, mean,
                         var);
    for (Eigen::Index i = 0; i < p; ++i) out[static_cast<std::size_t>(i)].components.push_back({mean(i), var(i)});
  }
  return out;
}

double nlpp(const std::vector<PredictiveMixture>& mixtures, const Vector& y_true, double y_mean,
            double y_scale) {
  check_targets(mixtures, y_true);
  if (mixtures.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < mixtures.size(); ++i) {
    const PredictiveMixture& mix = mixtures[i];
    const double y = (y_true(static_cast<Eigen::Index>(i)) - y_mean) / y_scale;
    std::vector<double> logp;
    logp.reserve(mix.components.size());
    double top = -std::numeric_limits<double>::infinity();
    for (const Component& c : mix.components) {
      const double v = c.var + mix.noise_var;
      const double r = y - c.mean;
      const double lp = -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * r * r / v;
      logp.push_back(lp);
      top = std::max(top, lp);
    }
    double acc = 0.0;
    for (double lp : logp) acc += std::exp(lp - top);
    const double log_mix = top + std::log(acc / static_cast<double>(logp.size()));
    total += -log_mix + std::log(y_scale);
  }
  return total / static_cast<double>(mixtures.size());
}

double rmse(const std::vector<PredictiveMixture>& mixtures, const Vector& y_true, double y_mean,
            double y_scale) {
  check_targets(mixtures, y_true);
  if (mixtures.empty()) return 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < mixtures.size(); ++i) {
    const double pred = mixtures[i].mean() * y_scale + y_mean;
    const double r = y_true(static_cast<Eigen::Index>(i)) - pred;
    sq += r * r;
  }
  return std::sqrt(sq / static_cast<double>(mixtures.size()));
}

Metrics evaluate(const DgpModel& model, const Tensor& x_test, const Vector& y_test, int t_samples,
                 std::uint64_t seed) {
  const Standardization& st = model.standardization;
  const auto mixtures = predict(model, st.apply_x(x_test), t_samples, seed);
  return {nlpp(mixtures, y_test, st.y_mean, st.y_scale), rmse(mixtures, y_test, st.y_mean, st.y_scale)};
}

}  // namespace sodgp
