#include "sodgp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace sodgp {

void TrainConfig::validate() const {
  if (iterations < 0) throw InvalidSize("train: iterations must be non-negative");
  if (batch_size < 1) throw InvalidSize("train: batch size must be positive");
  if (t_train < 1) throw InvalidSize("train: need at least one training sample");
  if (log_every < 1) throw InvalidSize("train: log_every must be positive");
  if (!(learning_rate >= 0.0)) throw InvalidSize("train: learning rate must be non-negative");
}

void adam_step(Vector& params, const Vector& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  if (grads.size() != params.size()) throw DimensionMismatch("adam_step: gradient size differs");
  if (state.m.size() != params.size()) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grads;
  state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

double clip_global_norm(Vector& grads, double max_norm) {
  const double norm = grads.norm();
  if (max_norm > 0.0 && norm > max_norm) grads *= max_norm / norm;
  return norm;
}

BatchSampler::BatchSampler(std::vector<int> pool, int batch_size, std::uint64_t seed)
    : pool_(std::move(pool)),
      batch_(std::min<int>(batch_size, static_cast<int>(pool_.size()))),
      rng_(make_stream(seed, Stream::Batch)) {
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::shuffle(pool_.begin(), pool_.end(), rng_);
  cursor_ = 0;
}

std::vector<int> BatchSampler::next() {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(batch_));
  while (static_cast<int>(out.size()) < batch_) {
    if (cursor_ == pool_.size()) reshuffle();
    out.push_back(pool_[cursor_++]);
  }
  return out;
}

TrainHistory train(DgpModel& model, const Tensor& x, const Vector& y, const TrainConfig& cfg) {
  cfg.validate();
  if (!model.has_subset()) throw UntrainedModel("train: attach a subset before training");
  if (x.rows() != y.size()) throw DimensionMismatch("train: x and y row counts differ");
  if (x.rows() != model.num_train) {
    throw DimensionMismatch("train: model subset indexes " + std::to_string(model.num_train) +
                            " rows, data has " + std::to_string(x.rows()));
  }

  const int sbar = static_cast<int>(model.subset.sbar.size());
  BatchSampler sampler(model.subset.sbar, cfg.batch_size, cfg.seed);
  Rng noise_rng = make_stream(cfg.seed, Stream::Noise);
  const std::vector<char> frozen = cfg.freeze_intermediate_noise
                                       ? intermediate_noise_mask(model)
                                       : std::vector<char>(parameter_count(model.arch, model.subset_size()), 0);

  Vector theta = parameter_vector(model);
  AdamState adam;
  TrainHistory history;
  const auto start = std::chrono::steady_clock::now();
  const int b = sampler.batch_size();
  Tensor x_batch(b, x.cols());
  Vector y_batch(b);

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::vector<int> idx = sampler.next();
    for (int i = 0; i < b; ++i) {
      x_batch.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
      y_batch(i) = y(idx[static_cast<std::size_t>(i)]);
    }
    const EpsBundle eps = model.arch.num_layers() > 1
                              ? draw_eps(model.arch, model.subset_size(), b, cfg.t_train, noise_rng)
                              : EpsBundle{};

    ad::Tape tape;
    const std::vector<LayerVars> vars = bind_parameters(tape, model);
    const ElboVars elbo = deep_elbo(tape, vars, model, x_batch, y_batch, sbar, eps);
    const ElboBreakdown values = elbo.values();
    if (!std::isfinite(values.total)) {
      throw NumericalDivergence("train: ELBO is not finite at iteration " + std::to_string(it), it);
    }

    if (it % cfg.log_every == 0) {
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      history.rows.push_back({it, values, ms});
      if (cfg.progress != nullptr) {
        *cfg.progress << "iter " << it << " elbo " << values.total << '\n';
      }
      if (cfg.on_log) cfg.on_log(it, theta);
    }

    Vector grad = -collect_gradients(tape.backward(elbo.total), vars, model);
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      if (frozen[static_cast<std::size_t>(k)]) grad(k) = 0.0;
    }
    if (!all_finite(as_column(grad))) {
      throw NumericalDivergence("train: gradient is not finite at iteration " + std::to_string(it), it);
    }
    clip_global_norm(grad, cfg.clip_norm);
    adam_step(theta, grad, adam, cfg.learning_rate);
    set_parameter_vector(model, theta);
  }
  history.final_parameters = theta;
  return history;
}

}  // namespace sodgp
