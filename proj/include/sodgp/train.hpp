#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "sodgp/elbo.hpp"
#include "sodgp/model.hpp"

namespace sodgp {

struct TrainConfig {
  int iterations = 20000;
  int batch_size = 2000;  // capped at |S-bar|
  double learning_rate = 0.01;
  int t_train = 10;
  std::uint64_t seed = 0;
  int log_every = 100;
  double clip_norm = 100.0;
  bool freeze_intermediate_noise = false;
  std::ostream* progress = nullptr;
  // called with the parameters in effect at each logged iteration
  std::function<void(int, const Vector&)> on_log;

  void validate() const;
};

struct HistoryRow {
  int iteration = 0;
  ElboBreakdown elbo;
  double wall_ms = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  Vector final_parameters;
};

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;
};

/// One Adam descent step (beta1 0.9, beta2 0.999, eps 1e-8, bias corrected).
void adam_step(Vector& params, const Vector& grads, AdamState& state, double lr);

/// Rescales `grads` in place so its Euclidean norm is at most `max_norm`.
double clip_global_norm(Vector& grads, double max_norm);

/// Cycles through S-bar in shuffled epochs; an epoch is exhausted before any
/// index repeats.
class BatchSampler {
 public:
  BatchSampler(std::vector<int> pool, int batch_size, std::uint64_t seed);
  std::vector<int> next();
  int batch_size() const { return batch_; }

 private:
  void reshuffle();

  std::vector<int> pool_;
  int batch_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

/// Maximizes the deep bound with Adam. `x`, `y` are the standardized training
/// data the subset indexes into. The model is left at the final parameters.
TrainHistory train(DgpModel& model, const Tensor& x, const Vector& y, const TrainConfig& cfg);

}  // namespace sodgp
