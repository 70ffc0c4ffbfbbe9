#pragma once

#include <vector>

#include "sodgp/autodiff.hpp"
#include "sodgp/model.hpp"
#include "sodgp/rng.hpp"

namespace sodgp {

/// The five terms of the deep bound. At L = 1 there is a single KL, that of
/// q-hat against the prior, and it is reported under `kl_last_layer`.
struct ElboBreakdown {
  double loglik_sbar = 0.0;
  double loglik_s = 0.0;
  double kl_first_layer = 0.0;
  double kl_intermediate = 0.0;
  double kl_last_layer = 0.0;
  double total = 0.0;
};

/// Standard-normal draws for one hidden layer and one MC sample.
struct LayerEps {
  Tensor f_s;  // M x D
  Tensor f_b;  // B x D
  Tensor z_s;  // M x D
  Tensor z_b;  // B x D
};

/// eps[t][l] for sample t and hidden layer l. Empty inner lists at L = 1.
struct EpsBundle {
  std::vector<std::vector<LayerEps>> samples;

  int num_samples() const { return static_cast<int>(samples.size()); }
};

EpsBundle draw_eps(const Architecture& arch, int subset_size, int batch_size, int t_samples,
                   Rng& rng);

/// Quantities of one layer that depend only on its inputs: the Cholesky
/// factor of K(Z_S), At = (Lk^{-1} K_{S,B})^T and the conditional variances.
struct LayerGeometry {
  ad::Var lk;        // M x M
  ad::Var at;        // B x M
  ad::Var cond_var;  // B x 1
};

LayerGeometry layer_geometry(const SqExpVars& kernel, ad::Var z_s, ad::Var z_b,
                             const JitterPolicy& jitter);

struct LayerSampleState {
  ad::Var z_s;      // M x D
  ad::Var z_batch;  // B x D
  ad::Var f_s;      // M x D (invalid for the input layer)
};

/// One reparameterized step through a hidden layer. `geom` must come from
/// layer_geometry on `prev`.
LayerSampleState propagate_layer(const LayerSampleState& prev, const LayerVars& layer,
                                 const LayerGeometry& geom, const LayerEps& eps,
                                 bool linear_mean = false);

/// Sum over dimensions of KL(q(F_{S,d}) || N(0, Lk Lk^T)).
ad::Var layer_kl(const LayerVars& layer, ad::Var lk);

struct ElboVars {
  ad::Var loglik_sbar;
  ad::Var loglik_s;
  ad::Var kl_first_layer;
  ad::Var kl_intermediate;
  ad::Var kl_last_layer;
  ad::Var total;

  ElboBreakdown values() const;
};

/// Deep bound on a tape. The batch is drawn from S-bar and its likelihood term
/// is rescaled by sbar_size / B. At L = 1 the bound is analytic and `eps` is
/// ignored.
ElboVars deep_elbo(ad::Tape& tape, const std::vector<LayerVars>& vars, const DgpModel& model,
                   const Tensor& x_batch, const Vector& y_batch, int sbar_size,
                   const EpsBundle& eps);

ElboBreakdown deep_elbo(const DgpModel& model, const Tensor& x_batch, const Vector& y_batch,
                        int sbar_size, const EpsBundle& eps);

/// Closed-form single-layer bound over the whole training set. `x`, `y` are
/// the standardized training data indexed by `subset`.
ElboBreakdown single_layer_elbo(const DgpModel& model, const Tensor& x, const Vector& y,
                                const SubsetIndex& subset);

}  // namespace sodgp
