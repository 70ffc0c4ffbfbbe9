#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sodgp/autodiff.hpp"
#include "sodgp/gaussian.hpp"
#include "sodgp/kernel.hpp"
#include "sodgp/subset.hpp"

namespace sodgp {

/// Layer widths of a deep GP. `hidden_layers` GP layers feed one scalar
/// output GP layer, so "DGP2" is two hidden layers plus the output layer.
struct Architecture {
  int input_dim = 1;
  int hidden_layers = 0;
  int hidden_width = 0;  // 0 selects min(30, input_dim)
  bool ard = false;
  bool linear_mean = false;

  int num_layers() const { return hidden_layers + 1; }
  int width(int layer) const;        // D^l for layer in [0, num_layers)
  int input_width(int layer) const;  // D^{l-1}
  std::vector<int> widths() const;
  void validate() const;
};

/// One GP layer: kernel, noise and the D^l variational Gaussians over the
/// subset. Unconstrained storage: log variance, log lengthscale, log noise,
/// and per-dimension packed lower triangles whose diagonal goes through
/// softplus.
struct LayerState {
  SqExpParams kernel;
  double log_noise_var = 0.0;
  Tensor var_mean;        // M x D^l
  Vector var_chol_packed;  // D^l * M(M+1)/2

  int width() const { return static_cast<int>(var_mean.cols()); }
  int subset_size() const { return static_cast<int>(var_mean.rows()); }
  double noise_var() const;
  Tensor chol_factor(int d) const;
  MvnNatural variational(int d) const;
  void set_variational(int d, const Vector& mean, const Tensor& chol_lower);
};

struct Standardization {
  Vector x_mean;
  Vector x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;
  std::vector<std::string> warnings;

  Tensor apply_x(const Tensor& x) const;
  Vector apply_y(const Vector& y) const;
  Tensor invert_x(const Tensor& x) const;
  Vector invert_y(const Vector& y) const;
};

struct DgpModel {
  Architecture arch;
  std::vector<LayerState> layers;
  SubsetIndex subset;
  Tensor x_s;  // standardized subset inputs, M x H
  Vector y_s;  // standardized subset targets
  int num_train = 0;
  Standardization standardization;
  JitterPolicy jitter;

  int subset_size() const { return layers.empty() ? 0 : layers.front().subset_size(); }
  bool has_subset() const { return x_s.rows() > 0 && x_s.rows() == subset_size(); }
};

/// Kernel variance and lengthscale 0.5; noise 0.01 on the output layer and
/// 1e-5 elsewhere; standard-normal variational means; covariances I, scaled
/// by 1e-5 except on the output layer.
DgpModel init_model(const Architecture& arch, int subset_size, std::uint64_t seed);

/// Binds the training subset. `x_train`/`y_train` are standardized.
void attach_subset(DgpModel& model, const Tensor& x_train, const Vector& y_train,
                   const SubsetIndex& subset);

Vector parameter_vector(const DgpModel& model);
void set_parameter_vector(DgpModel& model, const Vector& theta);
std::size_t parameter_count(const Architecture& arch, int subset_size);
// Same count plus M * D^{l-1} learned inducing-input coordinates per layer.
std::size_t inducing_input_parameter_count(const Architecture& arch, int subset_size);

// Mask with 1 for every coordinate of the intermediate-layer noise terms.
std::vector<char> intermediate_noise_mask(const DgpModel& model);

// ---- tape binding -----------------------------------------------------------

struct LayerVars {
  SqExpVars kernel;
  ad::Var log_noise;
  ad::Var mean;         // M x D
  ad::Var chol_packed;  // leaf
  ad::Var chol;         // M x (M * D) stacked lower factors
};

std::vector<LayerVars> bind_parameters(ad::Tape& tape, const DgpModel& model);
Vector collect_gradients(const ad::Gradients& grads, const std::vector<LayerVars>& vars,
                         const DgpModel& model);

}  // namespace sodgp
