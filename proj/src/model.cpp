#include "sodgp/model.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "sodgp/rng.hpp"

namespace sodgp {

namespace {

constexpr double kInitKernel = 0.5;
constexpr double kInitOutputNoise = 0.01;
constexpr double kInitHiddenNoise = 1e-5;
constexpr double kInitHiddenCov = 1e-5;

int kernel_param_count(const Architecture& arch, int layer) {
  return arch.ard ? arch.input_width(layer) : 1;
}

}  // namespace

// ---- Architecture -----------------------------------------------------------

int Architecture::width(int layer) const {
  if (layer == num_layers() - 1) return 1;
  return hidden_width > 0 ? hidden_width : std::min(30, input_dim);
}

int Architecture::input_width(int layer) const {
  return layer == 0 ? input_dim : width(layer - 1);
}

std::vector<int> Architecture::widths() const {
  std::vector<int> w;
  for (int l = 0; l < num_layers(); ++l) w.push_back(width(l));
  return w;
}

void Architecture::validate() const {
  if (input_dim < 1) throw InvalidArchitecture("architecture: input dimension must be positive");
  if (hidden_layers < 0) throw InvalidArchitecture("architecture: negative hidden layer count");
  if (hidden_width < 0) throw InvalidArchitecture("architecture: negative hidden width");
}

// ---- LayerState -------------------------------------------------------------

double LayerState::noise_var() const { return std::exp(log_noise_var); }

Tensor LayerState::chol_factor(int d) const {
  const int m = subset_size();
  Tensor l = Tensor::Zero(m, m);
  const double* p = var_chol_packed.data() + static_cast<std::ptrdiff_t>(d) * ad::packed_size(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double r = *p++;
      l(i, j) = i == j ? ad::softplus_value(r) : r;
    }
  }
  return l;
}

MvnNatural LayerState::variational(int d) const {
  MvnNatural q;
  q.mean = var_mean.col(d);
  q.cov_chol.lower = chol_factor(d);
  return q;
}

void LayerState::set_variational(int d, const Vector& mean, const Tensor& chol_lower) {
  const int m = subset_size();
  if (mean.size() != m || chol_lower.rows() != m || chol_lower.cols() != m) {
    throw DimensionMismatch("set_variational: expected " + std::to_string(m) + " points");
  }
  var_mean.col(d) = mean;
  double* p = var_chol_packed.data() + static_cast<std::ptrdiff_t>(d) * ad::packed_size(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      *p++ = i == j ? ad::softplus_inverse(chol_lower(i, i)) : chol_lower(i, j);
    }
  }
}

// ---- Standardization --------------------------------------------------------

Tensor Standardization::apply_x(const Tensor& x) const {
  if (x.cols() != x_mean.size()) {
    throw DimensionMismatch("standardization: data has " + std::to_string(x.cols()) +
                            " features, model expects " + std::to_string(x_mean.size()));
  }
  Tensor out = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(c) = (x.col(c).array() - x_mean(c)) / x_scale(c);
  }
  return out;
}

Vector Standardization::apply_y(const Vector& y) const { return (y.array() - y_mean) / y_scale; }

Tensor Standardization::invert_x(const Tensor& x) const {
  Tensor out = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(c) = x.col(c).array() * x_scale(c) + x_mean(c);
  }
  return out;
}

Vector Standardization::invert_y(const Vector& y) const { return y.array() * y_scale + y_mean; }

// ---- construction -----------------------------------------------------------

DgpModel init_model(const Architecture& arch, int subset_size, std::uint64_t seed) {
  arch.validate();
  if (subset_size < 1) throw InvalidArchitecture("init_model: subset size must be positive");
  DgpModel model;
  model.arch = arch;
  Rng rng = make_stream(seed, Stream::Init);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const int m = subset_size;
  const int layers = arch.num_layers();
  for (int l = 0; l < layers; ++l) {
    const bool output = l == layers - 1;
    const int width = arch.width(l);
    if (width < 1) throw InvalidArchitecture("init_model: layer width must be positive");
    LayerState layer;
    layer.kernel = SqExpParams::from_constrained(kInitKernel, kInitKernel, kernel_param_count(arch, l));
    layer.log_noise_var = std::log(output ? kInitOutputNoise : kInitHiddenNoise);
    layer.var_mean = Tensor(m, width);
    for (int d = 0; d < width; ++d) {
      for (int i = 0; i < m; ++i) layer.var_mean(i, d) = normal(rng);
    }
    layer.var_chol_packed = Vector::Zero(static_cast<Eigen::Index>(width) * ad::packed_size(m));
    const double diag = std::sqrt(output ? 1.0 : kInitHiddenCov);
    const Tensor chol = Tensor::Identity(m, m) * diag;
    for (int d = 0; d < width; ++d) layer.set_variational(d, layer.var_mean.col(d), chol);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void attach_subset(DgpModel& model, const Tensor& x_train, const Vector& y_train,
                   const SubsetIndex& subset) {
  const auto n = static_cast<int>(x_train.rows());
  if (y_train.size() != n) throw DimensionMismatch("attach_subset: x and y row counts differ");
  if (x_train.cols() != model.arch.input_dim) {
    throw DimensionMismatch("attach_subset: data has " + std::to_string(x_train.cols()) +
                            " features, architecture expects " +
                            std::to_string(model.arch.input_dim));
  }
  const int m = model.subset_size();
  if (subset.size() != m) {
    throw InvalidArchitecture("attach_subset: subset has " + std::to_string(subset.size()) +
                              " points, model was built for " + std::to_string(m));
  }
  if (m > n) throw InvalidArchitecture("attach_subset: subset size exceeds training rows");
  if (static_cast<int>(subset.s.size() + subset.sbar.size()) != n) {
    throw InvalidSize("attach_subset: subset partition does not cover the training rows");
  }
  model.subset = subset;
  model.num_train = n;
  model.x_s = Tensor(m, x_train.cols());
  model.y_s = Vector(m);
  for (int i = 0; i < m; ++i) {
    model.x_s.row(i) = x_train.row(subset.s[static_cast<std::size_t>(i)]);
    model.y_s(i) = y_train(subset.s[static_cast<std::size_t>(i)]);
  }
}

// ---- flat parameter view ----------------------------------------------------

std::size_t parameter_count(const Architecture& arch, int subset_size) {
  const auto m = static_cast<std::size_t>(subset_size);
  std::size_t total = 0;
  for (int l = 0; l < arch.num_layers(); ++l) {
    const auto width = static_cast<std::size_t>(arch.width(l));
    total += 1 + static_cast<std::size_t>(kernel_param_count(arch, l)) + 1;
    total += width * (m + m * (m + 1) / 2);
  }
  return total;
}

std::size_t inducing_input_parameter_count(const Architecture& arch, int subset_size) {
  std::size_t extra = 0;
  for (int l = 0; l < arch.num_layers(); ++l) {
    extra += static_cast<std::size_t>(subset_size) * static_cast<std::size_t>(arch.input_width(l));
  }
  return parameter_count(arch, subset_size) + extra;
}

Vector parameter_vector(const DgpModel& model) {
  const int m = model.subset_size();
  Vector theta(static_cast<Eigen::Index>(parameter_count(model.arch, m)));
  Eigen::Index k = 0;
  for (const LayerState& layer : model.layers) {
    theta(k++) = layer.kernel.log_variance;
    for (Eigen::Index i = 0; i < layer.kernel.log_lengthscales.size(); ++i) {
      theta(k++) = layer.kernel.log_lengthscales(i);
    }
    theta(k++) = layer.log_noise_var;
    const int tri = ad::packed_size(m);
    for (int d = 0; d < layer.width(); ++d) {
      theta.segment(k, m) = layer.var_mean.col(d);
      k += m;
      theta.segment(k, tri) = layer.var_chol_packed.segment(static_cast<Eigen::Index>(d) * tri, tri);
      k += tri;
    }
  }
  return theta;
}

void set_parameter_vector(DgpModel& model, const Vector& theta) {
  const int m = model.subset_size();
  if (theta.size() != static_cast<Eigen::Index>(parameter_count(model.arch, m))) {
    throw DimensionMismatch("set_parameter_vector: expected " +
                            std::to_string(parameter_count(model.arch, m)) + " entries, got " +
                            std::to_string(theta.size()));
  }
  Eigen::Index k = 0;
  for (LayerState& layer : model.layers) {
    layer.kernel.log_variance = theta(k++);
    for (Eigen::Index i = 0; i < layer.kernel.log_lengthscales.size(); ++i) {
      layer.kernel.log_lengthscales(i) = theta(k++);
    }
    layer.log_noise_var = theta(k++);
    const int tri = ad::packed_size(m);
    for (int d = 0; d < layer.width(); ++d) {
      layer.var_mean.col(d) = theta.segment(k, m);
      k += m;
      layer.var_chol_packed.segment(static_cast<Eigen::Index>(d) * tri, tri) = theta.segment(k, tri);
      k += tri;
    }
  }
}

std::vector<char> intermediate_noise_mask(const DgpModel& model) {
  const int m = model.subset_size();
  std::vector<char> mask(parameter_count(model.arch, m), 0);
  std::size_t k = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerState& layer = model.layers[l];
    k += 1 + static_cast<std::size_t>(layer.kernel.log_lengthscales.size());
    if (l + 1 < model.layers.size()) mask[k] = 1;
    k += 1;
    k += static_cast<std::size_t>(layer.width()) *
         static_cast<std::size_t>(m + ad::packed_size(m));
  }
  return mask;
}

// ---- tape binding -----------------------------------------------------------

std::vector<LayerVars> bind_parameters(ad::Tape& tape, const DgpModel& model) {
  std::vector<LayerVars> vars;
  vars.reserve(model.layers.size());
  const int m = model.subset_size();
  for (const LayerState& layer : model.layers) {
    LayerVars v;
    v.kernel.log_variance = tape.parameter(Tensor::Constant(1, 1, layer.kernel.log_variance));
    v.kernel.log_lengthscales = tape.parameter(Tensor(layer.kernel.log_lengthscales.transpose()));
    v.log_noise = tape.parameter(Tensor::Constant(1, 1, layer.log_noise_var));
    v.mean = tape.parameter(layer.var_mean);
    v.chol_packed = tape.parameter(Tensor(layer.var_chol_packed));
    v.chol = ad::chol_param(v.chol_packed, m, layer.width());
    vars.push_back(v);
  }
  return vars;
}

Vector collect_gradients(const ad::Gradients& grads, const std::vector<LayerVars>& vars,
                         const DgpModel& model) {
  const int m = model.subset_size();
  Vector g(static_cast<Eigen::Index>(parameter_count(model.arch, m)));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < vars.size(); ++l) {
    const LayerVars& v = vars[l];
    g(k++) = grads.at(v.kernel.log_variance.id)(0, 0);
    const Tensor& gls = grads.at(v.kernel.log_lengthscales.id);
    for (Eigen::Index i = 0; i < gls.size(); ++i) g(k++) = gls.data()[i];
    g(k++) = grads.at(v.log_noise.id)(0, 0);
    const Tensor& gm = grads.at(v.mean.id);
    const Tensor& gc = grads.at(v.chol_packed.id);
    const int tri = ad::packed_size(m);
    for (Eigen::Index d = 0; d < gm.cols(); ++d) {
      g.segment(k, m) = gm.col(d);
      k += m;
      g.segment(k, tri) = Eigen::Map<const Vector>(gc.data() + d * tri, tri);
      k += tri;
    }
  }
  return g;
}

}  // namespace sodgp
