#pragma once

#include <cstdint>
#include <vector>

#include "sodgp/model.hpp"

namespace sodgp {

struct Component {
  double mean = 0.0;
  double var = 0.0;
};

/// Equal-weight Gaussian mixture for one test point, in standardized units.
struct PredictiveMixture {
  std::vector<Component> components;
  double noise_var = 0.0;

  double mean() const;
};

/// One mixture per row of `x_star` (standardized inputs). At L = 1 every
/// mixture has a single component.
std::vector<PredictiveMixture> predict(const DgpModel& model, const Tensor& x_star, int t_samples,
                                       std::uint64_t seed);

/// Mean negative log predictive density of `y_true` (original units).
double nlpp(const std::vector<PredictiveMixture>& mixtures, const Vector& y_true, double y_mean,
            double y_scale);

double rmse(const std::vector<PredictiveMixture>& mixtures, const Vector& y_true, double y_mean,
            double y_scale);

struct Metrics {
  double nlpp = 0.0;
  double rmse = 0.0;
};

/// Standardizes raw `x_test` with the model's statistics, predicts and scores.
Metrics evaluate(const DgpModel& model, const Tensor& x_test, const Vector& y_test, int t_samples,
                 std::uint64_t seed);

}  // namespace sodgp
