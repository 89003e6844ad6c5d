#pragma once

#include "muwarm/model.hpp"

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace muwarm {

/// Mean |activation| per tapped layer.
template <typename Scalar>
std::map<std::string, double> activation_l1(const std::vector<ActivationTap<Scalar>>& taps) {
  std::map<std::string, double> out;
  for (const auto& tap : taps) {
    const auto& flat = tap.value.flat();
    double acc = 0.0;
    for (Index i = 0; i < flat.size(); ++i) acc += std::abs(static_cast<double>(flat[i]));
    out[tap.name] = flat.size() ? acc / static_cast<double>(flat.size()) : 0.0;
  }
  return out;
}

struct WeightNorm {
  double l1_mean = 0.0;  // mean |w|
  double l2_mean = 0.0;  // sqrt(mean w^2)
};

template <typename Scalar>
WeightNorm weight_norm(const Tensor<Scalar>& t) {
  double l1 = 0.0, l2 = 0.0;
  const auto& flat = t.flat();
  for (Index i = 0; i < flat.size(); ++i) {
    const double w = static_cast<double>(flat[i]);
    l1 += std::abs(w);
    l2 += w * w;
  }
  const double n = static_cast<double>(flat.size());
  return {l1 / n, std::sqrt(l2 / n)};
}

template <typename Scalar>
std::map<std::string, WeightNorm> weight_norms(const Model<Scalar>& model) {
  std::map<std::string, WeightNorm> out;
  for (const auto& p : model.params()) out[p.name] = weight_norm(p.value);
  return out;
}

/// Norms pooled over every trainable entry of the model.
template <typename Scalar>
WeightNorm global_weight_norm(const Model<Scalar>& model) {
  double l1 = 0.0, l2 = 0.0, n = 0.0;
  for (const auto& p : model.params()) {
    const auto& flat = p.value.flat();
    for (Index i = 0; i < flat.size(); ++i) {
      const double w = static_cast<double>(flat[i]);
      l1 += std::abs(w);
      l2 += w * w;
    }
    n += static_cast<double>(flat.size());
  }
  return {l1 / n, std::sqrt(l2 / n)};
}

struct SmoothedSeries {
  std::vector<double> steps;
  std::vector<double> raw;
  double sigma = 0.0;
  std::vector<double> kernel;  // centered, length 2*radius+1, sums to 1
  std::vector<double> smoothed;
};

/// Discrete Gaussian truncated at +-ceil(3 sigma) and renormalized. sigma == 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Gaussian smoothing with half-sample reflection at both ends. `sigma` is in
/// samples.
SmoothedSeries gaussian_smooth(std::vector<double> steps, std::vector<double> values, double sigma);

/// 2% of the series length.
double default_smoothing_sigma(std::size_t n);

/// Ordinary least-squares slope of y on x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace muwarm
