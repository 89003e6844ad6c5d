#pragma once

#include "muwarm/parameterization.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace muwarm {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  std::vector<Vector<Scalar>> first_moment;
  std::vector<Vector<Scalar>> second_moment;
};

/// One bias-corrected Adam update of `tensors` from their grad buffers, with a
/// learning rate per tensor. Throws NonFiniteError (before touching any
/// weight) when a gradient holds NaN or Inf.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> tensors, std::span<const double> lrs, AdamState<Scalar>& state,
               const AdamConfig& cfg = {}) {
  if (tensors.size() != lrs.size()) throw std::invalid_argument("adam_step: one learning rate per tensor required");
  if (state.first_moment.empty()) {
    for (const auto* t : tensors) {
      state.first_moment.push_back(Vector<Scalar>::Zero(t->size()));
      state.second_moment.push_back(Vector<Scalar>::Zero(t->size()));
    }
  }
  if (state.first_moment.size() != tensors.size()) throw std::invalid_argument("adam_step: state does not match tensors");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (state.first_moment[i].size() != tensors[i]->size()) throw DimensionError("adam_step: state shape mismatch");
    if (tensors[i]->has_grad() && !tensors[i]->grad().allFinite())
      throw NonFiniteError("adam_step: non-finite gradient in tensor " + std::to_string(i));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const auto eps = static_cast<Scalar>(cfg.eps);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor<Scalar>& p = *tensors[i];
    if (!p.has_grad()) continue;
    const auto& g = p.grad().array();
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    const auto step_size = static_cast<Scalar>(lrs[i] / bc1);
    const auto root_bc2 = static_cast<Scalar>(std::sqrt(bc2));
    auto w = p.flat().array();
    if (cfg.weight_decay != 0.0) w -= static_cast<Scalar>(lrs[i] * cfg.weight_decay) * w;
    w -= step_size * m / (v.sqrt() / root_bc2 + eps);
  }
}

/// Per-tensor effective learning rates lr * c_lr.
template <typename Scalar>
std::vector<double> effective_learning_rates(const std::vector<ParamTensor<Scalar>>& params, const Scheme& scheme, double m,
                                             double base_lr) {
  std::vector<double> lrs;
  lrs.reserve(params.size());
  for (const auto& p : params) lrs.push_back(base_lr * abc_for(p.role, scheme, m).c_lr);
  return lrs;
}

}  // namespace muwarm
