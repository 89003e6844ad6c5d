#pragma once

#include "muwarm/checkpoint.hpp"
#include "muwarm/model.hpp"
#include "muwarm/parameterization.hpp"
#include "muwarm/rng.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace muwarm {

class PlanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shrink factor and perturbation switch for growing a trained base model.
struct WarmstartConfig {
  double lambda_shrink = 0.4;
  bool perturb = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda_shrink >= 0.0 && lambda_shrink <= 1.0)) throw ConfigError("warmstart: lambda_shrink must lie in [0, 1]");
  }
};

/// Embeds `w` (m x n) in the top-left corner of a p x q zero matrix.
template <typename Scalar>
Matrix<Scalar> pad_zero(const Eigen::Ref<const Matrix<Scalar>>& w, Index p, Index q) {
  if (p < w.rows() || q < w.cols())
    throw DimensionError("pad_zero: target " + std::to_string(p) + "x" + std::to_string(q) + " is smaller than source " +
                         std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  Matrix<Scalar> out = Matrix<Scalar>::Zero(p, q);
  out.topLeftCorner(w.rows(), w.cols()) = w;
  return out;
}

/// Tensor form of pad_zero for 1-D and 2-D tensors.
template <typename Scalar>
Tensor<Scalar> pad_zero(const Tensor<Scalar>& w, const Shape& target) {
  if (w.shape().size() != target.size() || target.empty() || target.size() > 2)
    throw DimensionError("pad_zero: rank mismatch " + to_string(w.shape()) + " -> " + to_string(target));
  Tensor<Scalar> out(target);
  const Index p = target.size() == 2 ? target[0] : 1;
  const Index q = target.back();
  Matrix<Scalar> padded = pad_zero<Scalar>(w.matrix(), p, q);
  out.flat() = Eigen::Map<const Vector<Scalar>>(padded.data(), padded.size());
  return out;
}

/// Per-tensor base -> target mapping. Every tensor keeps its top-left
/// position; with a fixed head size, base head h lands in target head slot h.
struct PadEntry {
  std::string name;
  Shape base_shape;
  Shape target_shape;
  LayerRole base_role;
  ParamSpec target;
};

struct PadPlan {
  std::vector<PadEntry> entries;

  /// Throws PlanError unless `base` and `target` differ only in width and
  /// the target is at least as wide.
  static PadPlan make(const ModelConfig& base, const ModelConfig& target);
};

/// Grows one tensor.
///   matrix-like: lambda * Pad0(base) + N(0, b_std^2), noise drawn from `rng`
///   VectorLike:  default + lambda * (base - default) on the base range,
///                default on new entries, no noise.
/// With lambda = 0 and perturb on, the result equals init_tensor for the same
/// stream bit for bit.
template <typename Scalar>
Tensor<Scalar> warmstart_layer(const Tensor<Scalar>& base, const LayerRole& base_role, const ParamSpec& target,
                               const Scheme& scheme, double m, const WarmstartConfig& ws, Rng& rng) {
  ws.validate();
  if (base_role.kind != target.role.kind)
    throw PlanError("warmstart: role mismatch for '" + target.name + "' (" + std::string(to_string(base_role.kind)) + " vs " +
                    std::string(to_string(target.role.kind)) + ")");
  const auto lambda = static_cast<Scalar>(ws.lambda_shrink);
  if (target.role.kind == RoleKind::VectorLike) {
    const auto def = static_cast<Scalar>(target.vector_default);
    Tensor<Scalar> shifted(base.shape(), (base.flat().array() - def).matrix());
    Tensor<Scalar> out = pad_zero(shifted, target.shape);
    out.flat() = (lambda * out.flat().array() + def).matrix();
    return out;
  }
  Tensor<Scalar> out = pad_zero(base, target.shape);
  out.flat() *= lambda;
  if (ws.perturb) out.flat() += gaussian<Scalar>(rng, target.shape, abc_for(target.role, scheme, m).b_std).flat();
  return out;
}

struct WarmstartResult {
  Model<float> model;
  /// First unseen training offset: the base run's final cursor.
  std::int64_t data_cursor = 0;
};

/// Builds a target-width model from a trained base checkpoint. Noise for
/// tensor `name` comes from Rng::for_name(ws.seed, name), the stream fresh
/// initialization uses. Optimizer state is not carried over.
WarmstartResult warmstart_model(const Checkpoint& base, const ModelConfig& target_cfg, const Scheme& scheme,
                                const WarmstartConfig& ws);

void to_json(Json& j, const WarmstartConfig& ws);
void from_json(const Json& j, WarmstartConfig& ws);

}  // namespace muwarm
