#pragma once

#include "muwarm/config.hpp"
#include "muwarm/rng.hpp"
#include "muwarm/tensor.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace muwarm {

enum class RoleKind { InputLike, Hidden, OutputLike, VectorLike };

std::string_view to_string(RoleKind kind);
RoleKind role_kind_from_string(std::string_view name);

/// Width-scaling role of a trainable tensor.
struct LayerRole {
  RoleKind kind = RoleKind::Hidden;
  Index fan_in = 1;
  Index fan_out = 1;

  bool operator==(const LayerRole&) const = default;
};

/// abc-parameterization triple: forward multiplier, init std, LR scale.
struct AbcScales {
  double a_mult = 1.0;
  double b_std = 0.0;
  double c_lr = 1.0;

  bool operator==(const AbcScales&) const = default;
};

enum class SchemeName { SP, MuP };
enum class AttnScaling { OneOverSqrtD, OneOverD };

std::string_view to_string(SchemeName name);
SchemeName scheme_name_from_string(std::string_view name);

struct Scheme {
  SchemeName name = SchemeName::MuP;
  int base_width = 32;
  double sigma0 = 0.02;
  AttnScaling attn_scaling = AttnScaling::OneOverD;
  /// Optional zero init of the readout (b_std = 0 for OutputLike).
  bool zero_readout = false;

  static Scheme mup(int base_width, double sigma0 = 0.02, bool zero_readout = false);
  static Scheme sp(int base_width, double sigma0 = 0.02, bool zero_readout = false);

  void validate() const;
  bool operator==(const Scheme&) const = default;
};

/// m = d_model / base_width.
double width_multiplier(const ModelConfig& cfg, const Scheme& scheme);

AbcScales abc_for(const LayerRole& role, const Scheme& scheme, double m);

double attn_logit_scale(const Scheme& scheme, Index head_size);

/// Static description of one trainable tensor of a model.
struct ParamSpec {
  std::string name;
  Shape shape;
  LayerRole role;
  /// Deterministic init value for VectorLike tensors (1 for gains, 0 for biases).
  double vector_default = 0.0;
};

/// Every trainable tensor of `cfg`, in canonical order.
std::vector<ParamSpec> enumerate_params(const ModelConfig& cfg);

/// Named trainable tensor with its role.
template <typename Scalar>
struct ParamTensor {
  std::string name;
  LayerRole role;
  double vector_default = 0.0;
  Tensor<Scalar> value;
};

/// Initial value of one tensor: N(0, b_std^2) from the tensor's own stream,
/// or the deterministic default for VectorLike tensors.
template <typename Scalar>
Tensor<Scalar> init_tensor(const ParamSpec& spec, const Scheme& scheme, double m, std::uint64_t seed) {
  if (spec.role.kind == RoleKind::VectorLike) return Tensor<Scalar>::filled(spec.shape, static_cast<Scalar>(spec.vector_default));
  Rng rng = Rng::for_name(seed, spec.name);
  return gaussian<Scalar>(rng, spec.shape, abc_for(spec.role, scheme, m).b_std);
}

template <typename Scalar>
std::vector<ParamTensor<Scalar>> init_params(const ModelConfig& cfg, const Scheme& scheme, std::uint64_t seed) {
  cfg.validate();
  const double m = width_multiplier(cfg, scheme);
  std::vector<ParamTensor<Scalar>> params;
  for (const ParamSpec& spec : enumerate_params(cfg))
    params.push_back({spec.name, spec.role, spec.vector_default, init_tensor<Scalar>(spec, scheme, m, seed)});
  return params;
}

/// Throws ConfigError unless `names` is exactly the role-assigned tensor set of `cfg`.
void audit_roles(const ModelConfig& cfg, const std::vector<std::string>& names);

}  // namespace muwarm
