#include "muwarm/parameterization.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace muwarm {

std::string_view to_string(RoleKind kind) {
  switch (kind) {
    case RoleKind::InputLike: return "input";
    case RoleKind::Hidden: return "hidden";
    case RoleKind::OutputLike: return "output";
    case RoleKind::VectorLike: return "vector";
  }
  throw ConfigError("unknown role");
}

RoleKind role_kind_from_string(std::string_view name) {
  if (name == "input") return RoleKind::InputLike;
  if (name == "hidden") return RoleKind::Hidden;
  if (name == "output") return RoleKind::OutputLike;
  if (name == "vector") return RoleKind::VectorLike;
  throw ConfigError("unknown role '" + std::string(name) + "'");
}

std::string_view to_string(SchemeName name) { return name == SchemeName::SP ? "sp" : "mup"; }

SchemeName scheme_name_from_string(std::string_view name) {
  if (name == "sp" || name == "SP") return SchemeName::SP;
  if (name == "mup" || name == "muP" || name == "MuP") return SchemeName::MuP;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

Scheme Scheme::mup(int base_width, double sigma0, bool zero_readout) {
  return Scheme{SchemeName::MuP, base_width, sigma0, AttnScaling::OneOverD, zero_readout};
}

Scheme Scheme::sp(int base_width, double sigma0, bool zero_readout) {
  return Scheme{SchemeName::SP, base_width, sigma0, AttnScaling::OneOverSqrtD, zero_readout};
}

void Scheme::validate() const {
  if (base_width <= 0) throw ConfigError("scheme: base width must be positive");
  if (sigma0 < 0.0) throw ConfigError("scheme: sigma0 must be non-negative");
  if (name == SchemeName::MuP && attn_scaling != AttnScaling::OneOverD)
    throw ConfigError("scheme: muP requires 1/d attention scaling");
  if (name == SchemeName::SP && attn_scaling != AttnScaling::OneOverSqrtD)
    throw ConfigError("scheme: SP requires 1/sqrt(d) attention scaling");
}

double width_multiplier(const ModelConfig& cfg, const Scheme& scheme) {
  if (scheme.base_width <= 0) throw ConfigError("width multiplier: base width must be positive");
  return static_cast<double>(cfg.d_model) / static_cast<double>(scheme.base_width);
}

AbcScales abc_for(const LayerRole& role, const Scheme& scheme, double m) {
  if (!(m > 0.0)) throw ConfigError("abc_for: width multiplier must be positive");
  const double sigma0 = scheme.sigma0;
  const double matrix_std = sigma0 / std::sqrt(m);
  const bool mup = scheme.name == SchemeName::MuP;
  switch (role.kind) {
    case RoleKind::InputLike: return {1.0, sigma0, 1.0};
    case RoleKind::VectorLike: return {1.0, 0.0, 1.0};
    case RoleKind::Hidden: return {1.0, matrix_std, mup ? 1.0 / m : 1.0};
    case RoleKind::OutputLike: return {mup ? 1.0 / m : 1.0, scheme.zero_readout ? 0.0 : matrix_std, 1.0};
  }
  throw ConfigError("abc_for: unknown role");
}

double attn_logit_scale(const Scheme& scheme, Index head_size) {
  if (head_size <= 0) throw ConfigError("attn_logit_scale: head size must be positive");
  const double d = static_cast<double>(head_size);
  return scheme.attn_scaling == AttnScaling::OneOverD ? 1.0 / d : 1.0 / std::sqrt(d);
}

std::vector<ParamSpec> enumerate_params(const ModelConfig& cfg) {
  cfg.validate();
  const Index d = cfg.d_model;
  const Index v = cfg.vocab_size;
  const Index ff = 4 * d;
  std::vector<ParamSpec> specs;
  auto matrix = [&](std::string name, Index fan_in, Index fan_out, RoleKind kind) {
    specs.push_back({std::move(name), Shape{fan_in, fan_out}, LayerRole{kind, fan_in, fan_out}, 0.0});
  };
  auto vec = [&](std::string name, Index n, double init) {
    specs.push_back({std::move(name), Shape{n}, LayerRole{RoleKind::VectorLike, 1, n}, init});
  };
  matrix("tok_emb.weight", v, d, RoleKind::InputLike);
  matrix("pos_emb.weight", cfg.block_size, d, RoleKind::InputLike);
  for (int layer = 0; layer < cfg.n_layers; ++layer) {
    const std::string p = "blocks." + std::to_string(layer) + ".";
    vec(p + "ln1.gain", d, 1.0);
    vec(p + "ln1.bias", d, 0.0);
    for (const char* proj : {"q", "k", "v"}) {
      matrix(p + "attn." + proj + ".weight", d, d, RoleKind::Hidden);
      vec(p + "attn." + proj + ".bias", d, 0.0);
    }
    matrix(p + "attn.proj.weight", d, d, RoleKind::Hidden);
    vec(p + "attn.proj.bias", d, 0.0);
    vec(p + "ln2.gain", d, 1.0);
    vec(p + "ln2.bias", d, 0.0);
    matrix(p + "mlp.fc.weight", d, ff, RoleKind::Hidden);
    vec(p + "mlp.fc.bias", ff, 0.0);
    matrix(p + "mlp.proj.weight", ff, d, RoleKind::Hidden);
    vec(p + "mlp.proj.bias", d, 0.0);
  }
  vec("ln_f.gain", d, 1.0);
  vec("ln_f.bias", d, 0.0);
  matrix("head.weight", d, v, RoleKind::OutputLike);
  return specs;
}

void audit_roles(const ModelConfig& cfg, const std::vector<std::string>& names) {
  std::set<std::string> expected;
  for (const auto& spec : enumerate_params(cfg)) expected.insert(spec.name);
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!expected.contains(name)) throw ConfigError("role audit: tensor '" + name + "' has no assigned role");
    if (!seen.insert(name).second) throw ConfigError("role audit: tensor '" + name + "' appears twice");
  }
  if (seen.size() != expected.size()) {
    for (const auto& name : expected)
      if (!seen.contains(name)) throw ConfigError("role audit: missing tensor '" + name + "'");
  }
}

}  // namespace muwarm
