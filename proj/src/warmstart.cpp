#include "muwarm/warmstart.hpp"

namespace muwarm {

PadPlan PadPlan::make(const ModelConfig& base, const ModelConfig& target) {
  base.validate();
  target.validate();
  if (base.n_layers != target.n_layers) throw PlanError("warmstart plan: depth differs between base and target");
  if (base.vocab_size != target.vocab_size) throw PlanError("warmstart plan: vocabulary differs between base and target");
  if (base.head_size != target.head_size) throw PlanError("warmstart plan: head size differs between base and target");
  if (base.block_size != target.block_size) throw PlanError("warmstart plan: block size differs between base and target");
  if (base.d_model > target.d_model) throw PlanError("warmstart plan: target is narrower than base");

  const auto base_specs = enumerate_params(base);
  const auto target_specs = enumerate_params(target);
  PadPlan plan;
  for (std::size_t i = 0; i < target_specs.size(); ++i) {
    const ParamSpec& b = base_specs.at(i);
    const ParamSpec& t = target_specs[i];
    if (b.name != t.name || b.role.kind != t.role.kind) throw PlanError("warmstart plan: role maps differ at '" + t.name + "'");
    for (std::size_t axis = 0; axis < t.shape.size(); ++axis)
      if (b.shape[axis] > t.shape[axis]) throw PlanError("warmstart plan: '" + t.name + "' shrinks along an axis");
    plan.entries.push_back({t.name, b.shape, t.shape, b.role, t});
  }
  return plan;
}

WarmstartResult warmstart_model(const Checkpoint& base, const ModelConfig& target_cfg, const Scheme& scheme,
                                const WarmstartConfig& ws) {
  ws.validate();
  if (!(base.scheme == scheme)) throw PlanError("warmstart: base and target parameterization schemes differ");
  const PadPlan plan = PadPlan::make(base.model, target_cfg);
  const double m = width_multiplier(target_cfg, scheme);
  std::vector<ParamTensor<float>> params;
  for (const PadEntry& entry : plan.entries) {
    const NamedTensor& stored = base.tensor(entry.name);
    if (stored.shape != entry.base_shape || stored.role != entry.base_role.kind)
      throw PlanError("warmstart: checkpoint tensor '" + entry.name + "' does not match the base config");
    Vector<float> data = Eigen::Map<const Vector<float>>(stored.data.data(), static_cast<Index>(stored.data.size()));
    Tensor<float> base_tensor(stored.shape, std::move(data));
    Rng rng = Rng::for_name(ws.seed, entry.name);
    params.push_back({entry.name, entry.target.role, entry.target.vector_default,
                      warmstart_layer(base_tensor, entry.base_role, entry.target, scheme, m, ws, rng)});
  }
  return {Model<float>(target_cfg, scheme, std::move(params)), base.ledger.data_end};
}

void to_json(Json& j, const WarmstartConfig& ws) {
  j = Json{{"lambda_shrink", ws.lambda_shrink}, {"perturb", ws.perturb}, {"seed", ws.seed}};
}

void from_json(const Json& j, WarmstartConfig& ws) {
  WarmstartConfig d;
  ws.lambda_shrink = j.value("lambda_shrink", d.lambda_shrink);
  ws.perturb = j.value("perturb", d.perturb);
  ws.seed = j.value("seed", d.seed);
  ws.validate();
}

}  // namespace muwarm
