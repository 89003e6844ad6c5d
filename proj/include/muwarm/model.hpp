#pragma once

#include "muwarm/autodiff.hpp"
#include "muwarm/config.hpp"
#include "muwarm/parameterization.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace muwarm {

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Row-major [batch x seq] token ids with next-token targets.
struct TokenBatch {
  Index batch = 0;
  Index seq = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
};

template <typename Scalar>
struct ActivationTap {
  std::string name;
  Tensor<Scalar> value;
};

/// Exact trainable-parameter count.
std::int64_t param_count(const ModelConfig& cfg);

/// Decoder-only GPT with pre-norm blocks, learned absolute positions and an
/// untied readout. Stored weights are raw; each tensor's forward multiplier
/// a_mult is applied when the tensor is used.
template <typename Scalar>
class Model {
 public:
  Model(ModelConfig cfg, Scheme scheme, std::vector<ParamTensor<Scalar>> params)
      : cfg_(cfg), scheme_(scheme), params_(std::move(params)) {
    cfg_.validate();
    scheme_.validate();
    std::vector<std::string> names;
    for (const auto& p : params_) names.push_back(p.name);
    audit_roles(cfg_, names);
    const auto specs = enumerate_params(cfg_);
    const double m = muwarm::width_multiplier(cfg_, scheme_);
    for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].name, i);
    for (const auto& spec : specs) {
      auto& p = param(spec.name);
      if (p.value.shape() != spec.shape)
        throw ConfigError("tensor '" + spec.name + "' has shape " + to_string(p.value.shape()) + ", expected " +
                          to_string(spec.shape));
      if (!(p.role == spec.role)) throw ConfigError("tensor '" + spec.name + "' has the wrong role");
      multipliers_.emplace(spec.name, static_cast<Scalar>(abc_for(spec.role, scheme_, m).a_mult));
    }
  }

  static Model build(const ModelConfig& cfg, const Scheme& scheme, std::uint64_t seed) {
    return Model(cfg, scheme, init_params<Scalar>(cfg, scheme, seed));
  }

  const ModelConfig& config() const { return cfg_; }
  const Scheme& scheme() const { return scheme_; }
  double width_multiplier() const { return muwarm::width_multiplier(cfg_, scheme_); }
  Scalar attention_scale() const { return static_cast<Scalar>(attn_logit_scale(scheme_, cfg_.head_size)); }
  Scalar multiplier(std::string_view name) const { return multipliers_.at(std::string(name)); }

  std::vector<ParamTensor<Scalar>>& params() { return params_; }
  const std::vector<ParamTensor<Scalar>>& params() const { return params_; }
  ParamTensor<Scalar>& param(std::string_view name) { return params_.at(lookup(name)); }
  const ParamTensor<Scalar>& param(std::string_view name) const { return params_.at(lookup(name)); }

  void zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
  }

  /// Logits [batch*seq x vocab]. When `taps` is non-null it receives copies of
  /// the embedding output, every block output, and the logits.
  Var<Scalar> forward(Graph<Scalar>& g, const TokenBatch& batch, std::vector<ActivationTap<Scalar>>* taps = nullptr) {
    check_batch(batch);
    std::unordered_map<std::string, Var<Scalar>> leaves;
    auto w = [&](const std::string& name) -> Var<Scalar> {
      auto it = leaves.find(name);
      if (it != leaves.end()) return it->second;
      return leaves.emplace(name, g.parameter(param(name).value)).first->second;
    };
    auto linear = [&](const Var<Scalar>& x, const std::string& prefix, bool bias) {
      Var<Scalar> y = matmul(x, w(prefix + ".weight"));
      const Scalar a = multiplier(prefix + ".weight");
      if (a != Scalar(1)) y = scale(y, a);
      return bias ? add_bias(y, w(prefix + ".bias")) : y;
    };
    auto tap = [&](const char* name, const Var<Scalar>& v) {
      if (taps) taps->push_back({name, v.value()});
    };

    std::vector<int> positions(batch.inputs.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % static_cast<std::size_t>(batch.seq));
    Var<Scalar> x = add(embedding_gather(w("tok_emb.weight"), std::span<const int>(batch.inputs)),
                        embedding_gather(w("pos_emb.weight"), std::span<const int>(positions)));
    for (const char* emb : {"tok_emb.weight", "pos_emb.weight"})
      if (multiplier(emb) != Scalar(1)) throw ConfigError("embedding multipliers other than 1 are not supported");
    tap("embed", x);

    const Scalar attn_scale = attention_scale();
    for (int layer = 0; layer < cfg_.n_layers; ++layer) {
      const std::string p = "blocks." + std::to_string(layer) + ".";
      Var<Scalar> h = layer_norm(x, w(p + "ln1.gain"), w(p + "ln1.bias"));
      Var<Scalar> q = linear(h, p + "attn.q", true);
      Var<Scalar> k = linear(h, p + "attn.k", true);
      Var<Scalar> v = linear(h, p + "attn.v", true);
      Var<Scalar> att = causal_self_attention(q, k, v, batch.batch, batch.seq, static_cast<Index>(cfg_.n_heads), attn_scale);
      x = add(x, linear(att, p + "attn.proj", true));
      Var<Scalar> h2 = layer_norm(x, w(p + "ln2.gain"), w(p + "ln2.bias"));
      x = add(x, linear(gelu(linear(h2, p + "mlp.fc", true)), p + "mlp.proj", true));
      if (taps) taps->push_back({"block." + std::to_string(layer), x.value()});
    }
    Var<Scalar> hf = layer_norm(x, w("ln_f.gain"), w("ln_f.bias"));
    Var<Scalar> logits = linear(hf, "head", false);
    tap("logits", logits);
    return logits;
  }

  Var<Scalar> loss(Graph<Scalar>& g, const TokenBatch& batch, std::vector<ActivationTap<Scalar>>* taps = nullptr) {
    return softmax_cross_entropy(forward(g, batch, taps), std::span<const int>(batch.targets));
  }

  template <typename Other>
  Model<Other> cast() const {
    std::vector<ParamTensor<Other>> out;
    for (const auto& p : params_) out.push_back({p.name, p.role, p.vector_default, p.value.template cast<Other>()});
    return Model<Other>(cfg_, scheme_, std::move(out));
  }

 private:
  std::size_t lookup(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("no tensor named '" + std::string(name) + "'");
    return it->second;
  }

  void check_batch(const TokenBatch& batch) const {
    if (batch.batch <= 0 || batch.seq <= 0) throw InputError("forward: empty batch");
    if (batch.seq > cfg_.block_size)
      throw InputError("forward: sequence length " + std::to_string(batch.seq) + " exceeds block size " +
                       std::to_string(cfg_.block_size));
    const auto n = static_cast<std::size_t>(batch.batch * batch.seq);
    if (batch.inputs.size() != n) throw InputError("forward: inputs must hold batch*seq ids");
    if (!batch.targets.empty() && batch.targets.size() != n) throw InputError("forward: targets must hold batch*seq ids");
    for (int id : batch.inputs)
      if (id < 0 || id >= cfg_.vocab_size) throw InputError("forward: token id " + std::to_string(id) + " out of vocabulary");
    for (int id : batch.targets)
      if (id < 0 || id >= cfg_.vocab_size) throw InputError("forward: target id " + std::to_string(id) + " out of vocabulary");
  }

  ModelConfig cfg_;
  Scheme scheme_;
  std::vector<ParamTensor<Scalar>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, Scalar> multipliers_;
};

}  // namespace muwarm
