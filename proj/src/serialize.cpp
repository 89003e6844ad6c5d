#include "muwarm/serialize.hpp"

namespace muwarm {

void to_json(Json& j, const ModelConfig& cfg) {
  j = Json{{"n_layers", cfg.n_layers}, {"d_model", cfg.d_model},       {"n_heads", cfg.n_heads},
           {"head_size", cfg.head_size}, {"vocab_size", cfg.vocab_size}, {"block_size", cfg.block_size}};
}

void from_json(const Json& j, ModelConfig& cfg) {
  ModelConfig defaults;
  cfg.n_layers = j.value("n_layers", defaults.n_layers);
  cfg.head_size = j.value("head_size", defaults.head_size);
  cfg.vocab_size = j.value("vocab_size", defaults.vocab_size);
  cfg.block_size = j.value("block_size", defaults.block_size);
  if (j.contains("d_model")) {
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_heads = j.value("n_heads", cfg.head_size > 0 ? cfg.d_model / cfg.head_size : 0);
  } else {
    cfg.n_heads = j.value("n_heads", defaults.n_heads);
    cfg.d_model = cfg.n_heads * cfg.head_size;
  }
}

void to_json(Json& j, const Scheme& scheme) {
  j = Json{{"name", std::string(to_string(scheme.name))},
           {"base_width", scheme.base_width},
           {"sigma0", scheme.sigma0},
           {"attn_scaling", scheme.attn_scaling == AttnScaling::OneOverD ? "one_over_d" : "one_over_sqrt_d"},
           {"zero_readout", scheme.zero_readout}};
}

void from_json(const Json& j, Scheme& scheme) {
  const auto name = scheme_name_from_string(j.value("name", std::string("mup")));
  const int base = j.value("base_width", 32);
  const double sigma0 = j.value("sigma0", 0.02);
  const bool zero = j.value("zero_readout", false);
  scheme = name == SchemeName::MuP ? Scheme::mup(base, sigma0, zero) : Scheme::sp(base, sigma0, zero);
  if (j.contains("attn_scaling")) {
    const auto a = j.at("attn_scaling").get<std::string>();
    if (a == "one_over_d") scheme.attn_scaling = AttnScaling::OneOverD;
    else if (a == "one_over_sqrt_d") scheme.attn_scaling = AttnScaling::OneOverSqrtD;
    else throw ConfigError("unknown attention scaling '" + a + "'");
  }
  scheme.validate();
}

void to_json(Json& j, const RunLedger& l) {
  j = Json{{"n_params", l.n_params}, {"step", l.step},           {"tokens", l.tokens},
           {"flops", l.flops},       {"wall_time", l.wall_time}, {"data_start", l.data_start},
           {"data_end", l.data_end}};
}

void from_json(const Json& j, RunLedger& l) {
  l.n_params = j.at("n_params").get<std::int64_t>();
  l.step = j.at("step").get<std::int64_t>();
  l.tokens = j.at("tokens").get<std::int64_t>();
  l.flops = j.at("flops").get<std::int64_t>();
  l.wall_time = j.at("wall_time").get<double>();
  l.data_start = j.at("data_start").get<std::int64_t>();
  l.data_end = j.at("data_end").get<std::int64_t>();
}

}  // namespace muwarm
