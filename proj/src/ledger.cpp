#include "muwarm/ledger.hpp"

#include "muwarm/model.hpp"

#include <cmath>

namespace muwarm {

std::int64_t token_budget(std::int64_t n_params, double ratio, std::int64_t tokens_per_batch) {
  if (!(ratio > 0.0)) throw ConfigError("token budget: tokens-per-parameter ratio must be positive");
  if (n_params < 0 || tokens_per_batch <= 0) throw ConfigError("token budget: invalid parameter count or batch size");
  const auto raw = static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(n_params)));
  return raw / tokens_per_batch * tokens_per_batch;
}

std::int64_t token_budget(const ModelConfig& cfg, double ratio, std::int64_t tokens_per_batch) {
  return token_budget(param_count(cfg), ratio, tokens_per_batch);
}

}  // namespace muwarm
