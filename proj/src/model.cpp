#include "muwarm/model.hpp"

namespace muwarm {

std::int64_t param_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t d = cfg.d_model;
  const std::int64_t v = cfg.vocab_size;
  const std::int64_t per_block = 12 * d * d + 13 * d;
  return v * d + static_cast<std::int64_t>(cfg.block_size) * d + cfg.n_layers * per_block + 2 * d + d * v;
}

}  // namespace muwarm
