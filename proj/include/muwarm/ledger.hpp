#pragma once

#include "muwarm/config.hpp"

#include <cstdint>

namespace muwarm {

/// Training compute: 6 * N * D.
constexpr std::int64_t flops(std::int64_t n_params, std::int64_t tokens) { return 6 * n_params * tokens; }

/// ratio * N tokens, rounded down to a whole number of `tokens_per_batch`.
std::int64_t token_budget(std::int64_t n_params, double ratio, std::int64_t tokens_per_batch = 1);
std::int64_t token_budget(const ModelConfig& cfg, double ratio, std::int64_t tokens_per_batch = 1);

/// Tokens and compute consumed by one run. `data_start`/`data_end` bound the
/// training offsets it was served.
struct RunLedger {
  std::int64_t n_params = 0;
  std::int64_t step = 0;
  std::int64_t tokens = 0;
  std::int64_t flops = 0;
  double wall_time = 0.0;
  std::int64_t data_start = 0;
  std::int64_t data_end = 0;

  void advance(std::int64_t batch_tokens) {
    ++step;
    tokens += batch_tokens;
    data_end += batch_tokens;
    flops = muwarm::flops(n_params, tokens);
  }
  bool consistent() const { return flops == muwarm::flops(n_params, tokens) && data_end - data_start == tokens; }
  bool operator==(const RunLedger&) const = default;
};

}  // namespace muwarm
