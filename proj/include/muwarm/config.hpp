#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace muwarm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Decoder-only transformer shape. d_model = n_heads * head_size.
struct ModelConfig {
  int n_layers = 2;
  int d_model = 32;
  int n_heads = 4;
  int head_size = 8;
  int vocab_size = 256;
  int block_size = 128;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  /// Same depth, head size, vocab and block size; width set through n_heads.
  ModelConfig with_width(int width) const;
};

/// Width ladder: configs identical except for n_heads (and hence d_model).
struct ScaleLadder {
  std::vector<ModelConfig> rungs;

  void validate() const;
  static ScaleLadder from_widths(const ModelConfig& base, const std::vector<int>& widths);
};

/// True when `a` and `b` sit on one width ladder.
bool same_ladder(const ModelConfig& a, const ModelConfig& b);

}  // namespace muwarm
