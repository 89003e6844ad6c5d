#include "muwarm/config.hpp"

namespace muwarm {

void ModelConfig::validate() const {
  if (n_layers <= 0 || d_model <= 0 || n_heads <= 0 || head_size <= 0 || vocab_size <= 0 || block_size <= 0)
    throw ConfigError("model config: all extents must be positive");
  if (d_model != n_heads * head_size)
    throw ConfigError("model config: d_model (" + std::to_string(d_model) + ") must equal n_heads * head_size (" +
                      std::to_string(n_heads) + " * " + std::to_string(head_size) + ")");
  if (vocab_size < 2) throw ConfigError("model config: vocab_size must be at least 2");
}

ModelConfig ModelConfig::with_width(int width) const {
  if (head_size <= 0 || width % head_size != 0)
    throw ConfigError("width " + std::to_string(width) + " is not a multiple of head_size " + std::to_string(head_size));
  ModelConfig out = *this;
  out.n_heads = width / head_size;
  out.d_model = width;
  return out;
}

bool same_ladder(const ModelConfig& a, const ModelConfig& b) {
  return a.n_layers == b.n_layers && a.head_size == b.head_size && a.vocab_size == b.vocab_size &&
         a.block_size == b.block_size;
}

void ScaleLadder::validate() const {
  if (rungs.empty()) throw ConfigError("scale ladder: no rungs");
  for (std::size_t i = 0; i < rungs.size(); ++i) {
    rungs[i].validate();
    if (i == 0) continue;
    if (!same_ladder(rungs[0], rungs[i]))
      throw ConfigError("scale ladder: rungs must share depth, head size, vocab and block size");
    if (rungs[i].d_model <= rungs[i - 1].d_model) throw ConfigError("scale ladder: widths must strictly increase");
  }
}

ScaleLadder ScaleLadder::from_widths(const ModelConfig& base, const std::vector<int>& widths) {
  ScaleLadder ladder;
  for (int w : widths) ladder.rungs.push_back(base.with_width(w));
  ladder.validate();
  return ladder;
}

}  // namespace muwarm
