#pragma once

#include "muwarm/checkpoint.hpp"
#include "muwarm/data.hpp"
#include "muwarm/serialize.hpp"
#include "muwarm/warmstart.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace muwarm {

struct CoordCheckConfig {
  /// Depth, head size, vocab and block size of every rung.
  ModelConfig base_cfg;
  std::vector<int> widths{32, 64, 128, 256};
  Scheme scheme;
  double learning_rate = 0.01;
  int batch_size = 16;
  int steps = 4;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  /// Training offset of the first micro-batch; every width sees the same batches.
  std::int64_t data_offset = 0;
};

/// Fresh init, or warmstart of every rung from one base checkpoint.
struct CoordCheckInit {
  std::optional<WarmstartConfig> warmstart;
  const Checkpoint* base = nullptr;

  static CoordCheckInit fresh() { return {}; }
  static CoordCheckInit from_base(const Checkpoint& base, const WarmstartConfig& ws) { return {ws, &base}; }
};

struct CoordCheckResult {
  std::vector<int> widths;
  int steps = 0;
  std::vector<std::string> layers;
  /// Seed-mean of mean |activation|, indexed [layer][step][width].
  std::map<std::string, std::vector<std::vector<double>>> norms;
  /// Least-squares slope of log(norm) on log(width), indexed [layer][step].
  std::map<std::string, std::vector<double>> slopes;
  std::vector<std::string> failures;

  bool failed() const { return !failures.empty(); }
  /// Largest |slope| over all layers for steps in [from_step, steps].
  double max_abs_slope(int from_step = 1) const;
  /// True when no failure occurred and every |slope| <= bound from `from_step` on.
  bool within(double bound, int from_step = 1) const;
};

void to_json(Json& j, const CoordCheckResult& r);
void from_json(const Json& j, CoordCheckResult& r);

/// Trains each width `steps` Adam steps at the transferred learning rate on
/// identical micro-batches, recording activation_l1 at init and after every
/// step, and fits the per-(layer, step) width slope of the seed-mean norms.
CoordCheckResult coord_check(const Corpus& corpus, const CoordCheckConfig& cfg, const CoordCheckInit& init);

}  // namespace muwarm
