#pragma once

#include "muwarm/checkpoint.hpp"
#include "muwarm/coordcheck.hpp"
#include "muwarm/data.hpp"
#include "muwarm/metrics.hpp"
#include "muwarm/train.hpp"
#include "muwarm/warmstart.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace muwarm {

/// One training run. With `warmstart` set the model is grown from the final
/// checkpoint of run `parent` and the stream continues at the parent's cursor.
struct RunSpec {
  ModelConfig model;
  Scheme scheme;
  TrainConfig train;
  std::optional<WarmstartConfig> warmstart;
  std::string parent;
  /// First training offset of a fresh run; warmstarted runs continue at the
  /// parent's cursor instead.
  std::int64_t data_offset = 0;
  /// Free-form tag used by reports to group curves.
  std::string label;
};

void to_json(Json& j, const RunSpec& spec);
void from_json(const Json& j, RunSpec& spec);

struct RunOutcome {
  std::string id;
  std::filesystem::path dir;
  RunSpec spec;
  RunLedger ledger;
  std::vector<MetricsRecord> records;
  bool diverged = false;
  std::string failure;

  /// +inf for diverged runs.
  double initial_val_loss() const;
  double final_val_loss() const;
  /// Last point of the Gaussian-smoothed validation curve; +inf when diverged.
  double final_smoothed_val_loss() const;
  Checkpoint checkpoint() const;
};

/// Reads a completed run directory (spec.json, result.json, metrics.jsonl).
RunOutcome load_run(const std::filesystem::path& dir);

/// Content-addressed run store. Runs are identified by a hash of their spec,
/// the parent id and the corpus; completed runs are loaded instead of rerun.
class Lab {
 public:
  Lab(std::filesystem::path out_dir, const Corpus& corpus, int jobs = 1);

  const std::filesystem::path& out_dir() const { return out_dir_; }
  const Corpus& corpus() const { return *corpus_; }
  int jobs() const { return jobs_; }
  std::uint64_t corpus_hash() const { return corpus_hash_; }

  std::string run_id(const RunSpec& spec) const;
  bool completed(const RunSpec& spec) const;
  RunOutcome run(const RunSpec& spec);
  /// Runs independent specs on up to jobs() threads; results keep input order.
  std::vector<RunOutcome> run_all(const std::vector<RunSpec>& specs);
  RunOutcome load(const std::string& id) const;

 private:
  std::filesystem::path out_dir_;
  const Corpus* corpus_;
  int jobs_;
  std::uint64_t corpus_hash_;
};

struct GridSpec {
  ModelConfig model;
  Scheme scheme;
  TrainConfig train;
  std::vector<double> learning_rates;
  std::vector<int> batch_sizes;
  std::vector<std::uint64_t> seeds;
  std::string label = "grid";
};

struct GridCell {
  double learning_rate = 0.0;
  int batch_size = 0;
  std::vector<double> losses;  // final smoothed val loss per seed
  double mean = 0.0;
  std::vector<std::string> run_ids;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;
  /// The argmin sits on the edge of the learning-rate grid.
  bool boundary_warning = false;

  const GridCell& argmin() const { return cells.at(best); }
};

void to_json(Json& j, const GridCell& c);
void to_json(Json& j, const GridResult& g);

/// Grid steps between two learning rates on a power-of-two grid.
double lr_grid_steps(double a, double b);

/// Trains every (lr, batch, seed) cell; the argmin is the lowest seed-mean
/// loss, ties going to the smaller learning rate. Diverged runs count as +inf.
GridResult grid_search(Lab& lab, const GridSpec& spec);

/// Fresh runs at `target` with the base argmin learning rate and batch size.
std::vector<RunOutcome> mutransfer(Lab& lab, const GridSpec& base, const GridResult& result, const ModelConfig& target);

/// Grows each parent run to `target` and trains it with `train` (seed set
/// per parent).
std::vector<RunOutcome> warmstart_transfer(Lab& lab, const std::vector<RunOutcome>& parents, const ModelConfig& target,
                                           const WarmstartConfig& ws, const TrainConfig& train,
                                           const std::string& label = "warmstart");

/// coord_check keyed by name, config and base run; the result is stored as
/// coordcheck/<name>.json under the lab and reused while the key matches.
CoordCheckResult cached_coord_check(Lab& lab, const std::string& name, const CoordCheckConfig& cfg,
                                    const std::optional<WarmstartConfig>& ws = std::nullopt,
                                    const std::string& base_run = "");

struct AblationRow {
  double lambda_shrink = 0.0;
  double initial_val_loss = 0.0;  // seed mean
  double final_val_loss = 0.0;    // seed mean of the smoothed final loss
  WeightNorm base_end;
  WeightNorm post_warmstart;
  WeightNorm trained;
  double coord_max_slope = 0.0;
  bool coord_pass = false;
  std::vector<std::string> run_ids;
};

void to_json(Json& j, const AblationRow& row);

/// Warmstart transfer per lambda plus a coordinate check per lambda.
std::vector<AblationRow> shrink_ablation(Lab& lab, const std::vector<RunOutcome>& parents, const ModelConfig& target,
                                         const std::vector<double>& lambdas, const TrainConfig& train,
                                         const CoordCheckConfig& coord, double slope_bound);

/// Stage k+1 warmstarts from stage k. `budgets[k]` is the token budget of
/// stage k; the first parent is `base`.
std::vector<RunOutcome> successive_warmstart(Lab& lab, const RunOutcome& base, const std::vector<ModelConfig>& stages,
                                             const std::vector<std::int64_t>& budgets, const WarmstartConfig& ws,
                                             const TrainConfig& train, const std::string& label = "successive");

/// Largest whole-batch token count for `cfg` whose 6ND compute fits in `total_flops`.
std::int64_t tokens_for_flops(std::int64_t total_flops, const ModelConfig& cfg, std::int64_t tokens_per_batch);

/// Writes loss-vs-FLOPs and loss-vs-tokens SVGs, coordinate-check panels and
/// a summary table for every completed run and every coordcheck/*.json under
/// `lab_dir` into `report_dir`. Output is byte-identical for identical inputs.
void write_report(const std::filesystem::path& lab_dir, const std::filesystem::path& report_dir);

}  // namespace muwarm
