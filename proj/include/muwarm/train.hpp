#pragma once

#include "muwarm/adam.hpp"
#include "muwarm/data.hpp"
#include "muwarm/ledger.hpp"
#include "muwarm/model.hpp"
#include "muwarm/serialize.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace muwarm {

/// Constant-LR Adam training with no warmup and zero weight decay.
struct TrainConfig {
  double learning_rate = 0.03;
  int batch_size = 16;
  double tokens_per_param = 20.0;
  /// Explicit token budget; when > 0 it replaces tokens_per_param * N.
  std::int64_t token_budget = 0;
  std::uint64_t seed = 0;
  /// Steps between metrics records; 0 means budget / 50 steps.
  int eval_interval = 0;
  int eval_batches = 64;
  std::string run_id;
  /// Metadata carried into metrics records.
  double lambda_shrink = 0.0;

  void validate() const;
};

void to_json(Json& j, const TrainConfig& tc);
void from_json(const Json& j, TrainConfig& tc);

struct MetricsRecord {
  std::string run_id;
  std::int64_t step = 0;
  std::int64_t tokens = 0;
  std::int64_t flops = 0;
  std::optional<double> train_loss;
  double val_loss = 0.0;
  std::map<std::string, double> per_layer_act_l1;
  double weight_l1 = 0.0;
  double weight_l2 = 0.0;
  double lr = 0.0;
  double lambda_shrink = 0.0;
  std::string scheme;
  int width = 0;
};

void to_json(Json& j, const MetricsRecord& r);
void from_json(const Json& j, MetricsRecord& r);

struct TrainResult {
  RunLedger ledger;
  std::vector<MetricsRecord> records;
  bool diverged = false;
  std::string failure;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

/// Tokens a run of `cfg` under `tc` will consume (whole batches).
std::int64_t planned_tokens(const ModelConfig& cfg, const TrainConfig& tc);

/// Mean cross-entropy over `batches`. When `taps` is non-null it receives the
/// activation taps of the first batch.
double evaluate(Model<float>& model, const std::vector<TokenBatch>& batches,
                std::vector<ActivationTap<float>>* taps = nullptr);

/// Trains `model` on `stream` for the planned budget, evaluating on the
/// corpus' held-out split every eval_interval steps (and at steps 0 and last).
/// Non-finite loss or gradients stop the run and restore the weights of the
/// last metrics record; the result is then flagged as diverged.
TrainResult train(Model<float>& model, TokenStream& stream, const Corpus& corpus, const TrainConfig& tc,
                  const MetricsSink& sink = {});

}  // namespace muwarm
