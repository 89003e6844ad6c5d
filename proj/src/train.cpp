#include "muwarm/train.hpp"

#include "muwarm/metrics.hpp"

#include <chrono>
#include <cmath>

namespace muwarm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning rate must be positive");
  if (batch_size <= 0) throw ConfigError("train config: batch size must be positive");
  if (token_budget <= 0 && !(tokens_per_param > 0.0)) throw ConfigError("train config: tokens per parameter must be positive");
  if (eval_batches <= 0) throw ConfigError("train config: eval_batches must be positive");
  if (eval_interval < 0) throw ConfigError("train config: eval_interval must be non-negative");
}

void to_json(Json& j, const TrainConfig& tc) {
  j = Json{{"learning_rate", tc.learning_rate}, {"batch_size", tc.batch_size},   {"tokens_per_param", tc.tokens_per_param},
           {"token_budget", tc.token_budget},   {"seed", tc.seed},               {"eval_interval", tc.eval_interval},
           {"eval_batches", tc.eval_batches},   {"run_id", tc.run_id},           {"lambda_shrink", tc.lambda_shrink}};
}

void from_json(const Json& j, TrainConfig& tc) {
  TrainConfig d;
  tc.learning_rate = j.value("learning_rate", d.learning_rate);
  tc.batch_size = j.value("batch_size", d.batch_size);
  tc.tokens_per_param = j.value("tokens_per_param", d.tokens_per_param);
  tc.token_budget = j.value("token_budget", d.token_budget);
  tc.seed = j.value("seed", d.seed);
  tc.eval_interval = j.value("eval_interval", d.eval_interval);
  tc.eval_batches = j.value("eval_batches", d.eval_batches);
  tc.run_id = j.value("run_id", d.run_id);
  tc.lambda_shrink = j.value("lambda_shrink", d.lambda_shrink);
}

void to_json(Json& j, const MetricsRecord& r) {
  j = Json{{"run_id", r.run_id},
           {"step", r.step},
           {"tokens", r.tokens},
           {"flops", r.flops},
           {"train_loss", r.train_loss ? Json(*r.train_loss) : Json(nullptr)},
           {"val_loss", r.val_loss},
           {"per_layer_act_l1", r.per_layer_act_l1},
           {"weight_l1", r.weight_l1},
           {"weight_l2", r.weight_l2},
           {"lr", r.lr},
           {"lambda_shrink", r.lambda_shrink},
           {"scheme", r.scheme},
           {"width", r.width}};
}

void from_json(const Json& j, MetricsRecord& r) {
  r.run_id = j.at("run_id").get<std::string>();
  r.step = j.at("step").get<std::int64_t>();
  r.tokens = j.at("tokens").get<std::int64_t>();
  r.flops = j.at("flops").get<std::int64_t>();
  if (j.at("train_loss").is_null()) r.train_loss.reset();
  else r.train_loss = j.at("train_loss").get<double>();
  // Diverged evaluations serialize as null.
  r.val_loss = j.at("val_loss").is_null() ? INFINITY : j.at("val_loss").get<double>();
  r.per_layer_act_l1 = j.at("per_layer_act_l1").get<std::map<std::string, double>>();
  r.weight_l1 = j.at("weight_l1").get<double>();
  r.weight_l2 = j.at("weight_l2").get<double>();
  r.lr = j.at("lr").get<double>();
  r.lambda_shrink = j.at("lambda_shrink").get<double>();
  r.scheme = j.at("scheme").get<std::string>();
  r.width = j.at("width").get<int>();
}

std::int64_t planned_tokens(const ModelConfig& cfg, const TrainConfig& tc) {
  const std::int64_t per_batch = static_cast<std::int64_t>(tc.batch_size) * cfg.block_size;
  if (tc.token_budget > 0) return tc.token_budget / per_batch * per_batch;
  return token_budget(cfg, tc.tokens_per_param, per_batch);
}

double evaluate(Model<float>& model, const std::vector<TokenBatch>& batches, std::vector<ActivationTap<float>>* taps) {
  double total = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    Graph<float> g(false);
    total += static_cast<double>(model.loss(g, batches[i], i == 0 ? taps : nullptr).value()[0]);
  }
  return batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
}

TrainResult train(Model<float>& model, TokenStream& stream, const Corpus& corpus, const TrainConfig& tc,
                  const MetricsSink& sink) {
  tc.validate();
  const ModelConfig& cfg = model.config();
  if (stream.batch_size() != tc.batch_size || stream.seq_len() != cfg.block_size)
    throw ConfigError("train: stream batch geometry does not match the train config / block size");
  if (corpus.vocab_size() > cfg.vocab_size) throw ConfigError("train: corpus vocabulary exceeds model vocabulary");

  const std::int64_t budget = planned_tokens(cfg, tc);
  const std::int64_t per_batch = stream.tokens_per_batch();
  const std::int64_t steps = budget / per_batch;
  if (stream.batches_left() < steps)
    throw DataExhaustedError("train: budget of " + std::to_string(budget) + " tokens exceeds the " +
                             std::to_string(stream.batches_left() * per_batch) + " unseen training tokens");
  const std::int64_t interval = tc.eval_interval > 0 ? tc.eval_interval : std::max<std::int64_t>(1, steps / 50);
  const auto eval_set = eval_batches(corpus, tc.batch_size, cfg.block_size, tc.eval_batches);

  const double m = model.width_multiplier();
  const auto lrs = effective_learning_rates(model.params(), model.scheme(), m, tc.learning_rate);
  std::vector<Tensor<float>*> tensors;
  for (auto& p : model.params()) tensors.push_back(&p.value);
  AdamState<float> adam;

  TrainResult result;
  result.ledger.n_params = param_count(cfg);
  result.ledger.data_start = stream.cursor();
  result.ledger.data_end = stream.cursor();
  std::vector<Tensor<float>> last_good;
  double loss_acc = 0.0;
  std::int64_t loss_count = 0;
  const auto t0 = std::chrono::steady_clock::now();

  auto record = [&](std::int64_t step) {
    std::vector<ActivationTap<float>> taps;
    MetricsRecord r;
    r.run_id = tc.run_id;
    r.step = step;
    r.tokens = result.ledger.tokens;
    r.flops = result.ledger.flops;
    if (loss_count > 0) r.train_loss = loss_acc / static_cast<double>(loss_count);
    r.val_loss = evaluate(model, eval_set, &taps);
    r.per_layer_act_l1 = activation_l1(taps);
    const WeightNorm wn = global_weight_norm(model);
    r.weight_l1 = wn.l1_mean;
    r.weight_l2 = wn.l2_mean;
    r.lr = tc.learning_rate;
    r.lambda_shrink = tc.lambda_shrink;
    r.scheme = std::string(to_string(model.scheme().name));
    r.width = cfg.d_model;
    loss_acc = 0.0;
    loss_count = 0;
    if (!std::isfinite(r.val_loss)) return false;
    result.records.push_back(r);
    if (sink) sink(r);
    last_good.clear();
    for (const auto& p : model.params()) last_good.push_back(p.value);
    return true;
  };
  auto diverge = [&](std::string why) {
    result.diverged = true;
    result.failure = std::move(why);
    for (std::size_t i = 0; i < last_good.size(); ++i) model.params()[i].value.flat() = last_good[i].flat();
  };

  if (!record(0)) {
    diverge("non-finite validation loss at initialization");
    return result;
  }
  for (std::int64_t step = 1; step <= steps; ++step) {
    const TokenBatch batch = stream.next();
    model.zero_grad();
    Graph<float> g;
    Var<float> loss = model.loss(g, batch);
    const double value = static_cast<double>(loss.value()[0]);
    if (!std::isfinite(value)) {
      diverge("non-finite training loss at step " + std::to_string(step));
      break;
    }
    g.backward(loss);
    try {
      adam_step<float>(tensors, lrs, adam);
    } catch (const NonFiniteError& e) {
      diverge(std::string(e.what()) + " at step " + std::to_string(step));
      break;
    }
    result.ledger.advance(per_batch);
    loss_acc += value;
    ++loss_count;
    if (step % interval == 0 || step == steps) {
      if (!record(step)) {
        diverge("non-finite validation loss at step " + std::to_string(step));
        break;
      }
    }
  }
  model.zero_grad();
  result.ledger.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace muwarm
