#include "muwarm/coordcheck.hpp"

#include "muwarm/adam.hpp"
#include "muwarm/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace muwarm {

double CoordCheckResult::max_abs_slope(int from_step) const {
  double worst = 0.0;
  for (const auto& [layer, per_step] : slopes)
    for (int s = from_step; s <= steps && s < static_cast<int>(per_step.size()); ++s)
      worst = std::max(worst, std::isfinite(per_step[static_cast<std::size_t>(s)]) ? std::abs(per_step[static_cast<std::size_t>(s)])
                                                                                  : INFINITY);
  return worst;
}

bool CoordCheckResult::within(double bound, int from_step) const { return !failed() && max_abs_slope(from_step) <= bound; }

void to_json(Json& j, const CoordCheckResult& r) {
  j = Json{{"widths", r.widths}, {"steps", r.steps},       {"layers", r.layers},
           {"norms", r.norms},   {"slopes", r.slopes},     {"failures", r.failures}};
}

namespace {

// Non-finite values serialize as null.
double number_or_nan(const Json& v) { return v.is_null() ? NAN : v.get<double>(); }

}  // namespace

void from_json(const Json& j, CoordCheckResult& r) {
  r.widths = j.at("widths").get<std::vector<int>>();
  r.steps = j.at("steps").get<int>();
  r.layers = j.at("layers").get<std::vector<std::string>>();
  r.norms.clear();
  for (const auto& [layer, per_step] : j.at("norms").items()) {
    auto& out = r.norms[layer];
    for (const auto& per_width : per_step) {
      out.emplace_back();
      for (const auto& v : per_width) out.back().push_back(number_or_nan(v));
    }
  }
  r.slopes.clear();
  for (const auto& [layer, per_step] : j.at("slopes").items())
    for (const auto& v : per_step) r.slopes[layer].push_back(number_or_nan(v));
  r.failures = j.at("failures").get<std::vector<std::string>>();
}

CoordCheckResult coord_check(const Corpus& corpus, const CoordCheckConfig& cfg, const CoordCheckInit& init) {
  if (cfg.widths.size() < 3) throw ConfigError("coord check: at least three widths are required");
  if (cfg.steps < 0) throw ConfigError("coord check: steps must be non-negative");
  if (cfg.seeds.empty()) throw ConfigError("coord check: at least one seed is required");
  if (init.warmstart && !init.base) throw ConfigError("coord check: warmstart requires a base checkpoint");
  const ScaleLadder ladder = ScaleLadder::from_widths(cfg.base_cfg, cfg.widths);

  std::vector<TokenBatch> batches;
  const std::int64_t per_batch = static_cast<std::int64_t>(cfg.batch_size) * cfg.base_cfg.block_size;
  for (int t = 0; t <= cfg.steps; ++t)
    batches.push_back(make_batch(corpus, cfg.data_offset + t * per_batch, cfg.batch_size, cfg.base_cfg.block_size));

  CoordCheckResult result;
  result.widths = cfg.widths;
  result.steps = cfg.steps;
  const std::size_t n_steps = static_cast<std::size_t>(cfg.steps) + 1;
  // sums[layer][step][width]
  std::map<std::string, std::vector<std::vector<double>>> sums;

  for (std::size_t wi = 0; wi < ladder.rungs.size(); ++wi) {
    const ModelConfig& rung = ladder.rungs[wi];
    for (std::uint64_t seed : cfg.seeds) {
      Model<float> model = [&] {
        if (!init.warmstart) return Model<float>::build(rung, cfg.scheme, seed);
        WarmstartConfig ws = *init.warmstart;
        ws.seed = seed;
        return warmstart_model(*init.base, rung, cfg.scheme, ws).model;
      }();
      const auto lrs = effective_learning_rates(model.params(), model.scheme(), model.width_multiplier(), cfg.learning_rate);
      std::vector<Tensor<float>*> tensors;
      for (auto& p : model.params()) tensors.push_back(&p.value);
      AdamState<float> adam;
      for (std::size_t t = 0; t < n_steps; ++t) {
        std::vector<ActivationTap<float>> taps;
        model.zero_grad();
        Graph<float> g(t + 1 < n_steps);
        Var<float> loss = model.loss(g, batches[t], &taps);
        for (const auto& [layer, value] : activation_l1(taps)) {
          auto& cell = sums[layer];
          if (cell.empty()) cell.assign(n_steps, std::vector<double>(ladder.rungs.size(), 0.0));
          if (!std::isfinite(value))
            result.failures.push_back("non-finite activation in " + layer + " at width " + std::to_string(rung.d_model) +
                                      ", step " + std::to_string(t));
          cell[t][wi] += value / static_cast<double>(cfg.seeds.size());
        }
        if (t + 1 == n_steps) break;
        g.backward(loss);
        try {
          adam_step<float>(tensors, lrs, adam);
        } catch (const NonFiniteError& e) {
          result.failures.push_back(std::string(e.what()) + " at width " + std::to_string(rung.d_model));
          break;
        }
      }
    }
  }

  std::vector<double> log_w;
  for (int w : cfg.widths) log_w.push_back(std::log(static_cast<double>(w)));
  for (const auto& [layer, per_step] : sums) {
    result.layers.push_back(layer);
    result.norms[layer] = per_step;
    auto& slopes = result.slopes[layer];
    for (const auto& per_width : per_step) {
      std::vector<double> log_n;
      bool finite = true;
      for (double v : per_width) {
        finite = finite && std::isfinite(v) && v > 0.0;
        log_n.push_back(v > 0.0 ? std::log(v) : 0.0);
      }
      // All-zero norms (zero readout at init) carry no width dependence.
      const bool all_zero = std::all_of(per_width.begin(), per_width.end(), [](double v) { return v == 0.0; });
      slopes.push_back(all_zero ? 0.0 : finite ? fit_slope(log_w, log_n) : NAN);
    }
  }
  return result;
}

}  // namespace muwarm
