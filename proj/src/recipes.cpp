#include "muwarm/recipes.hpp"

#include "muwarm/ledger.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace muwarm {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? NAN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ModelConfig target_model(const ExperimentSpec& spec) { return spec.model.with_width(spec.target_width); }

// Target-width runs train on the base run's token budget.
TrainConfig target_train(const ExperimentSpec& spec) {
  TrainConfig tc = spec.train;
  tc.token_budget = planned_tokens(spec.model, spec.train);
  return tc;
}

GridSpec grid_spec(const ExperimentSpec& spec, const Scheme& scheme, const ModelConfig& model, const TrainConfig& train) {
  return GridSpec{model,         scheme,          train, spec.lr_grid, spec.batch_grid, spec.seeds,
                  "grid-" + std::string(to_string(scheme.name)) + "-w" + std::to_string(model.d_model)};
}

struct BaseGrid {
  GridSpec spec;
  GridResult result;
  std::vector<RunOutcome> winners;  // argmin cell, one run per seed
};

BaseGrid mup_base_grid(Lab& lab, const ExperimentSpec& spec) {
  BaseGrid g{grid_spec(spec, spec.scheme, spec.model, spec.train), {}, {}};
  g.result = grid_search(lab, g.spec);
  for (const auto& id : g.result.argmin().run_ids) g.winners.push_back(lab.load(id));
  return g;
}

TrainConfig winner_train(const ExperimentSpec& spec, const BaseGrid& g) {
  TrainConfig tc = target_train(spec);
  tc.learning_rate = g.result.argmin().learning_rate;
  tc.batch_size = g.result.argmin().batch_size;
  return tc;
}

// Fresh muP runs at the target width, each on the data its paired warmstart run sees.
std::vector<RunOutcome> vanilla_runs(Lab& lab, const ExperimentSpec& spec, const std::vector<RunOutcome>& parents,
                                     const TrainConfig& train) {
  std::vector<RunSpec> specs;
  for (const auto& p : parents) {
    RunSpec rs{target_model(spec), spec.scheme, train, std::nullopt, "", p.ledger.data_end, "vanilla"};
    rs.train.seed = p.spec.train.seed;
    specs.push_back(rs);
  }
  return lab.run_all(specs);
}

CoordCheckConfig coord_config(const ExperimentSpec& spec, const BaseGrid& g, const Scheme& scheme) {
  CoordCheckConfig cc;
  cc.base_cfg = spec.model;
  cc.widths = spec.coord_widths;
  cc.scheme = scheme;
  cc.learning_rate = g.result.argmin().learning_rate;
  cc.batch_size = spec.coord_batch;
  cc.steps = spec.coord_steps;
  cc.seeds = spec.seeds;
  cc.data_offset = g.winners.front().ledger.data_end;
  return cc;
}

std::string lambda_name(double lambda) {
  char name[64];
  std::snprintf(name, sizeof name, "warmstart_lambda_%.2f", lambda);
  return name;
}

bool records_obey_6nd(const RunOutcome& run) {
  for (const auto& r : run.records)
    if (r.flops != flops(run.ledger.n_params, r.tokens)) return false;
  return run.ledger.flops == flops(run.ledger.n_params, run.ledger.tokens);
}

Json per_seed(const std::vector<RunOutcome>& runs) {
  Json out = Json::array();
  for (const auto& r : runs)
    out.push_back({{"id", r.id},
                   {"seed", r.spec.train.seed},
                   {"initial_val_loss", r.initial_val_loss()},
                   {"final_val_loss", r.final_smoothed_val_loss()},
                   {"tokens", r.ledger.tokens},
                   {"flops", r.ledger.flops},
                   {"data_start", r.ledger.data_start},
                   {"data_end", r.ledger.data_end},
                   {"diverged", r.diverged}});
  return out;
}

}  // namespace

void ExperimentSpec::validate() const {
  model.validate();
  scheme.validate();
  sp_scheme.validate();
  warmstart.validate();
  if (seeds.empty()) throw ConfigError("experiment: at least one seed is required");
  if (lr_grid.empty() || batch_grid.empty()) throw ConfigError("experiment: empty learning-rate or batch grid");
  for (double lr : lr_grid)
    if (!(lr > 0.0)) throw ConfigError("experiment: learning rates must be positive");
  if (target_width <= model.d_model) throw ConfigError("experiment: target width must exceed the base width");
  model.with_width(target_width);
  int prev = model.d_model;
  for (int w : stages) {
    if (w <= prev) throw ConfigError("experiment: stage widths must strictly increase from the base width");
    model.with_width(w);
    prev = w;
  }
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("experiment: lambdas must lie in [0, 1]");
  for (double l : coord_lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("experiment: lambdas must lie in [0, 1]");
  if (coord_widths.size() < 3) throw ConfigError("experiment: coordinate check needs at least three widths");
  if (jobs < 1) throw ConfigError("experiment: jobs must be at least 1");
  if (corpus_path.empty() && synthetic_tokens <= 0) throw ConfigError("experiment: synthetic corpus size must be positive");
}

void to_json(Json& j, const ExperimentSpec& s) {
  j = Json{{"recipe", s.recipe},
           {"model", s.model},
           {"scheme", s.scheme},
           {"sp_scheme", s.sp_scheme},
           {"train", s.train},
           {"warmstart", s.warmstart},
           {"seeds", s.seeds},
           {"lr_grid", s.lr_grid},
           {"batch_grid", s.batch_grid},
           {"target_width", s.target_width},
           {"stages", s.stages},
           {"lambdas", s.lambdas},
           {"coord_lambdas", s.coord_lambdas},
           {"coord_widths", s.coord_widths},
           {"coord_steps", s.coord_steps},
           {"coord_batch", s.coord_batch},
           {"slope_pass", s.slope_pass},
           {"slope_fail", s.slope_fail},
           {"transfer_tolerance_steps", s.transfer_tolerance_steps},
           {"warmstart_margin", s.warmstart_margin},
           {"uniform_loss_tolerance", s.uniform_loss_tolerance},
           {"corpus_path", s.corpus_path},
           {"synthetic_tokens", s.synthetic_tokens},
           {"corpus_seed", s.corpus_seed},
           {"jobs", s.jobs}};
}

void from_json(const Json& j, ExperimentSpec& s) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  // Nested objects patch the defaults, so partial configs are allowed.
  Json merged = ExperimentSpec{};
  for (const auto& [key, _] : j.items())
    if (!merged.contains(key))
      throw ConfigError("experiment config: unknown key '" + key + "'");
  merged.merge_patch(j);
  if (j.contains("model") && j["model"].contains("d_model") && !j["model"].contains("n_heads"))
    merged["model"].erase("n_heads");
  s.recipe = merged.at("recipe").get<std::string>();
  s.model = merged.at("model").get<ModelConfig>();
  s.scheme = merged.at("scheme").get<Scheme>();
  s.sp_scheme = merged.at("sp_scheme").get<Scheme>();
  s.train = merged.at("train").get<TrainConfig>();
  s.warmstart = merged.at("warmstart").get<WarmstartConfig>();
  s.seeds = merged.at("seeds").get<std::vector<std::uint64_t>>();
  s.lr_grid = merged.at("lr_grid").get<std::vector<double>>();
  s.batch_grid = merged.at("batch_grid").get<std::vector<int>>();
  s.target_width = merged.at("target_width").get<int>();
  s.stages = merged.at("stages").get<std::vector<int>>();
  s.lambdas = merged.at("lambdas").get<std::vector<double>>();
  s.coord_lambdas = merged.at("coord_lambdas").get<std::vector<double>>();
  s.coord_widths = merged.at("coord_widths").get<std::vector<int>>();
  s.coord_steps = merged.at("coord_steps").get<int>();
  s.coord_batch = merged.at("coord_batch").get<int>();
  s.slope_pass = merged.at("slope_pass").get<double>();
  s.slope_fail = merged.at("slope_fail").get<double>();
  s.transfer_tolerance_steps = merged.at("transfer_tolerance_steps").get<double>();
  s.warmstart_margin = merged.at("warmstart_margin").get<double>();
  s.uniform_loss_tolerance = merged.at("uniform_loss_tolerance").get<double>();
  s.corpus_path = merged.at("corpus_path").get<std::string>();
  s.synthetic_tokens = merged.at("synthetic_tokens").get<std::int64_t>();
  s.corpus_seed = merged.at("corpus_seed").get<std::uint64_t>();
  s.jobs = merged.at("jobs").get<int>();
}

Corpus corpus_for(const ExperimentSpec& spec) {
  Corpus corpus = spec.corpus_path.empty() ? synthetic_corpus(spec.corpus_seed, spec.synthetic_tokens)
                                           : load_corpus(spec.corpus_path);
  if (corpus.vocab_size() > spec.model.vocab_size)
    throw ConfigError("corpus vocabulary (" + std::to_string(corpus.vocab_size()) + ") exceeds model vocab_size (" +
                      std::to_string(spec.model.vocab_size) + ")");
  return corpus;
}

bool RecipeReport::ok() const {
  for (const auto& a : assertions)
    if (!a.pass) return false;
  return true;
}

void RecipeReport::check(std::string name, bool pass, std::string detail) {
  assertions.push_back({std::move(name), pass, std::move(detail)});
}

void to_json(Json& j, const Assertion& a) { j = Json{{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}}; }

void to_json(Json& j, const RecipeReport& r) {
  j = Json{{"recipe", r.recipe}, {"ok", r.ok()}, {"assertions", r.assertions}, {"data", r.data}};
}

RecipeReport recipe_train(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"train", {}, Json::object()};
  std::vector<RunSpec> specs;
  for (auto seed : spec.seeds) {
    RunSpec rs{spec.model, spec.scheme, spec.train, std::nullopt, "", 0, "train"};
    rs.train.seed = seed;
    specs.push_back(rs);
  }
  const auto runs = lab.run_all(specs);
  const std::int64_t budget = planned_tokens(spec.model, spec.train);
  bool finite = true, ledger = true, spent = true;
  for (const auto& r : runs) {
    finite = finite && !r.diverged;
    ledger = ledger && records_obey_6nd(r);
    spent = spent && (r.diverged || r.ledger.tokens == budget);
  }
  rep.check("runs finished without divergence", finite, std::to_string(runs.size()) + " runs");
  rep.check("flops = 6ND at every record", ledger, "");
  rep.check("token budget consumed exactly", spent, "budget " + std::to_string(budget));
  rep.data["runs"] = per_seed(runs);
  return rep;
}

RecipeReport recipe_grid(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"grid", {}, Json::object()};
  const BaseGrid g = mup_base_grid(lab, spec);
  const auto& best = g.result.argmin();
  rep.check("grid argmin is finite", std::isfinite(best.mean),
            "lr " + fmt("%g", best.learning_rate) + ", mean loss " + fmt("%.4f", best.mean));
  rep.data["grid"] = g.result;
  return rep;
}

RecipeReport recipe_transfer(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"transfer", {}, Json::object()};
  const ModelConfig target = target_model(spec);
  const TrainConfig ttrain = target_train(spec);

  const BaseGrid mup = mup_base_grid(lab, spec);
  const GridResult mup_target = grid_search(lab, grid_spec(spec, spec.scheme, target, ttrain));
  GridSpec transfer_spec = mup.spec;
  transfer_spec.train = ttrain;
  const auto transferred = mutransfer(lab, transfer_spec, mup.result, target);

  const GridResult sp_base = grid_search(lab, grid_spec(spec, spec.sp_scheme, spec.model, spec.train));
  const GridResult sp_target = grid_search(lab, grid_spec(spec, spec.sp_scheme, target, ttrain));

  const double mup_steps = lr_grid_steps(mup.result.argmin().learning_rate, mup_target.argmin().learning_rate);
  const double sp_steps = lr_grid_steps(sp_base.argmin().learning_rate, sp_target.argmin().learning_rate);
  std::vector<double> transferred_losses;
  for (const auto& r : transferred) transferred_losses.push_back(r.final_smoothed_val_loss());

  rep.check("muP argmin transfers within tolerance", mup_steps <= spec.transfer_tolerance_steps,
            "base lr " + fmt("%g", mup.result.argmin().learning_rate) + ", target lr " +
                fmt("%g", mup_target.argmin().learning_rate) + ", " + fmt("%g", mup_steps) + " grid steps");
  rep.check("SP argmin shifts by at least one grid step", sp_steps >= 1.0,
            "base lr " + fmt("%g", sp_base.argmin().learning_rate) + ", target lr " +
                fmt("%g", sp_target.argmin().learning_rate) + ", " + fmt("%g", sp_steps) + " grid steps");
  rep.data["mup_base"] = mup.result;
  rep.data["mup_target"] = mup_target;
  rep.data["sp_base"] = sp_base;
  rep.data["sp_target"] = sp_target;
  rep.data["mup_steps"] = mup_steps;
  rep.data["sp_steps"] = sp_steps;
  rep.data["transferred_mean_loss"] = mean(transferred_losses);
  if (mup.result.boundary_warning || mup_target.boundary_warning)
    rep.data["warning"] = "muP argmin on the edge of the learning-rate grid";
  return rep;
}

RecipeReport recipe_warmstart(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"warmstart", {}, Json::object()};
  const BaseGrid g = mup_base_grid(lab, spec);
  const TrainConfig train = winner_train(spec, g);
  const auto ws = warmstart_transfer(lab, g.winners, target_model(spec), spec.warmstart, train);
  const auto vanilla = vanilla_runs(lab, spec, g.winners, train);

  std::vector<double> ws_init, ws_final, va_init, va_final;
  for (const auto& r : ws) ws_init.push_back(r.initial_val_loss()), ws_final.push_back(r.final_smoothed_val_loss());
  for (const auto& r : vanilla) va_init.push_back(r.initial_val_loss()), va_final.push_back(r.final_smoothed_val_loss());

  if (spec.scheme.zero_readout) {
    const double ln_v = std::log(static_cast<double>(spec.model.vocab_size));
    double worst = 0.0;
    for (double v : va_init) worst = std::max(worst, std::abs(v - ln_v));
    rep.check("vanilla initial loss is ln V", worst <= spec.uniform_loss_tolerance,
              "max |init - ln V| " + fmt("%.3g", worst));
  }
  rep.check("warmstart initial loss below vanilla", mean(ws_init) < mean(va_init),
            fmt("%.4f", mean(ws_init)) + " vs " + fmt("%.4f", mean(va_init)));
  rep.check("warmstart final loss within margin of vanilla", mean(ws_final) <= mean(va_final) + spec.warmstart_margin,
            fmt("%.4f", mean(ws_final)) + " vs " + fmt("%.4f", mean(va_final)) + " + " +
                fmt("%g", spec.warmstart_margin));
  rep.data["learning_rate"] = train.learning_rate;
  rep.data["warmstart"] = per_seed(ws);
  rep.data["vanilla"] = per_seed(vanilla);
  return rep;
}

RecipeReport recipe_ablate(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"ablate", {}, Json::object()};
  const BaseGrid g = mup_base_grid(lab, spec);
  const TrainConfig train = winner_train(spec, g);
  const auto rows = shrink_ablation(lab, g.winners, target_model(spec), spec.lambdas, train,
                                    coord_config(spec, g, spec.scheme), spec.slope_pass);
  const auto vanilla = vanilla_runs(lab, spec, g.winners, train);

  for (const auto& row : rows) {
    if (row.lambda_shrink == 0.4)
      rep.check("lambda 0.40 passes the coordinate check", row.coord_pass, "max slope " + fmt("%.3f", row.coord_max_slope));
    if (row.lambda_shrink == 1.0)
      rep.check("lambda 1.00 fails the coordinate check", !row.coord_pass,
                "max slope " + fmt("%.3f", row.coord_max_slope));
    if (row.lambda_shrink == 0.0) {
      bool same = row.run_ids.size() == vanilla.size();
      for (std::size_t i = 0; same && i < vanilla.size(); ++i) {
        const auto run = lab.load(row.run_ids[i]);
        same = run.records.size() == vanilla[i].records.size();
        for (std::size_t k = 0; same && k < run.records.size(); ++k)
          same = run.records[k].val_loss == vanilla[i].records[k].val_loss &&
                 run.records[k].train_loss == vanilla[i].records[k].train_loss;
      }
      rep.check("lambda 0 reproduces vanilla muP", same, "");
    }
  }
  Json ranked = rows;
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].final_val_loss < rows[b].final_val_loss; });
  rep.data["rows"] = ranked;
  rep.data["rank_by_final_loss"] = Json::array();
  for (auto i : order) rep.data["rank_by_final_loss"].push_back(rows[i].lambda_shrink);
  rep.data["vanilla"] = per_seed(vanilla);
  return rep;
}

RecipeReport recipe_succ(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"succ", {}, Json::object()};
  if (spec.stages.empty()) throw ConfigError("succ: no stages");
  const BaseGrid g = mup_base_grid(lab, spec);
  const TrainConfig train = winner_train(spec, g);
  const ModelConfig target = target_model(spec);
  const std::int64_t tpb = static_cast<std::int64_t>(train.batch_size) * spec.model.block_size;
  const std::int64_t total = flops(param_count(target), train.token_budget);
  std::vector<ModelConfig> stage_cfgs;
  for (int w : spec.stages) stage_cfgs.push_back(spec.model.with_width(w));
  const std::int64_t max_batch_flops = flops(param_count(stage_cfgs.back()), tpb) * static_cast<std::int64_t>(stage_cfgs.size());

  bool ordered = true, spikes = true, matched = true, contiguous = true;
  std::string spike_detail, token_detail;
  Json seeds = Json::array();
  const auto vanilla = vanilla_runs(lab, spec, g.winners, train);
  for (std::size_t i = 0; i < g.winners.size(); ++i) {
    const RunOutcome& base = g.winners[i];
    const std::int64_t remaining = total - base.ledger.flops;

    TrainConfig single = train;
    single.token_budget = tokens_for_flops(remaining, target, tpb);
    const RunOutcome ws = warmstart_transfer(lab, {base}, target, spec.warmstart, single, "succ-single").front();

    std::vector<std::int64_t> budgets;
    for (const auto& cfg : stage_cfgs)
      budgets.push_back(tokens_for_flops(remaining / static_cast<std::int64_t>(stage_cfgs.size()), cfg, tpb));
    const auto chain = successive_warmstart(lab, base, stage_cfgs, budgets, spec.warmstart, train);

    std::int64_t chain_tokens = base.ledger.tokens, chain_flops = base.ledger.flops;
    for (const auto& r : chain) chain_tokens += r.ledger.tokens, chain_flops += r.ledger.flops;
    const std::int64_t single_tokens = base.ledger.tokens + ws.ledger.tokens;
    const std::int64_t single_flops = base.ledger.flops + ws.ledger.flops;
    const std::int64_t vanilla_tokens = vanilla[i].ledger.tokens;

    ordered = ordered && chain_tokens > single_tokens && single_tokens > vanilla_tokens;
    for (std::int64_t f : {chain_flops, single_flops, vanilla[i].ledger.flops})
      matched = matched && f <= total && total - f <= max_batch_flops;

    const RunOutcome* prev = &base;
    Json boundaries = Json::array();
    for (const auto& r : chain) {
      const double before = prev->final_smoothed_val_loss(), after = r.initial_val_loss();
      spikes = spikes && after > before;
      contiguous = contiguous && r.ledger.data_start == prev->ledger.data_end;
      boundaries.push_back({{"width", r.spec.model.d_model}, {"pre_boundary", before}, {"initial", after}});
      prev = &r;
    }
    if (i == 0) {
      token_detail = "seed " + std::to_string(base.spec.train.seed) + ": " + std::to_string(chain_tokens) + " > " +
                     std::to_string(single_tokens) + " > " + std::to_string(vanilla_tokens);
      spike_detail = boundaries.dump();
    }
    seeds.push_back({{"seed", base.spec.train.seed},
                     {"total_flops", total},
                     {"tokens", {{"successive", chain_tokens}, {"single", single_tokens}, {"vanilla", vanilla_tokens}}},
                     {"flops", {{"successive", chain_flops}, {"single", single_flops}, {"vanilla", vanilla[i].ledger.flops}}},
                     {"final_val_loss",
                      {{"successive", chain.back().final_smoothed_val_loss()},
                       {"single", ws.final_smoothed_val_loss()},
                       {"vanilla", vanilla[i].final_smoothed_val_loss()}}},
                     {"boundaries", boundaries},
                     {"chain", per_seed(chain)},
                     {"single_run", ws.id}});
  }
  rep.check("arms spend equal total FLOPs", matched, "budget " + std::to_string(total) + " within one batch per stage");
  rep.check("tokens(successive) > tokens(single warmstart) > tokens(vanilla)", ordered, token_detail);
  rep.check("loss spike at every stage boundary", spikes, spike_detail);
  rep.check("stream offsets continue across the chain", contiguous, "");
  rep.data["seeds"] = seeds;
  return rep;
}

RecipeReport recipe_coordcheck(Lab& lab, const ExperimentSpec& spec) {
  RecipeReport rep{"coordcheck", {}, Json::object()};
  const BaseGrid g = mup_base_grid(lab, spec);
  const auto mup = cached_coord_check(lab, "mup", coord_config(spec, g, spec.scheme));
  const auto sp = cached_coord_check(lab, "sp", coord_config(spec, g, spec.sp_scheme));

  rep.check("muP slopes within bound", mup.within(spec.slope_pass),
            "max |slope| " + fmt("%.3f", mup.max_abs_slope(1)) + " <= " + fmt("%g", spec.slope_pass));
  double sp_logits = -INFINITY;
  const auto& sp_slopes = sp.slopes.at("logits");
  for (std::size_t t = 1; t < sp_slopes.size(); ++t)
    if (std::isfinite(sp_slopes[t])) sp_logits = std::max(sp_logits, sp_slopes[t]);
  rep.check("SP logits slope reaches fail bound", sp_logits >= spec.slope_fail,
            "max logits slope " + fmt("%.3f", sp_logits) + " >= " + fmt("%g", spec.slope_fail));
  rep.data["mup_max_slope"] = mup.max_abs_slope(1);
  rep.data["sp_max_logits_slope"] = sp_logits;

  Json lambdas = Json::array();
  for (double lambda : spec.coord_lambdas) {
    const WarmstartConfig ws{lambda, true, 0};
    const auto cc = cached_coord_check(lab, lambda_name(lambda), coord_config(spec, g, spec.scheme), ws,
                                       g.winners.front().id);
    const std::string detail = "max |slope| " + fmt("%.3f", cc.max_abs_slope(1));
    if (lambda < 1.0)
      rep.check("warmstart lambda " + fmt("%.2f", lambda) + " slopes within bound", cc.within(spec.slope_pass), detail);
    else
      rep.check("warmstart lambda " + fmt("%.2f", lambda) + " violates bound", !cc.within(spec.slope_pass), detail);
    lambdas.push_back({{"lambda", lambda}, {"max_abs_slope", cc.max_abs_slope(1)}, {"slopes", cc.slopes}});
  }
  rep.data["warmstart"] = lambdas;
  return rep;
}

RecipeReport recipe_report(Lab& lab, const ExperimentSpec&) {
  RecipeReport rep{"report", {}, Json::object()};
  const fs::path dir = lab.out_dir() / "report";
  write_report(lab.out_dir(), dir);
  rep.check("summary written", fs::exists(dir / "summary.md"), (dir / "summary.md").string());
  return rep;
}

RecipeReport run_recipe(Lab& lab, const ExperimentSpec& spec) {
  spec.validate();
  RecipeReport rep;
  if (spec.recipe == "train") rep = recipe_train(lab, spec);
  else if (spec.recipe == "grid") rep = recipe_grid(lab, spec);
  else if (spec.recipe == "transfer") rep = recipe_transfer(lab, spec);
  else if (spec.recipe == "warmstart") rep = recipe_warmstart(lab, spec);
  else if (spec.recipe == "ablate") rep = recipe_ablate(lab, spec);
  else if (spec.recipe == "succ") rep = recipe_succ(lab, spec);
  else if (spec.recipe == "coordcheck") rep = recipe_coordcheck(lab, spec);
  else if (spec.recipe == "report") rep = recipe_report(lab, spec);
  else throw ConfigError("unknown recipe '" + spec.recipe + "'");
  fs::create_directories(lab.out_dir());
  Json out = rep;
  out["spec"] = spec;
  std::ofstream(lab.out_dir() / (spec.recipe + ".json"), std::ios::trunc) << out.dump(2) << "\n";
  return rep;
}

}  // namespace muwarm
