#include "muwarm/experiments.hpp"

#include "muwarm/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

namespace muwarm {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return Json::parse(in);
}

// Spec fields that determine the run's trajectory; the label is presentation only.
Json identity(const RunSpec& spec) {
  Json j = spec;
  j.erase("label");
  j["train"].erase("run_id");
  return j;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? kInf : acc / static_cast<double>(v.size());
}

}  // namespace

void to_json(Json& j, const RunSpec& spec) {
  j = Json{{"model", spec.model},
           {"scheme", spec.scheme},
           {"train", spec.train},
           {"warmstart", spec.warmstart ? Json(*spec.warmstart) : Json(nullptr)},
           {"parent", spec.parent},
           {"data_offset", spec.data_offset},
           {"label", spec.label}};
}

void from_json(const Json& j, RunSpec& spec) {
  spec.model = j.at("model").get<ModelConfig>();
  spec.scheme = j.at("scheme").get<Scheme>();
  spec.train = j.at("train").get<TrainConfig>();
  if (j.contains("warmstart") && !j.at("warmstart").is_null()) spec.warmstart = j.at("warmstart").get<WarmstartConfig>();
  else spec.warmstart.reset();
  spec.parent = j.value("parent", std::string());
  spec.data_offset = j.value("data_offset", std::int64_t{0});
  spec.label = j.value("label", std::string());
}

double RunOutcome::initial_val_loss() const { return records.empty() ? kInf : records.front().val_loss; }

double RunOutcome::final_val_loss() const { return diverged || records.empty() ? kInf : records.back().val_loss; }

double RunOutcome::final_smoothed_val_loss() const {
  if (diverged || records.empty()) return kInf;
  std::vector<double> steps, values;
  for (const auto& r : records) {
    steps.push_back(static_cast<double>(r.step));
    values.push_back(r.val_loss);
  }
  const auto s = gaussian_smooth(steps, values, default_smoothing_sigma(values.size()));
  return s.smoothed.back();
}

Checkpoint RunOutcome::checkpoint() const { return Checkpoint::load(dir / "checkpoint.bin"); }

Lab::Lab(fs::path out_dir, const Corpus& corpus, int jobs) : out_dir_(std::move(out_dir)), corpus_(&corpus), jobs_(jobs) {
  if (jobs_ < 1) throw ConfigError("lab: jobs must be at least 1");
  const auto& tok = corpus.tokens();
  std::string_view bytes(reinterpret_cast<const char*>(tok.data()), tok.size() * sizeof(std::uint16_t));
  corpus_hash_ = fnv1a(bytes) ^ static_cast<std::uint64_t>(corpus.vocab_size());
  fs::create_directories(out_dir_ / "runs");
}

std::string Lab::run_id(const RunSpec& spec) const {
  return hex(fnv1a(identity(spec).dump() + "|" + hex(corpus_hash_)));
}

bool Lab::completed(const RunSpec& spec) const { return fs::exists(out_dir_ / "runs" / run_id(spec) / "result.json"); }

RunOutcome load_run(const fs::path& dir) {
  const Json result = read_json(dir / "result.json");
  RunOutcome out;
  out.id = dir.filename().string();
  out.dir = dir;
  out.spec = read_json(dir / "spec.json").get<RunSpec>();
  out.ledger = result.at("ledger").get<RunLedger>();
  out.diverged = result.at("diverged").get<bool>();
  out.failure = result.value("failure", std::string());
  std::ifstream in(dir / "metrics.jsonl");
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.records.push_back(Json::parse(line).get<MetricsRecord>());
  return out;
}

RunOutcome Lab::load(const std::string& id) const { return load_run(out_dir_ / "runs" / id); }

RunOutcome Lab::run(const RunSpec& spec) {
  const std::string id = run_id(spec);
  const fs::path dir = out_dir_ / "runs" / id;
  if (fs::exists(dir / "result.json")) return load(id);
  fs::create_directories(dir);
  write_text(dir / "spec.json", Json(spec).dump(2) + "\n");

  TrainConfig tc = spec.train;
  tc.run_id = id;
  std::int64_t cursor = spec.data_offset;
  std::optional<Model<float>> model;
  if (spec.warmstart) {
    if (spec.parent.empty()) throw ConfigError("run: warmstart requires a parent run");
    const RunOutcome parent = load(spec.parent);
    if (parent.diverged) throw ConfigError("run: parent " + spec.parent + " diverged");
    auto grown = warmstart_model(parent.checkpoint(), spec.model, spec.scheme, *spec.warmstart);
    cursor = grown.data_cursor;
    model.emplace(std::move(grown.model));
  } else {
    model.emplace(Model<float>::build(spec.model, spec.scheme, tc.seed));
  }

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::trunc);
  TokenStream stream(*corpus_, tc.batch_size, spec.model.block_size, cursor);
  const TrainResult result = train(*model, stream, *corpus_, tc, [&](const MetricsRecord& r) {
    metrics << Json(r).dump() << '\n';
    metrics.flush();
  });
  metrics.close();
  Checkpoint::from_model(*model, result.ledger, tc.seed, Json(tc), Json{{"run_id", id}, {"parent", spec.parent}})
      .save(dir / "checkpoint.bin");
  write_text(dir / "result.json",
             Json{{"id", id}, {"ledger", result.ledger}, {"diverged", result.diverged}, {"failure", result.failure}}.dump(2) +
                 "\n");
  return load(id);
}

std::vector<RunOutcome> Lab::run_all(const std::vector<RunSpec>& specs) {
  // Identical specs share one execution.
  std::vector<std::size_t> first(specs.size());
  std::map<std::string, std::size_t> seen;
  std::vector<std::size_t> unique;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto [it, fresh] = seen.emplace(run_id(specs[i]), i);
    first[i] = it->second;
    if (fresh) unique.push_back(i);
  }
  std::vector<std::optional<RunOutcome>> done(specs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t k; (k = next++) < unique.size();) {
      try {
        done[unique[k]] = run(specs[unique[k]]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(jobs_, static_cast<int>(unique.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<RunOutcome> out;
  for (std::size_t i = 0; i < specs.size(); ++i) out.push_back(*done[first[i]]);
  return out;
}

void to_json(Json& j, const GridCell& c) {
  j = Json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"losses", c.losses}, {"mean", c.mean},
           {"run_ids", c.run_ids}};
}

void to_json(Json& j, const GridResult& g) {
  j = Json{{"cells", g.cells}, {"best", g.best}, {"boundary_warning", g.boundary_warning}};
}

double lr_grid_steps(double a, double b) { return std::abs(std::log2(a / b)); }

GridResult grid_search(Lab& lab, const GridSpec& spec) {
  if (spec.learning_rates.empty() || spec.batch_sizes.empty() || spec.seeds.empty())
    throw ConfigError("grid search: learning-rate, batch and seed grids must be non-empty");
  std::vector<RunSpec> specs;
  for (double lr : spec.learning_rates)
    for (int batch : spec.batch_sizes)
      for (std::uint64_t seed : spec.seeds) {
        RunSpec rs{spec.model, spec.scheme, spec.train, std::nullopt, "", 0, spec.label};
        rs.train.learning_rate = lr;
        rs.train.batch_size = batch;
        rs.train.seed = seed;
        specs.push_back(rs);
      }
  const auto outcomes = lab.run_all(specs);

  GridResult result;
  std::size_t k = 0;
  for (double lr : spec.learning_rates)
    for (int batch : spec.batch_sizes) {
      GridCell cell{lr, batch, {}, 0.0, {}};
      for (std::size_t s = 0; s < spec.seeds.size(); ++s, ++k) {
        const double loss = outcomes[k].final_smoothed_val_loss();
        cell.losses.push_back(std::isfinite(loss) ? loss : kInf);
        cell.run_ids.push_back(outcomes[k].id);
      }
      cell.mean = mean_of(cell.losses);
      result.cells.push_back(cell);
    }
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    const GridCell& c = result.cells[i];
    const GridCell& b = result.cells[result.best];
    const bool better = c.mean < b.mean ||
                        (c.mean == b.mean && (c.learning_rate < b.learning_rate ||
                                              (c.learning_rate == b.learning_rate && c.batch_size < b.batch_size)));
    if (better) result.best = i;
  }
  const auto [lo, hi] = std::minmax_element(spec.learning_rates.begin(), spec.learning_rates.end());
  const double best_lr = result.argmin().learning_rate;
  result.boundary_warning = spec.learning_rates.size() > 1 && (best_lr == *lo || best_lr == *hi);
  return result;
}

std::vector<RunOutcome> mutransfer(Lab& lab, const GridSpec& base, const GridResult& result, const ModelConfig& target) {
  if (!same_ladder(base.model, target)) throw ConfigError("mutransfer: target is not on the base model's width ladder");
  std::vector<RunSpec> specs;
  for (std::uint64_t seed : base.seeds) {
    RunSpec rs{target, base.scheme, base.train, std::nullopt, "", 0, "mutransfer"};
    rs.train.learning_rate = result.argmin().learning_rate;
    rs.train.batch_size = result.argmin().batch_size;
    rs.train.seed = seed;
    specs.push_back(rs);
  }
  return lab.run_all(specs);
}

std::vector<RunOutcome> warmstart_transfer(Lab& lab, const std::vector<RunOutcome>& parents, const ModelConfig& target,
                                           const WarmstartConfig& ws, const TrainConfig& train, const std::string& label) {
  std::vector<RunSpec> specs;
  for (const auto& parent : parents) {
    if (!same_ladder(parent.spec.model, target)) throw ConfigError("warmstart transfer: target is not on the base ladder");
    RunSpec rs{target, parent.spec.scheme, train, ws, parent.id, 0, label};
    rs.train.seed = parent.spec.train.seed;
    rs.train.lambda_shrink = ws.lambda_shrink;
    rs.warmstart->seed = parent.spec.train.seed;
    specs.push_back(rs);
  }
  return lab.run_all(specs);
}

CoordCheckResult cached_coord_check(Lab& lab, const std::string& name, const CoordCheckConfig& cfg,
                                    const std::optional<WarmstartConfig>& ws, const std::string& base_run) {
  Json key{{"model", cfg.base_cfg},         {"widths", cfg.widths},         {"scheme", cfg.scheme},
           {"learning_rate", cfg.learning_rate}, {"batch_size", cfg.batch_size}, {"steps", cfg.steps},
           {"seeds", cfg.seeds},            {"data_offset", cfg.data_offset}, {"base_run", base_run},
           {"corpus", hex(lab.corpus_hash())}};
  if (ws) key["warmstart"] = {{"lambda_shrink", ws->lambda_shrink}, {"perturb", ws->perturb}, {"seed", ws->seed}};
  const fs::path dir = lab.out_dir() / "coordcheck";
  const fs::path path = dir / (name + ".json");
  if (fs::exists(path)) {
    const Json stored = read_json(path);
    if (stored.contains("key") && stored.at("key") == key) return stored.get<CoordCheckResult>();
  }
  CoordCheckResult cc;
  if (ws) {
    if (base_run.empty()) throw ConfigError("coord check: warmstart needs a base run");
    const Checkpoint base = lab.load(base_run).checkpoint();
    cc = coord_check(lab.corpus(), cfg, CoordCheckInit::from_base(base, *ws));
  } else {
    cc = coord_check(lab.corpus(), cfg, CoordCheckInit::fresh());
  }
  fs::create_directories(dir);
  Json out = cc;
  out["key"] = key;
  write_text(path, out.dump(2) + "\n");
  return cc;
}

void to_json(Json& j, const AblationRow& row) {
  auto norm = [](const WeightNorm& n) { return Json{{"l1", n.l1_mean}, {"l2", n.l2_mean}}; };
  j = Json{{"lambda_shrink", row.lambda_shrink},
           {"initial_val_loss", row.initial_val_loss},
           {"final_val_loss", row.final_val_loss},
           {"weights_base_end", norm(row.base_end)},
           {"weights_post_warmstart", norm(row.post_warmstart)},
           {"weights_trained", norm(row.trained)},
           {"coord_max_slope", row.coord_max_slope},
           {"coord_pass", row.coord_pass},
           {"run_ids", row.run_ids}};
}

std::vector<AblationRow> shrink_ablation(Lab& lab, const std::vector<RunOutcome>& parents, const ModelConfig& target,
                                         const std::vector<double>& lambdas, const TrainConfig& train,
                                         const CoordCheckConfig& coord, double slope_bound) {
  if (parents.empty()) throw ConfigError("shrink ablation: no base runs");
  auto mean_norm = [](const std::vector<WeightNorm>& v) {
    WeightNorm m;
    for (const auto& n : v) {
      m.l1_mean += n.l1_mean / static_cast<double>(v.size());
      m.l2_mean += n.l2_mean / static_cast<double>(v.size());
    }
    return m;
  };
  auto record_norm = [](const MetricsRecord& r) { return WeightNorm{r.weight_l1, r.weight_l2}; };

  std::vector<AblationRow> rows;
  for (double lambda : lambdas) {
    WarmstartConfig ws{lambda, true, 0};
    const auto runs = warmstart_transfer(lab, parents, target, ws, train, "ablate");
    AblationRow row;
    row.lambda_shrink = lambda;
    std::vector<double> init, fin;
    std::vector<WeightNorm> base_end, post, trained;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      init.push_back(runs[i].initial_val_loss());
      fin.push_back(runs[i].final_smoothed_val_loss());
      base_end.push_back(record_norm(parents[i].records.back()));
      if (!runs[i].records.empty()) {
        post.push_back(record_norm(runs[i].records.front()));
        trained.push_back(record_norm(runs[i].records.back()));
      }
      row.run_ids.push_back(runs[i].id);
    }
    row.initial_val_loss = mean_of(init);
    row.final_val_loss = mean_of(fin);
    row.base_end = mean_norm(base_end);
    row.post_warmstart = mean_norm(post);
    row.trained = mean_norm(trained);

    char name[64];
    std::snprintf(name, sizeof name, "warmstart_lambda_%.2f", lambda);
    const CoordCheckResult cc = cached_coord_check(lab, name, coord, ws, parents.front().id);
    row.coord_max_slope = cc.max_abs_slope(1);
    row.coord_pass = cc.within(slope_bound, 1);
    rows.push_back(row);
  }
  return rows;
}

std::vector<RunOutcome> successive_warmstart(Lab& lab, const RunOutcome& base, const std::vector<ModelConfig>& stages,
                                             const std::vector<std::int64_t>& budgets, const WarmstartConfig& ws,
                                             const TrainConfig& train, const std::string& label) {
  if (stages.size() != budgets.size()) throw ConfigError("successive warmstart: one budget per stage required");
  std::vector<RunOutcome> out;
  std::string parent = base.id;
  int prev_width = base.spec.model.d_model;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    if (stages[k].d_model <= prev_width) throw ConfigError("successive warmstart: stage widths must strictly increase");
    prev_width = stages[k].d_model;
    TrainConfig tc = train;
    tc.token_budget = budgets[k];
    RunSpec rs{stages[k], base.spec.scheme, tc, ws, parent, 0, label};
    rs.train.seed = base.spec.train.seed;
    rs.train.lambda_shrink = ws.lambda_shrink;
    rs.warmstart->seed = base.spec.train.seed;
    out.push_back(lab.run(rs));
    if (out.back().diverged) throw std::runtime_error("successive warmstart: stage " + std::to_string(k + 1) + " diverged");
    parent = out.back().id;
  }
  return out;
}

std::int64_t tokens_for_flops(std::int64_t total_flops, const ModelConfig& cfg, std::int64_t tokens_per_batch) {
  if (total_flops <= 0) return 0;
  const std::int64_t per_token = flops(param_count(cfg), 1);
  return total_flops / per_token / tokens_per_batch * tokens_per_batch;
}

}  // namespace muwarm
