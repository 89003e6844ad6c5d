#include "muwarm/recipes.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace muwarm;
namespace fs = std::filesystem;

namespace {

ModelConfig small(int d = 16) {
  ModelConfig cfg{2, 16, 2, 8, 256, 16};
  return cfg.with_width(d);
}

const Corpus& corpus() {
  static const Corpus c = synthetic_corpus(5, 200000);
  return c;
}

TrainConfig quick(std::int64_t steps = 20) {
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 4;
  tc.token_budget = steps * 4 * 16;
  tc.eval_batches = 2;
  tc.eval_interval = 5;
  return tc;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "muwarm_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_trajectory(const RunOutcome& a, const RunOutcome& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    if (x.val_loss != y.val_loss || x.train_loss != y.train_loss || x.weight_l1 != y.weight_l1 ||
        x.tokens != y.tokens || x.flops != y.flops)
      return false;
  }
  return a.ledger.data_start == b.ledger.data_start && a.ledger.data_end == b.ledger.data_end;
}

RunSpec base_spec(std::uint64_t seed = 0) {
  RunSpec rs{small(), Scheme::mup(16, 0.02, true), quick(), std::nullopt, "", 0, "base"};
  rs.train.seed = seed;
  return rs;
}

}  // namespace

TEST_CASE("lab runs are idempotent") {
  Lab lab(fresh_dir("idempotent"), corpus());
  const RunSpec spec = base_spec();
  CHECK_FALSE(lab.completed(spec));
  const RunOutcome first = lab.run(spec);
  CHECK(lab.completed(spec));
  const auto stamp = fs::last_write_time(first.dir / "metrics.jsonl");
  const RunOutcome again = lab.run(spec);
  CHECK(again.id == first.id);
  CHECK(fs::last_write_time(first.dir / "metrics.jsonl") == stamp);
  CHECK(same_trajectory(first, again));

  RunSpec relabeled = spec;
  relabeled.label = "other";
  CHECK(lab.run_id(relabeled) == first.id);
  RunSpec reseeded = spec;
  reseeded.train.seed = 1;
  CHECK(lab.run_id(reseeded) != first.id);

  // An interrupted run (no result.json) is redone from scratch.
  fs::remove(first.dir / "result.json");
  CHECK_FALSE(lab.completed(spec));
  CHECK(same_trajectory(lab.run(spec), first));
}

TEST_CASE("run_all keeps order and deduplicates") {
  Lab lab(fresh_dir("run_all"), corpus(), 3);
  const auto runs = lab.run_all({base_spec(2), base_spec(1), base_spec(2)});
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].spec.train.seed == 2);
  CHECK(runs[1].spec.train.seed == 1);
  CHECK(runs[0].id == runs[2].id);
}

TEST_CASE("grid search") {
  Lab lab(fresh_dir("grid"), corpus());
  SUBCASE("single cell") {
    GridSpec g{small(), Scheme::mup(16, 0.02, true), quick(), {0.01}, {4}, {0}, "grid"};
    const auto result = grid_search(lab, g);
    CHECK(result.cells.size() == 1);
    CHECK(result.best == 0);
    CHECK_FALSE(result.boundary_warning);
  }
  SUBCASE("empty grid") {
    GridSpec g{small(), Scheme::mup(16), quick(), {}, {4}, {0}, "grid"};
    CHECK_THROWS_AS(grid_search(lab, g), ConfigError);
  }
  SUBCASE("grid steps") {
    CHECK(lr_grid_steps(0.0625, 0.015625) == 2.0);
    CHECK(lr_grid_steps(0.01, 0.01) == 0.0);
  }
}

TEST_CASE("warmstart with lambda 0 reproduces vanilla muP") {
  Lab lab(fresh_dir("lambda0"), corpus());
  const RunOutcome base = lab.run(base_spec());
  const auto ws = warmstart_transfer(lab, {base}, small(32), WarmstartConfig{0.0, true, 0}, quick()).front();
  RunSpec vanilla{small(32), base.spec.scheme, quick(), std::nullopt, "", base.ledger.data_end, "vanilla"};
  const RunOutcome v = lab.run(vanilla);
  CHECK(ws.ledger.data_start == base.ledger.data_end);
  CHECK(same_trajectory(ws, v));
}

TEST_CASE("one-stage chain equals warmstart transfer") {
  Lab lab(fresh_dir("chain"), corpus());
  const RunOutcome base = lab.run(base_spec());
  const WarmstartConfig ws{0.4, true, 0};
  const auto chain = successive_warmstart(lab, base, {small(32)}, {quick().token_budget}, ws, quick());
  const auto single = warmstart_transfer(lab, {base}, small(32), ws, quick()).front();
  REQUIRE(chain.size() == 1);
  CHECK(chain[0].id == single.id);
  CHECK(same_trajectory(chain[0], single));
}

TEST_CASE("successive warmstart") {
  Lab lab(fresh_dir("successive"), corpus());
  const RunOutcome base = lab.run(base_spec());
  const WarmstartConfig ws{0.4, true, 0};
  SUBCASE("cursor continues stage to stage") {
    const auto chain = successive_warmstart(lab, base, {small(24), small(32)}, {640, 640}, ws, quick());
    REQUIRE(chain.size() == 2);
    CHECK(chain[0].ledger.data_start == base.ledger.data_end);
    CHECK(chain[1].ledger.data_start == chain[0].ledger.data_end);
    CHECK(chain[1].spec.parent == chain[0].id);
  }
  SUBCASE("widths must increase") {
    CHECK_THROWS_AS(successive_warmstart(lab, base, {small(32), small(24)}, {640, 640}, ws, quick()), ConfigError);
    CHECK_THROWS_AS(successive_warmstart(lab, base, {small(32)}, {640, 640}, ws, quick()), ConfigError);
  }
}

TEST_CASE("tokens_for_flops") {
  const ModelConfig cfg = small(32);
  const std::int64_t per_token = 6 * param_count(cfg);
  CHECK(tokens_for_flops(per_token * 1000, cfg, 64) == 960);
  CHECK(tokens_for_flops(per_token * 1024, cfg, 64) == 1024);
  CHECK(tokens_for_flops(0, cfg, 64) == 0);
  CHECK(tokens_for_flops(-5, cfg, 64) == 0);
}

TEST_CASE("report") {
  SUBCASE("empty run set") {
    const auto lab_dir = fresh_dir("report_empty");
    write_report(lab_dir, lab_dir / "report");
    const std::string md = slurp(lab_dir / "report" / "summary.md");
    CHECK(md.find("| id | label |") != std::string::npos);
    CHECK(md.find("Loss curves") == std::string::npos);
  }
  SUBCASE("byte identical and lists absent runs") {
    const auto lab_dir = fresh_dir("report_twice");
    Lab lab(lab_dir, corpus());
    lab.run(base_spec());
    fs::create_directories(lab_dir / "runs" / "unfinished");
    write_report(lab_dir, lab_dir / "a");
    write_report(lab_dir, lab_dir / "b");
    for (const auto& entry : fs::directory_iterator(lab_dir / "a")) {
      INFO(entry.path().filename().string());
      CHECK(slurp(entry.path()) == slurp(lab_dir / "b" / entry.path().filename()));
    }
    CHECK(slurp(lab_dir / "a" / "summary.md").find("- unfinished") != std::string::npos);
    CHECK(fs::exists(lab_dir / "a" / "loss_base.svg"));
  }
}

TEST_CASE("experiment spec") {
  SUBCASE("round trip") {
    ExperimentSpec spec;
    spec.recipe = "succ";
    spec.seeds = {4, 5};
    spec.target_width = 64;
    const auto back = Json(spec).get<ExperimentSpec>();
    CHECK(Json(back) == Json(spec));
  }
  SUBCASE("partial configs keep defaults") {
    const auto spec = Json::parse(R"({"model": {"d_model": 64}, "train": {"learning_rate": 0.5}})").get<ExperimentSpec>();
    CHECK(spec.model.d_model == 64);
    CHECK(spec.model.n_heads == 8);
    CHECK(spec.train.learning_rate == 0.5);
    CHECK(spec.train.eval_batches == 8);
    CHECK(spec.seeds.size() == 3);
  }
  SUBCASE("bundled desk config spells out the defaults") {
    std::ifstream in(fs::path(MUWARM_SOURCE_DIR) / "configs" / "desk.json");
    REQUIRE(in);
    CHECK(Json(Json::parse(in).get<ExperimentSpec>()) == Json(ExperimentSpec{}));
  }
  SUBCASE("unknown keys rejected") {
    CHECK_THROWS_AS(Json::parse(R"({"sede": [1]})").get<ExperimentSpec>(), ConfigError);
  }
  SUBCASE("validation") {
    ExperimentSpec spec;
    CHECK_NOTHROW(spec.validate());
    spec.target_width = 32;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = ExperimentSpec{};
    spec.stages = {128, 64};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = ExperimentSpec{};
    spec.lambdas = {1.5};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }
}

TEST_CASE("recipes on a tiny spec") {
  ExperimentSpec spec;
  spec.model = small();
  spec.scheme = Scheme::mup(16, 0.02, true);
  spec.sp_scheme = Scheme::sp(16, 0.02, true);
  spec.train = quick();
  spec.seeds = {0};
  spec.lr_grid = {0.02, 0.01};
  spec.target_width = 32;
  Lab lab(fresh_dir("recipes"), corpus());

  SUBCASE("train") {
    spec.recipe = "train";
    const auto rep = run_recipe(lab, spec);
    CHECK(rep.ok());
    CHECK(fs::exists(lab.out_dir() / "train.json"));
  }
  SUBCASE("warmstart pairs share data and seeds") {
    spec.recipe = "warmstart";
    const auto rep = run_recipe(lab, spec);
    const auto& ws = rep.data.at("warmstart").at(0);
    const auto& va = rep.data.at("vanilla").at(0);
    CHECK(ws.at("data_start") == va.at("data_start"));
    CHECK(ws.at("seed") == va.at("seed"));
    CHECK(ws.at("tokens") == va.at("tokens"));
    CHECK(rep.assertions.front().name == "vanilla initial loss is ln V");
    CHECK(rep.assertions.front().pass);
  }
  SUBCASE("unknown recipe") {
    spec.recipe = "nope";
    CHECK_THROWS_AS(run_recipe(lab, spec), ConfigError);
  }
}
