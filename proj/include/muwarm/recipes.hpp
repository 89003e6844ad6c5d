#pragma once

#include "muwarm/experiments.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace muwarm {

/// JSON-configurable description of a recipe. Missing keys take the desk
/// defaults below.
struct ExperimentSpec {
  std::string recipe = "train";
  /// Base model; every other width shares its depth, head size, vocab and block size.
  ModelConfig model{2, 32, 4, 8, 256, 64};
  Scheme scheme = Scheme::mup(32, 0.02, true);
  Scheme sp_scheme = Scheme::sp(32, 0.02, true);
  TrainConfig train = [] {
    TrainConfig tc;
    tc.eval_batches = 8;
    return tc;
  }();
  WarmstartConfig warmstart;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> lr_grid{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
  std::vector<int> batch_grid{16};
  int target_width = 128;
  std::vector<int> stages{64, 128};
  std::vector<double> lambdas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> coord_lambdas{0.2, 0.4, 0.6, 1.0};
  std::vector<int> coord_widths{32, 64, 128, 256};
  int coord_steps = 4;
  int coord_batch = 16;
  /// Coordinate-check slope bounds: |slope| <= pass for well-behaved runs,
  /// slope >= fail marks SP blow-up.
  double slope_pass = 0.25;
  double slope_fail = 0.5;
  double transfer_tolerance_steps = 1.0;
  double warmstart_margin = 0.05;
  double uniform_loss_tolerance = 1e-3;
  std::string corpus_path;
  std::int64_t synthetic_tokens = 20'000'000;
  std::uint64_t corpus_seed = 0;
  int jobs = 1;

  void validate() const;
};

void to_json(Json& j, const ExperimentSpec& spec);
void from_json(const Json& j, ExperimentSpec& spec);

/// The corpus a spec names: a file, or the bundled synthetic source.
Corpus corpus_for(const ExperimentSpec& spec);

struct Assertion {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RecipeReport {
  std::string recipe;
  std::vector<Assertion> assertions;
  Json data = Json::object();

  bool ok() const;
  void check(std::string name, bool pass, std::string detail);
};

void to_json(Json& j, const Assertion& a);
void to_json(Json& j, const RecipeReport& r);

RecipeReport recipe_train(Lab& lab, const ExperimentSpec& spec);
RecipeReport recipe_grid(Lab& lab, const ExperimentSpec& spec);
/// muP argmin at the base width against a direct grid at the target width,
/// plus the SP control grids.
RecipeReport recipe_transfer(Lab& lab, const ExperimentSpec& spec);
/// Base grid winners grown to the target width against fresh muP runs on the
/// same data, learning rate, seeds and token budget.
RecipeReport recipe_warmstart(Lab& lab, const ExperimentSpec& spec);
RecipeReport recipe_ablate(Lab& lab, const ExperimentSpec& spec);
/// Base -> stages chain against single-stage warmstart and fresh muP at the
/// same total compute.
RecipeReport recipe_succ(Lab& lab, const ExperimentSpec& spec);
RecipeReport recipe_coordcheck(Lab& lab, const ExperimentSpec& spec);
RecipeReport recipe_report(Lab& lab, const ExperimentSpec& spec);

/// Dispatches on spec.recipe and writes <out>/<recipe>.json.
RecipeReport run_recipe(Lab& lab, const ExperimentSpec& spec);

}  // namespace muwarm
