#include "muwarm/recipes.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace muwarm;

int main(int argc, char** argv) {
  CLI::App app{"muP tiny-GPT training lab"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = "lab", corpus_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<int> jobs;
  for (const char* name : {"train", "grid", "transfer", "warmstart", "ablate", "succ", "coordcheck", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment spec")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "lab directory (runs are cached here)");
    sub->add_option("--seed", seed, "restrict to a single seed");
    sub->add_option("--lambda", lambda, "warmstart shrink factor");
    sub->add_option("--corpus", corpus_path, "byte or TOK16 corpus file")->check(CLI::ExistingFile);
    sub->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentSpec spec;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      spec = Json::parse(in).get<ExperimentSpec>();
    }
    spec.recipe = app.get_subcommands().front()->get_name();
    if (seed) spec.seeds = {*seed};
    if (lambda) {
      spec.warmstart.lambda_shrink = *lambda;
      spec.lambdas = {*lambda};
      spec.coord_lambdas = {*lambda};
    }
    if (!corpus_path.empty()) spec.corpus_path = corpus_path;
    if (jobs) spec.jobs = *jobs;
    spec.validate();

    const Corpus corpus = corpus_for(spec);
    Lab lab(out_dir, corpus, spec.jobs);
    const RecipeReport rep = run_recipe(lab, spec);
    for (const auto& a : rep.assertions)
      std::printf("%s  %s%s%s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), a.detail.empty() ? "" : ": ",
                  a.detail.c_str());
    return rep.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
