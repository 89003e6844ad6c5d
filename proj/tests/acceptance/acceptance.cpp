// End-to-end acceptance run: one PASS/FAIL line per criterion on stdout,
// progress on stderr. Exit status is 0 once every criterion has been
// evaluated (use --strict to fail on any FAIL line).

#include "gradcheck.hpp"
#include "muwarm/ledger.hpp"
#include "muwarm/recipes.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace muwarm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Folds recipe assertions into one criterion outcome.
Outcome from_report(const RecipeReport& rep, const std::function<bool(const Assertion&)>& keep = nullptr) {
  Outcome out{true, ""};
  for (const auto& a : rep.assertions) {
    if (keep && !keep(a)) continue;
    out.pass = out.pass && a.pass;
    out.detail += std::string(out.detail.empty() ? "" : "; ") + (a.pass ? "" : "FAILED ") + a.name +
                  (a.detail.empty() ? "" : " (" + a.detail + ")");
  }
  return out;
}

Tensor<double> random_tensor(Shape shape, std::uint64_t stream, double std = 1.0) {
  Rng rng(1234, stream);
  return gaussian<double>(rng, shape, std);
}

// Criterion 1: every op at rel < 1e-5 and the full two-layer model at rel < 1e-4, in f64.
Outcome gradient_integrity() {
  using testing::check_op;
  using Op = std::function<Var<double>(Graph<double>&, std::vector<Var<double>>&)>;
  const auto a = random_tensor({3, 5}, 1), b = random_tensor({3, 5}, 2), bias = random_tensor({5}, 3);
  const auto w35 = random_tensor({3, 5}, 4);
  const auto m = random_tensor({5, 4}, 5), w34 = random_tensor({3, 4}, 6);
  const auto gain = random_tensor({5}, 7);
  const auto logits = random_tensor({4, 11}, 8, 2.0);
  const std::vector<int> targets{0, 10, 3, 3};
  const auto table = random_tensor({6, 4}, 9), w74 = random_tensor({7, 4}, 10);
  const std::vector<int> ids{5, 0, 5, 2, 2, 2, 1};
  const auto scores = random_tensor({2, 5, 5}, 11, 3.0), w255 = random_tensor({2, 5, 5}, 12);
  const auto q = random_tensor({8, 6}, 13), k = random_tensor({8, 6}, 14), v = random_tensor({8, 6}, 15);
  const auto w86 = random_tensor({8, 6}, 16);
  const Tensor<double> one({1}, {1.0});

  struct Case {
    const char* name;
    Op op;
    std::vector<Tensor<double>> inputs;
    Tensor<double> weights;
  };
  const std::vector<Case> cases{
      {"matmul", [](auto&, auto& x) { return matmul(x[0], x[1]); }, {a, m}, w34},
      {"add", [](auto&, auto& x) { return add(x[0], x[1]); }, {a, b}, w35},
      {"mul", [](auto&, auto& x) { return mul(x[0], x[1]); }, {a, b}, w35},
      {"scale", [](auto&, auto& x) { return scale(x[0], -0.37); }, {a}, w35},
      {"add_bias", [](auto&, auto& x) { return add_bias(x[0], x[1]); }, {a, bias}, w35},
      {"gelu", [](auto&, auto& x) { return gelu(x[0]); }, {a}, w35},
      {"layer_norm", [](auto&, auto& x) { return layer_norm(x[0], x[1], x[2]); }, {a, gain, bias}, w35},
      {"softmax_cross_entropy",
       [&](auto&, auto& x) { return softmax_cross_entropy(x[0], std::span<const int>(targets)); }, {logits}, one},
      {"embedding_gather", [&](auto&, auto& x) { return embedding_gather(x[0], std::span<const int>(ids)); }, {table},
       w74},
      {"causal_masked_softmax", [](auto&, auto& x) { return causal_masked_softmax(x[0]); }, {scores}, w255},
      {"causal_self_attention", [](auto&, auto& x) { return causal_self_attention(x[0], x[1], x[2], 2, 4, 3, 0.5); },
       {q, k, v}, w86},
  };
  Outcome out{true, ""};
  double worst_op = 0.0;
  for (const auto& c : cases) {
    const double err = check_op(c.op, c.inputs, c.weights);
    worst_op = std::max(worst_op, err);
    if (!(err < 1e-5)) {
      out.pass = false;
      out.detail += std::string(c.name) + " rel " + fmt("%.2e", err) + "; ";
    }
  }

  ModelConfig cfg{2, 16, 2, 8, 11, 6};
  auto model = Model<double>::build(cfg, Scheme::mup(8, 0.4), 11);
  Rng rng(99);
  for (auto& p : model.params())
    if (p.role.kind == RoleKind::VectorLike)
      for (Index i = 0; i < p.value.size(); ++i) p.value[i] = p.vector_default + 0.3 * rng.normal();
  TokenBatch batch{2, 5, {}, {}};
  Rng tokens(21);
  for (int i = 0; i < 10; ++i) {
    batch.inputs.push_back(static_cast<int>(tokens.below(11)));
    batch.targets.push_back(static_cast<int>(tokens.below(11)));
  }
  auto loss_value = [&] {
    Graph<double> g(false);
    return model.loss(g, batch).value()[0];
  };
  model.zero_grad();
  Graph<double> g;
  auto loss = model.loss(g, batch);
  g.backward(loss);
  std::vector<double> analytic, numeric;
  const double h = 1e-5;
  for (auto& p : model.params()) {
    for (Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double plus = loss_value();
      p.value[i] = saved - h;
      const double minus = loss_value();
      p.value[i] = saved;
      analytic.push_back(p.value.grad()[i]);
      numeric.push_back((plus - minus) / (2 * h));
    }
  }
  const double model_err =
      testing::relative_error(Eigen::Map<Vector<double>>(analytic.data(), static_cast<Index>(analytic.size())),
                              Eigen::Map<Vector<double>>(numeric.data(), static_cast<Index>(numeric.size())));
  if (!(model_err < 1e-4)) out.pass = false;
  out.detail += "worst op rel " + fmt("%.2e", worst_op) + " (< 1e-5), model rel " + fmt("%.2e", model_err) + " (< 1e-4)";
  return out;
}

// Criterion 2: lambda 0 bit-identity, perturb-off sub-blocks, vector anchoring.
Outcome warmstart_contracts(const Checkpoint& base, const ModelConfig& base_cfg, const Scheme& scheme) {
  Outcome out{true, ""};
  std::int64_t compared = 0;
  for (int d : {64, 128}) {
    const ModelConfig target = base_cfg.with_width(d);
    const auto zero = warmstart_model(base, target, scheme, {0.0, true, 17});
    const auto vanilla = Model<float>::build(target, scheme, 17);
    for (std::size_t i = 0; i < vanilla.params().size(); ++i) {
      const auto& p = zero.model.params()[i];
      if (p.value.flat() != vanilla.params()[i].value.flat()) {
        out.pass = false;
        out.detail += "(a) " + p.name + " differs at width " + std::to_string(d) + "; ";
      }
      if (p.role.kind == RoleKind::VectorLike && !(p.value.flat().array() == static_cast<float>(p.vector_default)).all()) {
        out.pass = false;
        out.detail += "(c) " + p.name + " not at default; ";
      }
      compared += p.value.size();
    }

    const auto shrunk = warmstart_model(base, target, scheme, {0.4, false, 0});
    for (const auto& p : shrunk.model.params()) {
      const NamedTensor& b = base.tensor(p.name);
      const Index br = b.shape.size() == 2 ? b.shape[0] : 1, bc = b.shape.back();
      bool exact = true;
      for (Index r = 0; r < p.value.rows(); ++r)
        for (Index c = 0; c < p.value.cols(); ++c) {
          const bool inside = r < br && c < bc;
          float expected;
          if (p.role.kind == RoleKind::VectorLike) {
            const auto def = static_cast<float>(p.vector_default);
            expected = inside ? def + 0.4f * (b.data[static_cast<std::size_t>(c)] - def) : def;
          } else {
            expected = inside ? 0.4f * b.data[static_cast<std::size_t>(r * bc + c)] : 0.0f;
          }
          exact = exact && p.value(r, c) == expected;
        }
      if (!exact) {
        out.pass = false;
        out.detail += "(b) " + p.name + " at width " + std::to_string(d) + "; ";
      }
    }
  }
  out.detail += std::to_string(compared) + " coordinates compared bitwise at widths 64 and 128";
  return out;
}

// Criterion 6 pieces that are not recipe assertions.
Outcome ledger_exactness(const fs::path& lab_dir, const RecipeReport& succ) {
  Outcome out{true, ""};
  std::int64_t records = 0, runs = 0;
  for (const auto& entry : fs::directory_iterator(lab_dir / "runs")) {
    if (!fs::exists(entry.path() / "result.json")) continue;
    const RunOutcome run = load_run(entry.path());
    ++runs;
    for (const auto& r : run.records) {
      ++records;
      if (r.flops != 6 * run.ledger.n_params * r.tokens) {
        out.pass = false;
        out.detail += run.id + " step " + std::to_string(r.step) + " flops mismatch; ";
        break;
      }
    }
  }
  out.detail += "6ND holds at " + std::to_string(records) + " records of " + std::to_string(runs) + " runs";

  // base -> single warmstart and base -> stage 1 -> stage 2: every chain's intervals are disjoint and contiguous.
  bool disjoint = true;
  for (const auto& seed : succ.data.at("seeds")) {
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& r : seed.at("chain")) spans.emplace_back(r.at("data_start"), r.at("data_end"));
    for (std::size_t i = 1; i < spans.size(); ++i) disjoint = disjoint && spans[i].first >= spans[i - 1].second;
    disjoint = disjoint && !spans.empty() && spans.front().first > 0;
  }
  const auto contiguous =
      std::find_if(succ.assertions.begin(), succ.assertions.end(),
                   [](const Assertion& a) { return a.name == "stream offsets continue across the chain"; });
  const bool chain_ok = disjoint && contiguous != succ.assertions.end() && contiguous->pass;
  out.pass = out.pass && chain_ok;
  out.detail += std::string("; chain offsets ") + (chain_ok ? "unique and contiguous" : "OVERLAP");

  const std::int64_t budget = token_budget(std::int64_t{100000}, 20.0);
  out.pass = out.pass && budget == 2'000'000;
  out.detail += "; token_budget(100000, 20) = " + std::to_string(budget);
  return out;
}

// Criterion 8: checkpoint bytes, metrics files of two independent runs, report bytes.
Outcome persistence(const fs::path& lab_dir, const RunOutcome& base_run, const Corpus& corpus) {
  Outcome out{true, ""};
  const fs::path ckpt_path = base_run.dir / "checkpoint.bin";
  const std::string original = slurp(ckpt_path);
  const Checkpoint ckpt = Checkpoint::load(ckpt_path);
  const auto bytes = ckpt.to_bytes();
  const bool bytes_same = std::string(bytes.begin(), bytes.end()) == original;
  const fs::path copy = lab_dir / "acceptance_scratch" / "roundtrip.bin";
  fs::create_directories(copy.parent_path());
  ckpt.save(copy);
  const bool file_same = slurp(copy) == original;
  out.pass = bytes_same && file_same;
  out.detail += std::string("checkpoint round trip ") + (out.pass ? "byte-identical" : "DIFFERS") + " (" +
                std::to_string(original.size()) + " bytes)";

  std::vector<std::string> metrics;
  for (const char* name : {"twin_a", "twin_b"}) {
    const fs::path dir = lab_dir / "acceptance_scratch" / name;
    fs::remove_all(dir);
    Lab twin(dir, corpus);
    metrics.push_back(slurp(twin.run(base_run.spec).dir / "metrics.jsonl"));
  }
  const bool metrics_same = !metrics[0].empty() && metrics[0] == metrics[1] && metrics[0] == slurp(base_run.dir / "metrics.jsonl");
  out.pass = out.pass && metrics_same;
  out.detail += std::string("; independent reruns ") + (metrics_same ? "identical" : "DIFFER") + " metrics.jsonl (" +
                std::to_string(metrics[0].size()) + " bytes)";

  const fs::path ra = lab_dir / "acceptance_scratch" / "report_a", rb = lab_dir / "acceptance_scratch" / "report_b";
  fs::remove_all(ra);
  fs::remove_all(rb);
  write_report(lab_dir, ra);
  write_report(lab_dir, rb);
  bool report_same = true;
  int files = 0;
  for (const auto& entry : fs::directory_iterator(ra)) {
    ++files;
    report_same = report_same && slurp(entry.path()) == slurp(rb / entry.path().filename());
  }
  out.pass = out.pass && report_same && files > 0;
  out.detail += std::string("; report regenerated ") + (report_same ? "byte-identical" : "DIFFERENT") + " (" +
                std::to_string(files) + " files)";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string lab_dir = "acceptance_lab";
  bool fresh = false, strict = false;
  int jobs = 1;
  app.add_option("--lab", lab_dir, "lab directory (completed runs are reused)");
  app.add_flag("--fresh", fresh, "delete the lab directory first");
  app.add_flag("--strict", strict, "exit non-zero if any criterion fails");
  app.add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  if (fresh) fs::remove_all(lab_dir);
  ExperimentSpec spec;
  spec.jobs = jobs;
  spec.validate();
  const Corpus corpus = corpus_for(spec);
  Lab lab(lab_dir, corpus, jobs);

  const char* names[8] = {"gradient integrity",
                          "warmstart operator contracts",
                          "coordinate checks",
                          "muTransfer of the argmin learning rate",
                          "warmstart gains",
                          "ledger exactness",
                          "successive warmstarting",
                          "persistence and determinism"};
  std::vector<Outcome> results(8);
  auto stage = [&](int c, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::cerr << "[acceptance] criterion " << c << ": " << names[c - 1] << "..." << std::endl;
    try {
      results[c - 1] = body();
    } catch (const std::exception& e) {
      results[c - 1] = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "[acceptance] criterion " << c << " " << (results[c - 1].pass ? "pass" : "FAIL") << " in "
              << fmt("%.1f", secs) << " s" << std::endl;
  };
  auto recipe = [&](const std::string& name) {
    ExperimentSpec s = spec;
    s.recipe = name;
    return run_recipe(lab, s);
  };

  stage(1, gradient_integrity);
  RecipeReport transfer, warm, succ, coord;
  stage(4, [&] { return from_report(transfer = recipe("transfer")); });
  stage(2, [&] {
    const GridResult g = grid_search(lab, GridSpec{spec.model, spec.scheme, spec.train, spec.lr_grid, spec.batch_grid,
                                                   spec.seeds, "grid-mup-w32"});
    return warmstart_contracts(lab.load(g.argmin().run_ids.front()).checkpoint(), spec.model, spec.scheme);
  });
  stage(5, [&] { return from_report(warm = recipe("warmstart")); });
  stage(7, [&] {
    return from_report(succ = recipe("succ"),
                       [](const Assertion& a) { return a.name != "stream offsets continue across the chain"; });
  });
  stage(3, [&] { return from_report(coord = recipe("coordcheck")); });
  stage(6, [&] { return ledger_exactness(lab.out_dir(), succ); });
  stage(8, [&] {
    const GridResult g = grid_search(lab, GridSpec{spec.model, spec.scheme, spec.train, spec.lr_grid, spec.batch_grid,
                                                   spec.seeds, "grid-mup-w32"});
    return persistence(lab.out_dir(), lab.load(g.argmin().run_ids.front()), corpus);
  });

  bool all = true;
  std::ofstream summary(fs::path(lab_dir) / "acceptance.txt", std::ios::trunc);
  for (int c = 1; c <= 8; ++c) {
    all = all && results[c - 1].pass;
    const std::string line = std::string(results[c - 1].pass ? "PASS" : "FAIL") + " criterion " + std::to_string(c) +
                             " [" + names[c - 1] + "]: " + results[c - 1].detail;
    std::printf("%s\n", line.c_str());
    summary << line << "\n";
  }
  std::fflush(stdout);
  return strict && !all ? 1 : 0;
}
