#include "muwarm/adam.hpp"
#include "muwarm/checkpoint.hpp"
#include "muwarm/data.hpp"
#include "muwarm/ledger.hpp"
#include "muwarm/train.hpp"
#include "muwarm/warmstart.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace muwarm;

namespace {

ModelConfig small(int d = 16) {
  ModelConfig cfg{2, 16, 2, 8, 256, 16};
  return cfg.with_width(d);
}

const Corpus& corpus() {
  static const Corpus c = synthetic_corpus(1, 200000);
  return c;
}

TrainConfig quick(double lr = 0.01, std::int64_t steps = 40) {
  TrainConfig tc;
  tc.learning_rate = lr;
  tc.batch_size = 4;
  tc.token_budget = steps * 4 * 16;
  tc.eval_batches = 4;
  tc.eval_interval = 10;
  tc.run_id = "unit";
  return tc;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "muwarm_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("adam_step") {
  SUBCASE("closed-form first step") {
    Tensor<double> theta({1});
    theta.grad()[0] = 1.0;
    std::vector<Tensor<double>*> ts{&theta};
    const std::vector<double> lrs{0.1};
    AdamState<double> state;
    adam_step<double>(ts, lrs, state);
    CHECK(theta[0] == doctest::Approx(-0.1 / (1 + 1e-8)).epsilon(1e-14));
    CHECK(theta[0] == doctest::Approx(-0.099999999).epsilon(1e-9));
  }
  SUBCASE("zero gradient is an exact no-op") {
    Rng rng(3);
    Tensor<float> w = gaussian<float>(rng, {5, 7}, 1.0);
    const Tensor<float> before = w;
    w.grad();
    std::vector<Tensor<float>*> ts{&w};
    const std::vector<double> lrs{0.5};
    AdamState<float> state;
    for (int i = 0; i < 3; ++i) adam_step<float>(ts, lrs, state);
    CHECK(w.flat() == before.flat());
  }
  SUBCASE("scalar quadratic converges") {
    Tensor<double> theta({1});
    std::vector<Tensor<double>*> ts{&theta};
    const std::vector<double> lrs{0.05};
    AdamState<double> state;
    for (int i = 0; i < 500; ++i) {
      theta.grad()[0] = 2 * (theta[0] - 3.0);
      adam_step<double>(ts, lrs, state);
    }
    CHECK(std::abs(theta[0] - 3.0) < 0.01);
  }
  SUBCASE("non-finite gradient aborts before any update") {
    Tensor<float> a = Tensor<float>::filled({2}, 1.0f), b = Tensor<float>::filled({2}, 1.0f);
    a.grad().setOnes();
    b.grad()[1] = NAN;
    std::vector<Tensor<float>*> ts{&a, &b};
    const std::vector<double> lrs{0.1, 0.1};
    AdamState<float> state;
    CHECK_THROWS_AS(adam_step<float>(ts, lrs, state), NonFiniteError);
    CHECK((a.flat().array() == 1.0f).all());
  }
}

TEST_CASE("token budget and flops") {
  CHECK(token_budget(100000, 20.0) == 2000000);
  CHECK(token_budget(100000, 30.0) == 3000000);
  CHECK(token_budget(100001, 1.0, 1000) == 100000);
  CHECK(flops(1000000, 20000000) == 120000000000000LL);
  CHECK(flops(123, 0) == 0);
  CHECK_THROWS_AS(token_budget(100, 0.0), ConfigError);

  RunLedger ledger;
  ledger.n_params = param_count(small());
  for (int k = 1; k <= 5; ++k) {
    ledger.advance(4 * 16);
    CHECK(ledger.flops == 6 * ledger.n_params * k * 4 * 16);
    CHECK(ledger.consistent());
  }
}

TEST_CASE("corpus and token stream") {
  const Corpus& c = corpus();
  SUBCASE("synthetic corpus is deterministic") {
    CHECK(synthetic_corpus(1, 5000).tokens() == synthetic_corpus(1, 5000).tokens());
    CHECK(synthetic_corpus(1, 5000).tokens() != synthetic_corpus(2, 5000).tokens());
    CHECK(c.train_end() == 200000 - 4000);
  }
  SUBCASE("served offsets never repeat and continue across runs") {
    std::set<std::int64_t> seen;
    TokenStream first(c, 4, 16);
    for (int i = 0; i < 20; ++i) {
      const std::int64_t at = first.cursor();
      first.next();
      for (std::int64_t o = at; o < first.cursor(); ++o) CHECK(seen.insert(o).second);
    }
    TokenStream second(c, 8, 16, first.cursor());
    for (int i = 0; i < 20; ++i) {
      const std::int64_t at = second.cursor();
      second.next();
      for (std::int64_t o = at; o < second.cursor(); ++o) CHECK(seen.insert(o).second);
    }
    CHECK(seen.size() == 20 * 64 + 20 * 128);
  }
  SUBCASE("batches come from the stream offset") {
    TokenStream s(c, 2, 16, 100);
    const TokenBatch b = s.next();
    CHECK(b.inputs[0] == c.tokens()[100]);
    CHECK(b.targets[0] == c.tokens()[101]);
    CHECK(b.inputs[16] == c.tokens()[116]);
    CHECK(s.cursor() == 132);
  }
  SUBCASE("exhaustion") {
    TokenStream s(c, 4, 16, c.train_end() - 64);
    CHECK(s.batches_left() == 0);
    CHECK_THROWS_AS(s.next(), DataExhaustedError);
  }
  SUBCASE("evaluation reads only the held-out split") {
    const auto eval = eval_batches(c, 4, 16, 3);
    CHECK(eval.size() == 3);
    CHECK(eval[0].inputs[0] == c.tokens()[static_cast<std::size_t>(c.train_end())]);
    CHECK_THROWS_AS(eval_batches(c, 4, 16, 1000), DataExhaustedError);
  }
  SUBCASE("corpus files") {
    const auto raw = scratch("raw.txt");
    {
      std::ofstream(raw, std::ios::binary) << "hello world";
    }
    const Corpus r = load_corpus(raw);
    CHECK(r.vocab_size() == 256);
    CHECK(r.size() == 11);
    CHECK(r.tokens()[0] == 'h');

    const auto tok = scratch("ids.tok");
    {
      std::ofstream out(tok, std::ios::binary);
      out << "TOK16 1000\n";
      for (std::uint16_t id : {3, 999, 256}) out.put(static_cast<char>(id & 0xff)).put(static_cast<char>(id >> 8));
    }
    const Corpus t = load_corpus(tok);
    CHECK(t.vocab_size() == 1000);
    CHECK(t.tokens() == std::vector<std::uint16_t>{3, 999, 256});
  }
}

TEST_CASE("train") {
  const Corpus& c = corpus();
  auto run = [&](const Scheme& scheme, const TrainConfig& tc, std::int64_t cursor = 0) {
    auto model = Model<float>::build(small(), scheme, tc.seed);
    TokenStream stream(c, tc.batch_size, 16, cursor);
    auto result = train(model, stream, c, tc);
    return std::make_pair(std::move(model), std::move(result));
  };

  SUBCASE("runs exactly the budget and keeps the ledger exact") {
    const TrainConfig tc = quick();
    auto [model, result] = run(Scheme::mup(16), tc);
    CHECK_FALSE(result.diverged);
    CHECK(result.ledger.tokens == tc.token_budget);
    CHECK(result.ledger.step == 40);
    CHECK(result.ledger.consistent());
    REQUIRE(result.records.size() == 5);
    for (const auto& r : result.records) {
      CHECK(r.flops == flops(param_count(small()), r.tokens));
      CHECK(r.tokens == r.step * 64);
    }
    CHECK_FALSE(result.records.front().train_loss.has_value());
    CHECK(result.records.back().val_loss < result.records.front().val_loss);
  }

  SUBCASE("zero readout starts at ln V") {
    auto [model, result] = run(Scheme::mup(16, 0.02, true), quick());
    CHECK(std::abs(result.records.front().val_loss - std::log(256.0)) < 1e-3);
  }

  SUBCASE("identical seeds give identical runs") {
    auto [m1, r1] = run(Scheme::mup(16), quick());
    auto [m2, r2] = run(Scheme::mup(16), quick());
    REQUIRE(r1.records.size() == r2.records.size());
    for (std::size_t i = 0; i < r1.records.size(); ++i) {
      CHECK(Json(r1.records[i]).dump() == Json(r2.records[i]).dump());
    }
    for (std::size_t i = 0; i < m1.params().size(); ++i) CHECK(m1.params()[i].value.flat() == m2.params()[i].value.flat());
  }

  SUBCASE("evaluation is deterministic") {
    auto model = Model<float>::build(small(), Scheme::mup(16), 0);
    const auto eval = eval_batches(c, 4, 16, 4);
    CHECK(evaluate(model, eval) == evaluate(model, eval));
  }

  SUBCASE("budget beyond the training split") {
    TrainConfig tc = quick();
    tc.token_budget = c.size();
    auto model = Model<float>::build(small(), Scheme::mup(16), 0);
    TokenStream stream(c, tc.batch_size, 16);
    CHECK_THROWS_AS(train(model, stream, c, tc), DataExhaustedError);
  }

  SUBCASE("non-finite weights stop the run") {
    auto model = Model<float>::build(small(), Scheme::mup(16), 0);
    model.param("blocks.0.mlp.fc.weight").value[0] = NAN;
    TokenStream stream(c, 4, 16);
    const auto result = train(model, stream, c, quick());
    CHECK(result.diverged);
    CHECK(result.records.empty());
  }

  SUBCASE("base and warmstarted runs see disjoint offsets") {
    const Scheme mup = Scheme::mup(16);
    const TrainConfig tc = quick();
    auto [base_model, base] = run(mup, tc);
    const Checkpoint ckpt = Checkpoint::from_model(base_model, base.ledger, tc.seed);
    auto grown = warmstart_model(ckpt, small(32), mup, {0.4, true, 1});
    CHECK(grown.data_cursor == base.ledger.data_end);
    TokenStream stream(c, tc.batch_size, 16, grown.data_cursor);
    const auto target = train(grown.model, stream, c, tc);
    CHECK(target.ledger.data_start == base.ledger.data_end);
    CHECK(base.ledger.data_start == 0);
    CHECK(target.ledger.data_end - target.ledger.data_start == target.ledger.tokens);
  }
}

TEST_CASE("checkpoint persistence") {
  auto model = Model<float>::build(small(32), Scheme::mup(16, 0.02, true), 4);
  RunLedger ledger;
  ledger.n_params = param_count(small(32));
  ledger.advance(64);
  ledger.wall_time = 1.25;
  const Checkpoint ckpt = Checkpoint::from_model(model, ledger, 4, Json(quick()), Json{{"note", "x"}});

  const auto bytes = ckpt.to_bytes();
  CHECK(std::equal(bytes.begin(), bytes.begin() + 8, Checkpoint::kMagic));
  const Checkpoint back = Checkpoint::from_bytes(bytes);
  CHECK(back.to_bytes() == bytes);
  CHECK(back.model == ckpt.model);
  CHECK(back.scheme == ckpt.scheme);
  CHECK(back.ledger == ckpt.ledger);

  const auto path = scratch("ckpt.bin");
  ckpt.save(path);
  const auto path2 = scratch("ckpt2.bin");
  Checkpoint::load(path).save(path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(sa.size() == bytes.size());

  const auto restored = back.to_model();
  for (std::size_t i = 0; i < model.params().size(); ++i) CHECK(restored.params()[i].value.flat() == model.params()[i].value.flat());

  auto broken = bytes;
  broken[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::from_bytes(broken), CheckpointError);
  broken = bytes;
  broken.resize(bytes.size() - 4);
  CHECK_THROWS_AS(Checkpoint::from_bytes(broken), CheckpointError);
}

TEST_CASE("metrics record json") {
  MetricsRecord r;
  r.run_id = "abc";
  r.step = 3;
  r.tokens = 192;
  r.flops = 6 * 10 * 192;
  r.val_loss = 4.5;
  r.per_layer_act_l1 = {{"embed", 0.5}, {"logits", 0.0}};
  r.scheme = "mup";
  r.width = 64;
  Json j = r;
  CHECK(j["train_loss"].is_null());
  for (const char* key : {"run_id", "step", "tokens", "flops", "train_loss", "val_loss", "per_layer_act_l1", "weight_l1",
                          "weight_l2", "lr", "lambda_shrink", "scheme", "width"})
    CHECK(j.contains(key));
  const auto back = j.get<MetricsRecord>();
  CHECK(Json(back).dump() == j.dump());
  r.train_loss = 5.0;
  CHECK(Json(r).get<MetricsRecord>().train_loss == 5.0);
}
