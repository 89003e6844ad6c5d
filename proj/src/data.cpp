#include "muwarm/data.hpp"

#include "muwarm/rng.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <sstream>

namespace muwarm {

Corpus::Corpus(std::vector<std::uint16_t> tokens, int vocab_size, double held_out_fraction)
    : tokens_(std::move(tokens)), vocab_size_(vocab_size) {
  if (vocab_size_ < 2) throw ConfigError("corpus: vocab must have at least 2 tokens");
  if (held_out_fraction < 0.0 || held_out_fraction >= 1.0) throw ConfigError("corpus: held-out fraction must be in [0, 1)");
  for (auto t : tokens_)
    if (t >= vocab_size_) throw ConfigError("corpus: token id " + std::to_string(t) + " outside vocab");
  const auto held = static_cast<std::int64_t>(static_cast<double>(tokens_.size()) * held_out_fraction);
  train_end_ = size() - held;
}

namespace {

constexpr int kAlphabet = 64;
constexpr int kCandidates = 6;
constexpr int kFirstByte = 32;

}  // namespace

Corpus synthetic_corpus(std::uint64_t seed, std::int64_t n_tokens) {
  if (n_tokens < 4) throw ConfigError("synthetic corpus: need at least 4 tokens");
  Rng table_rng(seed, 1);
  // Successor candidates per previous symbol; ranked by Zipf weight.
  std::array<std::array<int, kCandidates>, kAlphabet> successors{};
  for (auto& row : successors)
    for (auto& s : row) s = static_cast<int>(table_rng.below(kAlphabet));
  std::array<double, kCandidates> zipf_cdf{};
  double total = 0.0;
  for (int j = 0; j < kCandidates; ++j) total += 1.0 / (j + 1);
  double acc = 0.0;
  for (int j = 0; j < kCandidates; ++j) zipf_cdf[j] = (acc += 1.0 / (j + 1) / total);

  Rng rng(seed, 2);
  std::vector<std::uint16_t> out;
  out.reserve(static_cast<std::size_t>(n_tokens));
  int a = 0, b = 1, c = 2;
  for (std::int64_t i = 0; i < n_tokens; ++i) {
    const auto& cand = successors[c];
    int pick;
    if (rng.uniform() < 0.5) {
      // The full three-symbol context selects a preferred successor.
      const std::uint64_t h = splitmix64(seed ^ (static_cast<std::uint64_t>(a) << 16 | static_cast<std::uint64_t>(b) << 8 |
                                                  static_cast<std::uint64_t>(c)));
      pick = cand[h % kCandidates];
    } else {
      const double u = rng.uniform();
      int j = 0;
      while (j + 1 < kCandidates && u > zipf_cdf[j]) ++j;
      pick = cand[j];
    }
    out.push_back(static_cast<std::uint16_t>(kFirstByte + pick));
    a = b;
    b = c;
    c = pick;
  }
  return Corpus(std::move(out), 256);
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string magic = "TOK16 ";
  if (bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin())) {
    auto newline = std::find(bytes.begin(), bytes.end(), '\n');
    if (newline == bytes.end()) throw ConfigError("corpus: TOK16 header missing newline");
    const int vocab = std::stoi(std::string(bytes.begin() + static_cast<std::ptrdiff_t>(magic.size()), newline));
    const auto payload = static_cast<std::size_t>(std::distance(newline + 1, bytes.end()));
    if (payload % 2 != 0) throw ConfigError("corpus: TOK16 payload has odd length");
    std::vector<std::uint16_t> tokens(payload / 2);
    const auto* p = reinterpret_cast<const unsigned char*>(&*(newline + 1));
    for (std::size_t i = 0; i < tokens.size(); ++i)
      tokens[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    return Corpus(std::move(tokens), vocab);
  }
  std::vector<std::uint16_t> tokens(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) tokens[i] = static_cast<unsigned char>(bytes[i]);
  return Corpus(std::move(tokens), 256);
}

TokenBatch make_batch(const Corpus& corpus, std::int64_t offset, Index n, Index seq) {
  TokenBatch batch{n, seq, {}, {}};
  const auto& tok = corpus.tokens();
  if (offset < 0 || offset + n * seq + 1 > corpus.size()) throw DataExhaustedError("batch runs past the end of the corpus");
  batch.inputs.resize(static_cast<std::size_t>(n * seq));
  batch.targets.resize(static_cast<std::size_t>(n * seq));
  for (Index i = 0; i < n * seq; ++i) {
    batch.inputs[static_cast<std::size_t>(i)] = tok[static_cast<std::size_t>(offset + i)];
    batch.targets[static_cast<std::size_t>(i)] = tok[static_cast<std::size_t>(offset + i + 1)];
  }
  return batch;
}

TokenStream::TokenStream(const Corpus& corpus, Index batch_size, Index seq_len, std::int64_t cursor)
    : corpus_(&corpus), batch_size_(batch_size), seq_len_(seq_len), start_(cursor), cursor_(cursor) {
  if (batch_size <= 0 || seq_len <= 0) throw ConfigError("token stream: batch and sequence length must be positive");
  if (cursor < 0 || cursor > corpus.train_end()) throw ConfigError("token stream: cursor outside the training split");
}

std::int64_t TokenStream::batches_left() const {
  // One extra token is read as the final target.
  const std::int64_t room = corpus_->train_end() - 1 - cursor_;
  return room <= 0 ? 0 : room / tokens_per_batch();
}

TokenBatch TokenStream::next() {
  if (batches_left() < 1)
    throw DataExhaustedError("token stream exhausted at offset " + std::to_string(cursor_) + " (training split ends at " +
                             std::to_string(corpus_->train_end()) + ")");
  TokenBatch batch = make_batch(*corpus_, cursor_, batch_size_, seq_len_);
  cursor_ += tokens_per_batch();
  return batch;
}

std::vector<TokenBatch> eval_batches(const Corpus& corpus, Index batch_size, Index seq_len, int n_batches) {
  const std::int64_t per_batch = static_cast<std::int64_t>(batch_size * seq_len);
  const std::int64_t available = (corpus.held_out_size() - 1) / per_batch;
  if (n_batches <= 0 || available < n_batches)
    throw DataExhaustedError("held-out split holds " + std::to_string(available) + " evaluation batches, " +
                             std::to_string(n_batches) + " requested");
  std::vector<TokenBatch> out;
  for (int i = 0; i < n_batches; ++i) out.push_back(make_batch(corpus, corpus.train_end() + i * per_batch, batch_size, seq_len));
  return out;
}

}  // namespace muwarm
