#pragma once

#include "muwarm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace muwarm {

class DataExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Token sequence split into a training prefix and a held-out suffix.
class Corpus {
 public:
  static constexpr double kHeldOutFraction = 0.02;

  Corpus(std::vector<std::uint16_t> tokens, int vocab_size, double held_out_fraction = kHeldOutFraction);

  const std::vector<std::uint16_t>& tokens() const { return tokens_; }
  int vocab_size() const { return vocab_size_; }
  std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()); }
  /// Training offsets are [0, train_end()); the rest is the held-out split.
  std::int64_t train_end() const { return train_end_; }
  std::int64_t held_out_size() const { return size() - train_end_; }

 private:
  std::vector<std::uint16_t> tokens_;
  int vocab_size_;
  std::int64_t train_end_;
};

/// Seeded order-3 Markov byte source over a 64-symbol printable alphabet.
Corpus synthetic_corpus(std::uint64_t seed, std::int64_t n_tokens);

/// Raw bytes (vocab 256), or a "TOK16 <vocab>\n" header followed by
/// little-endian 16-bit ids.
Corpus load_corpus(const std::filesystem::path& path);

/// `n` sequences of `seq` tokens starting at `offset`, spaced by `seq`.
TokenBatch make_batch(const Corpus& corpus, std::int64_t offset, Index n, Index seq);

/// Forward-only, non-repeating reader over the training prefix. Each batch
/// consumes batch*seq fresh offsets.
class TokenStream {
 public:
  TokenStream(const Corpus& corpus, Index batch_size, Index seq_len, std::int64_t cursor = 0);

  TokenBatch next();

  std::int64_t cursor() const { return cursor_; }
  std::int64_t start() const { return start_; }
  Index batch_size() const { return batch_size_; }
  Index seq_len() const { return seq_len_; }
  std::int64_t tokens_per_batch() const { return static_cast<std::int64_t>(batch_size_ * seq_len_); }
  /// Whole batches still available before the held-out split.
  std::int64_t batches_left() const;

 private:
  const Corpus* corpus_;
  Index batch_size_;
  Index seq_len_;
  std::int64_t start_;
  std::int64_t cursor_;
};

/// The fixed evaluation batches: consecutive sequences from the held-out split.
std::vector<TokenBatch> eval_batches(const Corpus& corpus, Index batch_size, Index seq_len, int n_batches);

}  // namespace muwarm
