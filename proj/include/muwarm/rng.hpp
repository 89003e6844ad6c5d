#pragma once

#include "muwarm/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace muwarm {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based generator: the n-th draw depends only on (seed, stream, n).
/// Streams keyed by tensor name therefore produce the same values no matter
/// in which order tensors are initialized.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

  static Rng for_name(std::uint64_t seed, std::string_view name) { return Rng(seed, fnv1a(name)); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// i.i.d. N(0, std^2) samples. std == 0 yields exact zeros without consuming draws.
template <typename Scalar>
Tensor<Scalar> gaussian(Rng& rng, const Shape& shape, double std) {
  if (std < 0.0) throw std::invalid_argument("gaussian: std must be non-negative");
  Tensor<Scalar> out(shape);
  if (std == 0.0) return out;
  auto& flat = out.flat();
  for (Index i = 0; i < flat.size(); ++i) flat[i] = static_cast<Scalar>(std * rng.normal());
  return out;
}

}  // namespace muwarm
