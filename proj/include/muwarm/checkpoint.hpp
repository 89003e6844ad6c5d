#pragma once

#include "muwarm/ledger.hpp"
#include "muwarm/model.hpp"
#include "muwarm/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace muwarm {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  RoleKind role = RoleKind::Hidden;
  Shape shape;
  std::vector<float> data;
};

/// Raw (pre-multiplier) weights plus everything needed to resume or
/// warmstart from them.
///
/// File layout: 8-byte magic "MUWARM1\0", u64 little-endian header length,
/// UTF-8 JSON header (configs, ledger, tensor directory), then each tensor's
/// float32 little-endian payload in directory order.
struct Checkpoint {
  static constexpr char kMagic[8] = {'M', 'U', 'W', 'A', 'R', 'M', '1', '\0'};

  ModelConfig model;
  Scheme scheme;
  std::vector<NamedTensor> tensors;
  RunLedger ledger;
  std::uint64_t seed = 0;
  Json train_config = Json::object();
  Json extra = Json::object();

  static Checkpoint from_model(const Model<float>& model, const RunLedger& ledger, std::uint64_t seed,
                               Json train_config = Json::object(), Json extra = Json::object());
  Model<float> to_model() const;
  const NamedTensor& tensor(std::string_view name) const;

  std::vector<std::uint8_t> to_bytes() const;
  static Checkpoint from_bytes(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace muwarm
