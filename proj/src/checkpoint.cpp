#include "muwarm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace muwarm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Checkpoint Checkpoint::from_model(const Model<float>& model, const RunLedger& ledger, std::uint64_t seed, Json train_config,
                                  Json extra) {
  Checkpoint ckpt;
  ckpt.model = model.config();
  ckpt.scheme = model.scheme();
  ckpt.ledger = ledger;
  ckpt.seed = seed;
  ckpt.train_config = std::move(train_config);
  ckpt.extra = std::move(extra);
  for (const auto& p : model.params()) {
    const auto& flat = p.value.flat();
    ckpt.tensors.push_back({p.name, p.role.kind, p.value.shape(), std::vector<float>(flat.data(), flat.data() + flat.size())});
  }
  return ckpt;
}

Model<float> Checkpoint::to_model() const {
  std::vector<ParamTensor<float>> params;
  const auto specs = enumerate_params(model);
  if (specs.size() != tensors.size()) throw CheckpointError("checkpoint tensor set does not match its model config");
  for (const auto& spec : specs) {
    const NamedTensor& t = tensor(spec.name);
    if (t.shape != spec.shape || t.role != spec.role.kind)
      throw CheckpointError("checkpoint tensor '" + spec.name + "' does not match its model config");
    Vector<float> data = Eigen::Map<const Vector<float>>(t.data.data(), static_cast<Index>(t.data.size()));
    params.push_back({spec.name, spec.role, spec.vector_default, Tensor<float>(t.shape, std::move(data))});
  }
  return Model<float>(model, scheme, std::move(params));
}

const NamedTensor& Checkpoint::tensor(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + std::string(name) + "'");
}

std::vector<std::uint8_t> Checkpoint::to_bytes() const {
  Json header;
  header["format"] = "MUWARM1";
  header["model"] = model;
  header["scheme"] = scheme;
  header["ledger"] = ledger;
  header["seed"] = seed;
  header["train_config"] = train_config;
  header["extra"] = extra;
  Json directory = Json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (static_cast<Index>(t.data.size()) != numel(t.shape))
      throw CheckpointError("tensor '" + t.name + "' payload does not match its shape");
    directory.push_back({{"name", t.name}, {"role", std::string(to_string(t.role))}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size() * sizeof(float);
  }
  header["tensors"] = std::move(directory);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(sizeof(kMagic) + 8 + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : tensors) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.data.size() * sizeof(float));
  }
  return out;
}

Checkpoint Checkpoint::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not a MUWARM1 checkpoint");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  if (16 + len > bytes.size()) throw CheckpointError("checkpoint header truncated");
  const Json header = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));

  Checkpoint ckpt;
  ckpt.model = header.at("model").get<ModelConfig>();
  ckpt.scheme = header.at("scheme").get<Scheme>();
  ckpt.ledger = header.at("ledger").get<RunLedger>();
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.train_config = header.value("train_config", Json::object());
  ckpt.extra = header.value("extra", Json::object());
  const auto payload = bytes.subspan(16 + len);
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.role = role_kind_from_string(entry.at("role").get<std::string>());
    t.shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = static_cast<std::size_t>(numel(t.shape));
    if (offset + count * sizeof(float) > payload.size()) throw CheckpointError("tensor '" + t.name + "' payload truncated");
    t.data.resize(count);
    std::memcpy(t.data.data(), payload.data() + offset, count * sizeof(float));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

}  // namespace muwarm
