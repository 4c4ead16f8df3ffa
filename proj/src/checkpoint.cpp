#include "acrodis/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace acrodis {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian platform");

namespace {

constexpr char kMagic[4] = {'A', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

using ordered_json = nlohmann::ordered_json;

ordered_json config_to_json(const EncoderConfig& c) {
  ordered_json j;
  j["vocab_hash_size"] = c.vocab_hash_size;
  j["embedding_dim"] = c.embedding_dim;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["dropout_rate"] = c.dropout_rate;
  j["max_positions"] = c.max_positions;
  j["seed"] = c.seed;
  return j;
}

EncoderConfig config_from_json(const ordered_json& j) {
  EncoderConfig c;
  c.vocab_hash_size = j.at("vocab_hash_size").get<size_t>();
  c.embedding_dim = j.at("embedding_dim").get<size_t>();
  c.num_layers = j.at("num_layers").get<size_t>();
  c.num_heads = j.at("num_heads").get<size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.max_positions = j.at("max_positions").get<size_t>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);

  out.write(kMagic, 4);
  write_pod(out, kVersion);

  ordered_json header;
  header["config"] = config_to_json(checkpoint.config);
  header["stage"] = checkpoint.stage;
  header["seed"] = checkpoint.seed;
  header["rng_state"] = checkpoint.rng_state;
  const std::string header_text = header.dump();
  write_pod(out, static_cast<uint64_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  write_pod(out, static_cast<uint64_t>(checkpoint.params.tensors().size()));
  for (const auto& t : checkpoint.params.tensors()) {
    write_pod(out, static_cast<uint64_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(out, static_cast<uint64_t>(t.shape.size()));
    for (size_t s : t.shape) write_pod(out, static_cast<uint64_t>(s));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
  }
  const auto version = read_pod<uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  const auto header_len = read_pod<uint64_t>(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  ordered_json header = ordered_json::parse(header_text, nullptr, false);
  if (header.is_discarded()) throw std::runtime_error("checkpoint: corrupt header");

  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  ck.stage = header.at("stage").get<std::string>();
  ck.seed = header.at("seed").get<uint64_t>();
  ck.rng_state = header.at("rng_state").get<uint64_t>();

  const auto n_tensors = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < n_tensors; ++i) {
    const auto name_len = read_pod<uint64_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rank = read_pod<uint64_t>(in);
    std::vector<size_t> shape(rank);
    for (auto& s : shape) s = static_cast<size_t>(read_pod<uint64_t>(in));
    auto& t = ck.params.add(name, shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data (" + name + ")");
  }
  return ck;
}

std::unique_ptr<ReferenceEncoder> encoder_from_checkpoint(const Checkpoint& checkpoint) {
  return std::make_unique<ReferenceEncoder>(checkpoint.config, checkpoint.params);
}

}  // namespace acrodis
