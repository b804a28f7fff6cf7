#include "daf/checkpoint.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "daf/errors.hpp"

namespace daf {
namespace {

constexpr std::array<char, 8> kMagic{'D', 'A', 'F', 'N', 'E', 'T', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_bytes(std::ostream& out, const std::string& bytes) {
  put<uint64_t>(out, bytes.size());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ValidationError("checkpoint '" + path.string() + "' is truncated");
  }
  return value;
}

std::string get_bytes(std::istream& in, const std::filesystem::path& path) {
  const auto size = get<uint64_t>(in, path);
  if (size > (uint64_t{1} << 34)) throw ValidationError("checkpoint '" + path.string() + "' is corrupt");
  std::string bytes(size, '\0');
  if (!in.read(bytes.data(), static_cast<std::streamsize>(size))) {
    throw ValidationError("checkpoint '" + path.string() + "' is truncated");
  }
  return bytes;
}

}  // namespace

std::string serialize_module(torch::nn::Module& module) {
  torch::serialize::OutputArchive archive;
  module.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

void deserialize_module(torch::nn::Module& module, const std::string& bytes) {
  torch::serialize::InputArchive archive;
  std::istringstream in(bytes);
  archive.load_from(in);
  module.load(archive);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + tmp.string() + "'");
    out.write(kMagic.data(), kMagic.size());
    put<uint32_t>(out, Checkpoint::kFormatVersion);
    put<int64_t>(out, checkpoint.stage);
    put<int64_t>(out, checkpoint.epoch);
    put<int64_t>(out, checkpoint.iteration);
    put_bytes(out, serialize_config(checkpoint.config));
    put_bytes(out, checkpoint.rng_state);
    put_bytes(out, checkpoint.model_state);
    put_bytes(out, checkpoint.optimizer_state);
    if (!out) throw Error("failed writing checkpoint '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint not found: '" + path.string() + "'");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ValidationError("'" + path.string() + "' is not a dafnet checkpoint");
  }
  const auto version = get<uint32_t>(in, path);
  if (version != Checkpoint::kFormatVersion) {
    throw ValidationError("checkpoint '" + path.string() + "' has unsupported format version " + std::to_string(version));
  }
  Checkpoint c;
  c.stage = get<int64_t>(in, path);
  c.epoch = get<int64_t>(in, path);
  c.iteration = get<int64_t>(in, path);
  c.config = parse_config(get_bytes(in, path));
  c.rng_state = get_bytes(in, path);
  c.model_state = get_bytes(in, path);
  c.optimizer_state = get_bytes(in, path);
  if (c.stage != 1 && c.stage != 2) {
    throw ValidationError("checkpoint '" + path.string() + "' has invalid stage tag " + std::to_string(c.stage));
  }
  return c;
}

model::DafNet restore_model(const Checkpoint& checkpoint) {
  model::DafNet net(checkpoint.config.model);
  deserialize_module(*net, checkpoint.model_state);
  net->eval();
  return net;
}

}  // namespace daf
