#include "lesioncascade/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

#include "lesioncascade/errors.hpp"

namespace lc {

namespace {

constexpr char kMagic[4] = {'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& os, std::int64_t v) {
  const std::uint64_t u = static_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::int64_t get_i64(std::istream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw IoError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<std::int64_t>(v);
}

double get_f64(std::istream& is, const char* what) {
  const std::uint64_t u = static_cast<std::uint64_t>(get_i64(is, what));
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const std::string& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& entry : params.entries()) {
    put_u32(os, static_cast<std::uint32_t>(entry.name.size()));
    os.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    const Shape& shape = entry.value.shape();
    put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::int64_t d : shape) put_i64(os, d);
    for (double v : entry.value.values()) put_f64(os, v);
  }
  if (!os) throw IoError("write failure on checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = get_u32(is, "version");
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  " in " + path.string());
  }
  Checkpoint ckpt;
  const std::uint32_t meta_len = get_u32(is, "metadata length");
  ckpt.metadata.resize(meta_len);
  if (meta_len > 0 && !is.read(ckpt.metadata.data(), meta_len)) {
    throw IoError("checkpoint truncated while reading metadata");
  }
  const std::uint32_t count = get_u32(is, "parameter count");
  ckpt.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry entry;
    const std::uint32_t name_len = get_u32(is, "name length");
    entry.name.resize(name_len);
    if (!is.read(entry.name.data(), name_len)) {
      throw IoError("checkpoint truncated while reading a parameter name");
    }
    const std::uint32_t rank = get_u32(is, "rank");
    std::int64_t numel = 1;
    entry.shape.resize(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      entry.shape[d] = get_i64(is, "dimension");
      if (entry.shape[d] <= 0) {
        throw IoError("checkpoint has a non-positive dimension for '" + entry.name + "'");
      }
      numel *= entry.shape[d];
    }
    entry.values.resize(static_cast<std::size_t>(numel));
    for (std::int64_t v = 0; v < numel; ++v) {
      entry.values[static_cast<std::size_t>(v)] = get_f64(is, "element data");
    }
    ckpt.entries.push_back(std::move(entry));
  }
  return ckpt;
}

void load_parameters(ParameterStore& params, const Checkpoint& ckpt) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : ckpt.entries) by_name[e.name] = &e;

  std::string missing, mismatched;
  for (auto& entry : params.entries()) {
    auto it = by_name.find(entry.name);
    if (it == by_name.end()) {
      missing += (missing.empty() ? "" : ", ") + entry.name;
      continue;
    }
    if (it->second->shape != entry.value.shape()) {
      mismatched += (mismatched.empty() ? "" : ", ") + entry.name;
    }
    by_name.erase(it);
  }
  std::string extra;
  for (const auto& [name, e] : by_name) {
    (void)e;
    extra += (extra.empty() ? "" : ", ") + name;
  }
  if (!missing.empty() || !mismatched.empty() || !extra.empty()) {
    std::string msg = "checkpoint does not match the model:";
    if (!missing.empty()) msg += " missing [" + missing + "]";
    if (!mismatched.empty()) msg += " shape mismatch [" + mismatched + "]";
    if (!extra.empty()) msg += " unexpected [" + extra + "]";
    throw IoError(msg);
  }
  for (auto& entry : params.entries()) {
    for (const auto& e : ckpt.entries) {
      if (e.name == entry.name) {
        entry.value.values() = e.values;
        break;
      }
    }
    entry.value.zero_grad();
  }
}

}  // namespace lc
