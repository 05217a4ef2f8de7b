#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lesioncascade/nn.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

// Binary checkpoint layout, all integers and floats little-endian:
//   bytes 0..3   magic "LCKP"
//   u32          format version (currently 1)
//   u32          metadata length, then that many bytes (key=value lines)
//   u32          parameter count
//   per parameter, in store order:
//     u32        name length, then the name bytes
//     u32        rank
//     i64[rank]  dimensions
//     f64[numel] row-major element data
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string metadata;
  std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const std::string& metadata);

Checkpoint read_checkpoint(const std::filesystem::path& path);

// Strict restore: the file and the store must contain exactly the same
// parameter names with matching shapes, otherwise an IoError lists the
// offending names.
void load_parameters(ParameterStore& params, const Checkpoint& ckpt);

}  // namespace lc
