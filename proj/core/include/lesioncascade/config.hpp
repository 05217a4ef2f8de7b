#pragma once

#include <filesystem>
#include <string>

#include "lesioncascade/data.hpp"
#include "lesioncascade/model.hpp"
#include "lesioncascade/trainer.hpp"

namespace lc {

// Data settings beyond the generator itself.
struct DataConfig {
  int train_per_class = 100;
  int test_per_class = 25;
  int image_size = 64;
  std::string format = "png";  // png or ppm
  double artifact_probability = 0.3;
  ValueRange benign_irregularity{0.02, 0.10};
  ValueRange melanoma_irregularity{0.16, 0.34};
  ValueRange benign_texture{0.010, 0.030};
  ValueRange melanoma_texture{0.050, 0.110};

  SynthConfig synth(int count_per_class, std::uint64_t seed) const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

// Applies [model]/[train]/[data] sections of a key = value file. Unknown
// keys or malformed lines raise ConfigError with the line number. Later
// sources win: defaults < LESIONCASCADE_SEED env var < file < CLI flags
// (flags are applied by the caller after this).
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Same grammar from an in-memory string (checkpoint metadata echo).
void apply_config_text(RunConfig& config, const std::string& text,
                       const std::string& context);

// Seed override from the environment, the lowest-precedence source. Returns
// true when the variable was present and applied.
bool apply_env_seed(RunConfig& config);

// Canonical echo of every setting, parseable by apply_config_file.
std::string render_config(const RunConfig& config);

}  // namespace lc
