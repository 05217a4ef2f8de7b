#include "lesioncascade/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lesioncascade/errors.hpp"

namespace lc {

SynthConfig DataConfig::synth(int count_per_class, std::uint64_t seed) const {
  SynthConfig s;
  s.count_per_class = count_per_class;
  s.image_size = image_size;
  s.benign_irregularity = benign_irregularity;
  s.melanoma_irregularity = melanoma_irregularity;
  s.benign_texture = benign_texture;
  s.melanoma_texture = melanoma_texture;
  s.artifact_probability = artifact_probability;
  s.seed = seed;
  return s;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& context, std::size_t line,
                       const std::string& message) {
  throw ConfigError(context + ":" + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& v, const std::string& ctx, std::size_t line) {
  try {
    std::size_t idx = 0;
    const double d = std::stod(v, &idx);
    if (idx != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ctx, line, "expected a number, got '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& v, const std::string& ctx, std::size_t line) {
  try {
    std::size_t idx = 0;
    const std::int64_t d = std::stoll(v, &idx);
    if (idx != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ctx, line, "expected an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& ctx, std::size_t line) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  fail(ctx, line, "expected a boolean, got '" + v + "'");
}

ValueRange parse_range(const std::string& v, const std::string& ctx, std::size_t line) {
  const std::size_t comma = v.find(',');
  if (comma == std::string::npos) fail(ctx, line, "expected 'lo,hi', got '" + v + "'");
  return {parse_double(trim(v.substr(0, comma)), ctx, line),
          parse_double(trim(v.substr(comma + 1)), ctx, line)};
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& ctx, std::size_t line) {
  if (section == "model") {
    if (key == "stages") cfg.model.num_stages = static_cast<int>(parse_int(value, ctx, line));
    else if (key == "beta") cfg.model.beta = parse_double(value, ctx, line);
    else if (key == "classes") cfg.model.cls_classes = static_cast<int>(parse_int(value, ctx, line));
    else if (key == "precision") cfg.model.precision = parse_precision(value);
    else if (key == "use_lpse") cfg.model.use_lpse = parse_bool(value, ctx, line);
    else if (key == "use_dgff") cfg.model.use_dgff = parse_bool(value, ctx, line);
    else if (key == "share_stage_params") cfg.model.share_stage_params = parse_bool(value, ctx, line);
    else if (key == "supervise_all_stages") cfg.model.supervise_all_stages = parse_bool(value, ctx, line);
    else if (key == "per_channel_mix") cfg.model.per_channel_mix = parse_bool(value, ctx, line);
    else if (key == "block_channels") {
      std::stringstream ss(value);
      std::string field;
      std::size_t i = 0;
      while (std::getline(ss, field, ',')) {
        if (i >= cfg.model.block_channels.size()) fail(ctx, line, "expected 5 channel widths");
        cfg.model.block_channels[i++] = static_cast<int>(parse_int(trim(field), ctx, line));
      }
      if (i != cfg.model.block_channels.size()) fail(ctx, line, "expected 5 channel widths");
    } else {
      fail(ctx, line, "unknown key '" + key + "' in [model]");
    }
  } else if (section == "train") {
    if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(value, ctx, line));
    else if (key == "base_lr") cfg.train.base_lr = parse_double(value, ctx, line);
    else if (key == "max_iters") cfg.train.max_iterations = parse_int(value, ctx, line);
    else if (key == "warmup_iters") cfg.train.warmup_iterations = parse_int(value, ctx, line);
    else if (key == "seed") {
      const std::int64_t v = parse_int(value, ctx, line);
      if (v < 0) fail(ctx, line, "seed must be non-negative");
      cfg.train.seed = static_cast<std::uint64_t>(v);
    }
    else if (key == "poly_power") cfg.train.poly_power = parse_double(value, ctx, line);
    else if (key == "eval_interval") cfg.train.eval_interval = parse_int(value, ctx, line);
    else if (key == "max_extent") cfg.train.max_extent = parse_int(value, ctx, line);
    else if (key == "augment") cfg.train.augment = parse_bool(value, ctx, line);
    else if (key == "deterministic") cfg.train.deterministic = parse_bool(value, ctx, line);
    else fail(ctx, line, "unknown key '" + key + "' in [train]");
  } else if (section == "data") {
    if (key == "train_per_class") cfg.data.train_per_class = static_cast<int>(parse_int(value, ctx, line));
    else if (key == "test_per_class") cfg.data.test_per_class = static_cast<int>(parse_int(value, ctx, line));
    else if (key == "image_size") cfg.data.image_size = static_cast<int>(parse_int(value, ctx, line));
    else if (key == "format") {
      if (value != "png" && value != "ppm") fail(ctx, line, "format must be png or ppm");
      cfg.data.format = value;
    }
    else if (key == "artifact_probability") cfg.data.artifact_probability = parse_double(value, ctx, line);
    else if (key == "benign_irregularity") cfg.data.benign_irregularity = parse_range(value, ctx, line);
    else if (key == "melanoma_irregularity") cfg.data.melanoma_irregularity = parse_range(value, ctx, line);
    else if (key == "benign_texture") cfg.data.benign_texture = parse_range(value, ctx, line);
    else if (key == "melanoma_texture") cfg.data.melanoma_texture = parse_range(value, ctx, line);
    else fail(ctx, line, "unknown key '" + key + "' in [data]");
  } else {
    fail(ctx, line, "unknown section [" + section + "]");
  }
}

}  // namespace

namespace {

void apply_config_stream(RunConfig& config, std::istream& is, const std::string& ctx) {
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ctx, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(ctx, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ctx, line_no, "empty key");
    if (section.empty()) fail(ctx, line_no, "key outside of any section");
    apply_key(config, section, key, value, ctx, line_no);
  }
}

}  // namespace

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  apply_config_stream(config, is, path.string());
}

void apply_config_text(RunConfig& config, const std::string& text,
                       const std::string& context) {
  std::istringstream is(text);
  apply_config_stream(config, is, context);
}

bool apply_env_seed(RunConfig& config) {
  const char* env = std::getenv("LESIONCASCADE_SEED");
  if (env == nullptr || *env == '\0') return false;
  try {
    std::size_t idx = 0;
    const long long v = std::stoll(env, &idx);
    if (idx != std::string(env).size()) throw std::invalid_argument(env);
    config.train.seed = static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string("LESIONCASCADE_SEED is not an integer: '") + env + "'");
  }
  return true;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_range(const ValueRange& r) {
  return fmt_double(r.lo) + "," + fmt_double(r.hi);
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string render_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\n";
  os << "stages = " << c.model.num_stages << "\n";
  os << "block_channels = " << c.model.block_channels[0];
  for (std::size_t i = 1; i < c.model.block_channels.size(); ++i) {
    os << "," << c.model.block_channels[i];
  }
  os << "\n";
  os << "classes = " << c.model.cls_classes << "\n";
  os << "beta = " << fmt_double(c.model.beta) << "\n";
  os << "precision = float64\n";
  os << "use_lpse = " << fmt_bool(c.model.use_lpse) << "\n";
  os << "use_dgff = " << fmt_bool(c.model.use_dgff) << "\n";
  os << "share_stage_params = " << fmt_bool(c.model.share_stage_params) << "\n";
  os << "supervise_all_stages = " << fmt_bool(c.model.supervise_all_stages) << "\n";
  os << "per_channel_mix = " << fmt_bool(c.model.per_channel_mix) << "\n";
  os << "\n[train]\n";
  os << "batch_size = " << c.train.batch_size << "\n";
  os << "base_lr = " << fmt_double(c.train.base_lr) << "\n";
  os << "max_iters = " << c.train.max_iterations << "\n";
  os << "warmup_iters = " << c.train.warmup_iterations << "\n";
  os << "seed = " << c.train.seed << "\n";
  os << "poly_power = " << fmt_double(c.train.poly_power) << "\n";
  os << "eval_interval = " << c.train.eval_interval << "\n";
  os << "max_extent = " << c.train.max_extent << "\n";
  os << "augment = " << fmt_bool(c.train.augment) << "\n";
  os << "deterministic = " << fmt_bool(c.train.deterministic) << "\n";
  os << "\n[data]\n";
  os << "train_per_class = " << c.data.train_per_class << "\n";
  os << "test_per_class = " << c.data.test_per_class << "\n";
  os << "image_size = " << c.data.image_size << "\n";
  os << "format = " << c.data.format << "\n";
  os << "artifact_probability = " << fmt_double(c.data.artifact_probability) << "\n";
  os << "benign_irregularity = " << fmt_range(c.data.benign_irregularity) << "\n";
  os << "melanoma_irregularity = " << fmt_range(c.data.melanoma_irregularity) << "\n";
  os << "benign_texture = " << fmt_range(c.data.benign_texture) << "\n";
  os << "melanoma_texture = " << fmt_range(c.data.melanoma_texture) << "\n";
  return os.str();
}

}  // namespace lc
