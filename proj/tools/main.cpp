// lesioncascade command line: synthesize datasets, train the cascade,
// evaluate checkpoints, and run single-image predictions.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lesioncascade/checkpoint.hpp"
#include "lesioncascade/config.hpp"
#include "lesioncascade/data.hpp"
#include "lesioncascade/errors.hpp"
#include "lesioncascade/image_io.hpp"
#include "lesioncascade/model.hpp"
#include "lesioncascade/parallel.hpp"
#include "lesioncascade/random.hpp"
#include "lesioncascade/trainer.hpp"

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : "nan";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw lc::IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw lc::IoError("write failed: " + path.string());
}

// Flag values mirroring the config file keys. An option only overrides the
// config when it was actually passed, so precedence stays
// defaults < LESIONCASCADE_SEED < --config file < flags.
struct Flags {
  std::string config_file;
  int stages = 0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::int64_t warmup_iters = 0;
  std::int64_t max_iters = 0;
  int batch_size = 0;
  double base_lr = 0.0;
  std::int64_t eval_interval = 0;
  std::int64_t max_extent = 0;
  bool deterministic = false;
  bool no_augment = false;
  int threads = -1;
  int image_size = 0;
  int train_per_class = 0;
  int test_per_class = 0;
  std::string format;
  double artifact_probability = 0.0;

  CLI::App* cmd = nullptr;

  // Runtime-only knobs, meaningful even when the model comes from a
  // checkpoint.
  void attach_runtime(CLI::App* app) {
    cmd = app;
    app->add_option("--max-extent", max_extent, "longest input side after preprocessing");
    app->add_flag("--deterministic", deterministic, "single-threaded numerics");
    app->add_option("--threads", threads, "worker thread cap (0 = hardware)");
  }

  void attach(CLI::App* app, bool with_train, bool with_data) {
    attach_runtime(app);
    app->add_option("--config", config_file, "settings file ([model]/[train]/[data] sections)")
        ->check(CLI::ExistingFile);
    app->add_option("--stages", stages, "cascade depth");
    app->add_option("--beta", beta, "diagnosis loss weight");
    app->add_option("--seed", seed, "master random seed");
    if (with_train) {
      app->add_option("--warmup-iters", warmup_iters, "iterations with diagnosis weight 0");
      app->add_option("--max-iters", max_iters, "total optimizer steps");
      app->add_option("--batch-size", batch_size, "samples per step");
      app->add_option("--base-lr", base_lr, "initial learning rate");
      app->add_option("--eval-interval", eval_interval, "iterations between metric rows");
      app->add_flag("--no-augment", no_augment, "disable training augmentation");
    }
    if (with_data) {
      app->add_option("--image-size", image_size, "synthetic frame size");
      app->add_option("--train-per-class", train_per_class, "training samples per class");
      app->add_option("--test-per-class", test_per_class, "test samples per class");
      app->add_option("--format", format, "image format, png or ppm");
      app->add_option("--artifact-probability", artifact_probability,
                      "hair artifact rate per sample");
    }
  }

  bool given(const char* name) const {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  }

  lc::RunConfig resolve() const {
    lc::RunConfig cfg;
    lc::apply_env_seed(cfg);
    if (given("--config")) lc::apply_config_file(cfg, config_file);
    if (given("--stages")) cfg.model.num_stages = stages;
    if (given("--beta")) cfg.model.beta = beta;
    if (given("--seed")) cfg.train.seed = seed;
    if (given("--warmup-iters")) cfg.train.warmup_iterations = warmup_iters;
    if (given("--max-iters")) cfg.train.max_iterations = max_iters;
    if (given("--batch-size")) cfg.train.batch_size = batch_size;
    if (given("--base-lr")) cfg.train.base_lr = base_lr;
    if (given("--eval-interval")) cfg.train.eval_interval = eval_interval;
    if (given("--max-extent")) cfg.train.max_extent = max_extent;
    if (given("--deterministic")) cfg.train.deterministic = true;
    if (given("--no-augment")) cfg.train.augment = false;
    if (given("--image-size")) cfg.data.image_size = image_size;
    if (given("--train-per-class")) cfg.data.train_per_class = train_per_class;
    if (given("--test-per-class")) cfg.data.test_per_class = test_per_class;
    if (given("--format")) cfg.data.format = format;
    if (given("--artifact-probability"))
      cfg.data.artifact_probability = artifact_probability;
    if (threads >= 0) lc::set_max_threads(threads);
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
  }
};

std::vector<lc::Sample> load_with_warnings(const fs::path& dir) {
  std::vector<std::string> warnings;
  auto samples = lc::load_dataset(dir, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (samples.empty()) throw lc::IoError("no usable samples in " + dir.string());
  return samples;
}

// Rebuilds the model recorded in a checkpoint: the metadata block is the
// config echo written at save time.
struct LoadedModel {
  lc::RunConfig cfg;
  lc::CascadeModel model;
};

LoadedModel load_model(const fs::path& ckpt_path) {
  const lc::Checkpoint ckpt = lc::read_checkpoint(ckpt_path);
  lc::RunConfig cfg;
  lc::apply_config_text(cfg, ckpt.metadata, ckpt_path.string() + " metadata");
  cfg.model.validate();
  lc::CascadeModel model(cfg.model, /*seed=*/0);
  lc::load_parameters(model.params(), ckpt);
  return {cfg, std::move(model)};
}

std::string metrics_csv(const std::vector<lc::MetricsRow>& rows) {
  std::string out = "iteration,lr,loss,seg_jaccard,cls_auc\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + fmt(r.lr) + "," + fmt(r.loss) + "," +
           fmt(r.seg_jaccard) + "," + fmt(r.cls_auc) + "\n";
  }
  return out;
}

std::string eval_csv(const lc::EvalResult& ev) {
  std::string out = "metric,value\n";
  out += "count," + std::to_string(ev.count) + "\n";
  out += "seg_jaccard," + fmt(ev.seg_jaccard) + "\n";
  out += "seg_dice," + fmt(ev.seg_dice) + "\n";
  out += "seg_accuracy," + fmt(ev.seg_accuracy) + "\n";
  out += "seg_balanced," + fmt(ev.seg_balanced) + "\n";
  out += "cls_accuracy," + fmt(ev.cls_accuracy) + "\n";
  out += "cls_sensitivity," + fmt_opt(ev.cls_sensitivity) + "\n";
  out += "cls_specificity," + fmt_opt(ev.cls_specificity) + "\n";
  out += "cls_auc," + fmt_opt(ev.cls_auc) + "\n";
  return out;
}

void print_eval(const lc::EvalResult& ev) {
  std::cout << "samples " << ev.count << "  JA " << fmt(ev.seg_jaccard) << "  DI "
            << fmt(ev.seg_dice) << "  AC " << fmt(ev.seg_accuracy) << "  cls-acc "
            << fmt(ev.cls_accuracy) << "  AUC " << fmt_opt(ev.cls_auc) << "\n";
}

int run_synth(const Flags& flags, const fs::path& out_dir) {
  const lc::RunConfig cfg = flags.resolve();
  const std::string ext = "." + cfg.data.format;

  lc::SynthConfig train_cfg = cfg.data.synth(cfg.data.train_per_class, cfg.train.seed);
  lc::SynthConfig test_cfg =
      cfg.data.synth(cfg.data.test_per_class, lc::Rng::mix(cfg.train.seed, 0x7e57));
  train_cfg.validate();
  test_cfg.validate();

  fs::create_directories(out_dir);
  lc::write_dataset(out_dir / "train", lc::generate_synthetic(train_cfg), ext);
  lc::write_dataset(out_dir / "test", lc::generate_synthetic(test_cfg), ext);
  write_text(out_dir / "config.ini", lc::render_config(cfg));
  std::cout << "wrote " << 2 * cfg.data.train_per_class << " train / "
            << 2 * cfg.data.test_per_class << " test samples to " << out_dir.string()
            << "\n";
  return 0;
}

int run_train(const Flags& flags, const fs::path& data_dir, const fs::path& out_dir) {
  const lc::RunConfig cfg = flags.resolve();
  const auto train_set = load_with_warnings(data_dir / "train");
  const auto test_set = load_with_warnings(data_dir / "test");

  lc::CascadeModel model(cfg.model, cfg.train.seed);
  const lc::TrainResult result = lc::train(model, train_set, test_set, cfg.train);

  fs::create_directories(out_dir);
  const std::string echo = lc::render_config(cfg);
  write_text(out_dir / "metrics.csv", metrics_csv(result.history));
  write_text(out_dir / "config.ini", echo);
  lc::save_checkpoint(out_dir / "model.ckpt", model.params(), echo);

  const lc::EvalResult ev = lc::evaluate(model, test_set, cfg.train.max_extent);
  print_eval(ev);
  return 0;
}

int run_eval(const Flags& flags, const fs::path& ckpt_path, const fs::path& data_dir,
             const fs::path& out_dir) {
  LoadedModel loaded = load_model(ckpt_path);
  std::int64_t max_extent = loaded.cfg.train.max_extent;
  if (flags.cmd->count("--max-extent")) max_extent = flags.max_extent;
  if (flags.cmd->count("--deterministic") || loaded.cfg.train.deterministic)
    lc::set_max_threads(1);
  else if (flags.threads >= 0)
    lc::set_max_threads(flags.threads);

  const auto samples = load_with_warnings(data_dir);
  const fs::path mask_dir = out_dir / "masks";
  fs::create_directories(mask_dir);

  const lc::EvalResult ev = lc::evaluate(
      loaded.model, samples, max_extent,
      [&](const lc::Sample& s, const lc::BinaryMask& mask) {
        lc::write_image(mask_dir / (s.id + "_mask.png"), lc::mask_to_image(mask));
      });

  write_text(out_dir / "metrics.csv", eval_csv(ev));
  if (ev.cls_auc) {
    std::string roc = "auc," + fmt(*ev.cls_auc) + "\n";
    for (const auto& p : ev.roc.points) roc += fmt(p.fpr) + "," + fmt(p.tpr) + "\n";
    write_text(out_dir / "roc.csv", roc);
  }
  print_eval(ev);
  return 0;
}

int run_predict(const Flags& flags, const fs::path& ckpt_path, const fs::path& image_path,
                const fs::path& out_dir, bool dump_descriptor) {
  LoadedModel loaded = load_model(ckpt_path);
  std::int64_t max_extent = loaded.cfg.train.max_extent;
  if (flags.cmd->count("--max-extent")) max_extent = flags.max_extent;
  if (flags.cmd->count("--deterministic") || loaded.cfg.train.deterministic)
    lc::set_max_threads(1);
  else if (flags.threads >= 0)
    lc::set_max_threads(flags.threads);

  const lc::ImageU8 img = lc::read_image(image_path);
  lc::Sample sample;
  sample.id = image_path.stem().string();
  sample.image = lc::image_to_tensor(img);
  sample.mask = lc::BinaryMask(img.height, img.width);

  const lc::Prediction pred = lc::predict(loaded.model, sample, max_extent);

  fs::create_directories(out_dir);
  lc::write_image(out_dir / "mask.png", lc::mask_to_image(pred.mask));

  std::string diag = "stage,p_non_melanoma,p_melanoma\n";
  for (std::size_t t = 0; t < pred.stages.size(); ++t) {
    const lc::Tensor& p = pred.stages[t].diagnosis.probs;
    diag += std::to_string(t + 1) + "," + fmt(p.at({0})) + "," + fmt(p.at({1})) + "\n";
  }
  write_text(out_dir / "diagnosis.csv", diag);

  if (dump_descriptor) {
    if (!loaded.cfg.model.use_lpse)
      throw lc::ConfigError("--dump-descriptor needs a model trained with use_lpse");
    std::string csv =
        "stage,channel,center_mean,periphery_mean,center_std,periphery_std\n";
    for (std::size_t t = 0; t < pred.stages.size(); ++t) {
      const lc::Tensor& d = pred.stages[t].descriptor.values;
      for (std::int64_t k = 0; k < d.dim(0); ++k) {
        csv += std::to_string(t + 1) + "," + std::to_string(k);
        for (std::int64_t j = 0; j < 4; ++j) csv += "," + fmt(d.at({k, j}));
        csv += "\n";
      }
    }
    write_text(out_dir / "descriptor.csv", csv);
  }

  const lc::Tensor& final_probs = pred.stages.back().diagnosis.probs;
  const bool melanoma = final_probs.at({1}) > final_probs.at({0});
  std::cout << (melanoma ? "melanoma" : "non-melanoma") << "  p_melanoma "
            << fmt(final_probs.at({1})) << "  lesion px " << pred.mask.count() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collaborative lesion segmentation / melanoma recognition cascade"};
  app.require_subcommand(1);

  Flags synth_flags, train_flags, eval_flags, predict_flags;
  std::string out_dir, data_dir, ckpt_path, image_path;
  bool dump_descriptor = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dermoscopy dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth_flags.attach(synth, /*with_train=*/false, /*with_data=*/true);

  CLI::App* train = app.add_subcommand("train", "train a cascade on a dataset directory");
  train->add_option("--data", data_dir, "dataset root with train/ and test/")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train_flags.attach(train, /*with_train=*/true, /*with_data=*/false);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", ckpt_path, "model checkpoint")->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_dir, "output directory")->required();
  eval_flags.attach_runtime(eval);

  CLI::App* predict = app.add_subcommand("predict", "segment and classify one image");
  predict->add_option("--checkpoint", ckpt_path, "model checkpoint")->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--image", image_path, "input image (png, ppm, pgm)")->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", out_dir, "output directory")->required();
  predict->add_flag("--dump-descriptor", dump_descriptor,
                    "also write per-stage region statistics");
  predict_flags.attach_runtime(predict);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(synth_flags, out_dir);
    if (train->parsed()) return run_train(train_flags, data_dir, out_dir);
    if (eval->parsed()) return run_eval(eval_flags, ckpt_path, data_dir, out_dir);
    if (predict->parsed())
      return run_predict(predict_flags, ckpt_path, image_path, out_dir, dump_descriptor);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
