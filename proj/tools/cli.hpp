#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "utfe/bench/evaluate.hpp"
#include "utfe/bench/experiment.hpp"
#include "utfe/data/dataset.hpp"
#include "utfe/extractors/serialize.hpp"
#include "utfe/extractors/train.hpp"

namespace utfe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Keeps freed activation buffers in the heap instead of returning them to
/// the kernel after every batch. Process-wide, so only executables call it.
inline void keep_heap_resident() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

inline std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// One decimal per line, 9 significant digits: exact for 32-bit floats.
inline std::string format_vector(std::span<const float> v) {
  std::string out;
  for (float x : v) out += format_g9(x) + "\n";
  return out;
}

inline std::vector<float> parse_vector(std::string_view text) {
  std::vector<float> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = bench::detail::trim(line);
    if (t.empty()) continue;
    float v = 0.0f;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
      throw FormatError("feature line " + std::to_string(line_no) + ": cannot parse '" + t + "' as a number");
    out.push_back(v);
  }
  return out;
}

struct GenDataArgs {
  std::string out;
  std::size_t count = 2000;
  std::uint64_t seed = 1;
  std::optional<double> sigma;
};

struct TrainArgs {
  std::string kind, features, data, out, target = "clean";
  std::size_t epochs = 200, batch = 64;
  double lr = 0.001, sigma = 0.2;
  std::uint64_t seed = 0;
};

struct CodecArgs {
  std::string model, in, out;
};

struct EvaluateArgs {
  std::string model, data, csv;
  bool noisy = false;
  double sigma = 0.2;
  std::uint64_t seed = 0;
};

struct CompareArgs {
  std::string spec, out, table;
  bool timings = false;
};

inline void cmd_gen_data(const GenDataArgs& a, std::ostream& out, std::ostream& err) {
  data::SynthConfig cfg;
  cfg.count = a.count;
  cfg.seed = a.seed;
  auto images = data::generate_synthetic(cfg);
  if (a.sigma) {
    Rng rng(derive_seed(a.seed, extractors::kNoiseStream));
    for (auto& img : images) img.pixels = data::corrupt(img.pixels, *a.sigma, rng);
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.count; ++i) seeds.push_back(data::synthetic_image_seed(a.seed, i));
  data::write_corpus(a.out, images, seeds);
  out << "wrote " << a.count << " images to " << a.out << "\n";
  (void)err;
}

inline void cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const auto kind = extractors::parse_kind(a.kind);
  if (!kind) throw UsageError("unknown kind '" + a.kind + "' (expected dct, ae, dae, cae or dcae)");
  extractors::FeatureSize fs;
  try {
    fs = extractors::FeatureSize::parse(a.features);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const char* training_flags[] = {"--data", "--epochs", "--lr", "--sigma", "--seed", "--batch", "--target"};
  if (*kind == extractors::ExtractorKind::dct) {
    for (const char* flag : training_flags)
      if (sub.count(flag)) throw UsageError(std::string("--kind dct takes no training flags, got ") + flag);
  } else {
    if (a.data.empty()) throw UsageError("--data is required for trainable kinds");
    if (!extractors::is_denoising(*kind) && (sub.count("--sigma") || sub.count("--target")))
      throw UsageError("--sigma and --target apply to dae and dcae only");
  }
  extractors::ExtractorModel model;
  try {
    model = extractors::build_extractor(*kind, fs, a.seed);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (*kind != extractors::ExtractorKind::dct) {
    extractors::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    if (extractors::is_denoising(*kind)) {
      if (!sub.count("--sigma")) err << "note: --sigma not given, using default speckle sigma " << a.sigma << "\n";
      cfg.noise = extractors::default_noise(a.seed, a.sigma);
      if (a.target == "clean") cfg.target = extractors::DenoisingTarget::clean;
      else if (a.target == "noisy") cfg.target = extractors::DenoisingTarget::noisy;
      else throw UsageError("--target must be clean or noisy");
    }
    try {
      cfg.validate(*kind);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
    const auto images = data::load_corpus(a.data, model.input_h, model.input_w);
    if (images.empty()) throw TrainingError("no images found in " + a.data);
    extractors::train(model, images, cfg, [&](std::size_t epoch, double loss) {
      out << epoch << "\t" << format_g9(loss) << "\n" << std::flush;
    });
  }
  extractors::save_model(model, a.out);
  err << "saved " << to_string(model.kind) << " " << model.feature_size.str() << " (K=" << model.feature_size.length()
      << ") to " << a.out << "\n";
}

inline void cmd_encode(const CodecArgs& a) {
  const auto model = extractors::load_model(a.model);
  const auto image = data::load_pgm(a.in);
  write_text_atomic(a.out, format_vector(extractors::encode(model, image.pixels)));
}

inline void cmd_reconstruct(const CodecArgs& a) {
  const auto model = extractors::load_model(a.model);
  const auto features = parse_vector(read_text(a.in));
  data::save_pgm(extractors::reconstruct(model, features), a.out);
}

inline void cmd_evaluate(const EvaluateArgs& a, const CLI::App& sub, std::ostream& out) {
  if (!a.noisy && (sub.count("--sigma") || sub.count("--seed"))) throw UsageError("--sigma and --seed need --noisy");
  if (!(a.sigma >= 0.0)) throw UsageError("--sigma must be >= 0");
  const auto model = extractors::load_model(a.model);
  const auto images = data::load_corpus(a.data, model.input_h, model.input_w);
  if (images.empty()) throw IoError("no images found in " + a.data);
  const auto noise = a.noisy ? std::optional(data::NoiseConfig{a.sigma, a.seed}) : std::nullopt;
  const auto ev = bench::evaluate(model, images, noise);
  out << "images   " << images.size() << (a.noisy ? "  (noisy inputs, sigma " + format_g9(a.sigma) + ")" : "")
      << "\n";
  out << "MSE      " << bench::format_fixed(ev.mse.mean, 4) << " ± " << bench::format_fixed(ev.mse.std, 4) << "\n";
  out << "CW-SSIM  " << bench::format_fixed(ev.cw_ssim.mean, 6) << " ± " << bench::format_fixed(ev.cw_ssim.std, 6)
      << "\n";
  if (!a.csv.empty()) {
    std::string csv = "index,mse,cw_ssim\n";
    for (std::size_t i = 0; i < ev.images.size(); ++i)
      csv += std::to_string(i) + "," + format_g9(ev.images[i].mse) + "," + format_g9(ev.images[i].cw_ssim) + "\n";
    write_text_atomic(a.csv, csv);
  }
}

inline void cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  bench::ExperimentSpec spec;
  try {
    spec = bench::load_experiment(a.spec);
  } catch (const bench::SpecError& e) {
    throw UsageError(a.spec + ": " + e.what());
  }
  const auto report = bench::run_compare(spec, [&](std::size_t i, const bench::ReportRow& r) {
    err << "[" << i + 1 << "/" << spec.rows.size() << "] " << to_string(r.kind) << " " << r.features.str()
        << "  mse " << bench::format_fixed(r.mse, 4) << "  cw_ssim " << bench::format_fixed(r.cw_ssim, 4) << "  ("
        << bench::format_fixed(r.train_seconds, 1) << " s)\n";
  });
  const std::string table = bench::report_table(report);
  write_text_atomic(a.out, bench::report_csv(report, a.timings));
  if (!a.table.empty()) write_text_atomic(a.table, table);
  out << table;
}

/// Runs the command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Unsupervised feature extractors for ultrasound tongue images", "utfe"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic PGM corpus and manifest");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of images")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed");
  gen_cmd->add_option("--sigma", gen.sigma, "Also apply speckle noise of this sigma")->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Build (and for auto-encoders, train) an extractor");
  train_cmd->add_option("--kind", tr.kind, "dct, ae, dae, cae or dcae")->required();
  train_cmd->add_option("--features", tr.features, "Feature size Cx(h,w), e.g. 2x(5,6)")->required();
  train_cmd->add_option("--data", tr.data, "Training corpus directory");
  train_cmd->add_option("--out", tr.out, "Model file to write")->required();
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--sigma", tr.sigma, "Speckle sigma for dae/dcae")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tr.seed, "Seed for initialization, shuffling and noise");
  train_cmd->add_option("--batch", tr.batch, "Minibatch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--target", tr.target, "Denoising target: clean or noisy");

  CodecArgs enc, rec;
  auto* enc_cmd = app.add_subcommand("encode", "Write the feature vector of one image");
  enc_cmd->add_option("--model", enc.model, "Model file")->required();
  enc_cmd->add_option("--in", enc.in, "Input PGM")->required();
  enc_cmd->add_option("--out", enc.out, "Output vector text")->required();
  auto* rec_cmd = app.add_subcommand("reconstruct", "Rebuild an image from a feature vector");
  rec_cmd->add_option("--model", rec.model, "Model file")->required();
  rec_cmd->add_option("--in", rec.in, "Input vector text")->required();
  rec_cmd->add_option("--out", rec.out, "Output PGM")->required();

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score reconstructions by MSE and CW-SSIM");
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--data", ev.data, "Corpus directory")->required();
  eval_cmd->add_flag("--noisy", ev.noisy, "Feed speckled inputs, score against the clean images");
  eval_cmd->add_option("--sigma", ev.sigma, "Speckle sigma with --noisy");
  eval_cmd->add_option("--seed", ev.seed, "Noise seed with --noisy");
  eval_cmd->add_option("--csv", ev.csv, "Per-image CSV output");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Train and score every row of an experiment file");
  cmp_cmd->add_option("--spec", cmp.spec, "Experiment file")->required();
  cmp_cmd->add_option("--out", cmp.out, "CSV report")->required();
  cmp_cmd->add_option("--table", cmp.table, "Also write the text table here");
  cmp_cmd->add_flag("--timings", cmp.timings, "Fill the train_seconds column (makes the CSV run-dependent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) cmd_gen_data(gen, out, err);
    else if (*train_cmd) cmd_train(tr, *train_cmd, out, err);
    else if (*enc_cmd) cmd_encode(enc);
    else if (*rec_cmd) cmd_reconstruct(rec);
    else if (*eval_cmd) cmd_evaluate(ev, *eval_cmd, out);
    else if (*cmp_cmd) cmd_compare(cmp, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace utfe::cli
