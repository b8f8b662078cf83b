#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "utfe/bench/evaluate.hpp"
#include "utfe/data/dataset.hpp"
#include "utfe/data/split.hpp"
#include "utfe/data/synthetic.hpp"
#include "utfe/extractors/train.hpp"

namespace utfe::bench {

class SpecError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

struct RowSpec {
  extractors::ExtractorKind kind = extractors::ExtractorKind::dct;
  extractors::FeatureSize features;
  extractors::TrainConfig train;
  std::size_t line = 0;  // of the "[row]" header
};

/// Parsed experiment file. The corpus is either a directory or a synthetic
/// configuration; it is split once and every row trains on the same part.
struct ExperimentSpec {
  std::optional<std::filesystem::path> data_dir;
  data::SynthConfig synth;
  double train_fraction = 0.625;
  std::uint64_t split_seed = 1;
  bool eval_noisy = false;
  data::NoiseConfig eval_noise{0.2, 0};
  std::vector<RowSpec> rows;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class U>
U parse_number(const std::string& v, const std::string& where) {
  U out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw SpecError(where + ": cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw SpecError(where + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Flat "key = value" text; "[row]" starts an extractor row, '#' starts a
/// comment. Training keys given before the first row become row defaults.
///
///   synth_count = 3200        or   data = corpus/
///   synth_seed = 1
///   train_fraction = 0.625
///   split_seed = 1
///   eval_noisy = true
///   eval_sigma = 0.2
///   eval_seed = 9
///   epochs = 50
///   [row]
///   kind = dcae
///   features = 2x(5,6)
///   seed = 1                  lr, batch, sigma, noise_seed, target also accepted
inline ExperimentSpec parse_experiment(std::string_view text, const std::filesystem::path& base_dir = {}) {
  ExperimentSpec spec;
  extractors::TrainConfig defaults;
  defaults.epochs = 50;
  std::optional<double> default_sigma;
  std::optional<std::uint64_t> eval_seed;

  struct Pending {
    RowSpec row;
    std::optional<double> sigma;
    std::optional<std::uint64_t> noise_seed;
    bool has_kind = false, has_features = false;
  };
  std::vector<Pending> rows;
  std::map<std::string, std::size_t> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line == "[row]") {
      Pending p;
      p.row.train = defaults;
      p.row.line = line_no;
      p.sigma = default_sigma;
      rows.push_back(std::move(p));
      seen.clear();
      continue;
    }
    if (line.front() == '[') throw SpecError(where + ": unknown section " + line);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError(where + ": expected key = value");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || value.empty()) throw SpecError(where + ": empty key or value");
    if (seen.count(key)) throw SpecError(where + ": duplicate key '" + key + "'");
    seen[key] = line_no;

    extractors::TrainConfig& cfg = rows.empty() ? defaults : rows.back().row.train;
    if (key == "epochs") {
      cfg.epochs = detail::parse_number<std::size_t>(value, where);
    } else if (key == "lr") {
      cfg.learning_rate = detail::parse_number<double>(value, where);
    } else if (key == "batch") {
      cfg.batch_size = detail::parse_number<std::size_t>(value, where);
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(value, where);
    } else if (key == "target") {
      if (value == "clean") cfg.target = extractors::DenoisingTarget::clean;
      else if (value == "noisy") cfg.target = extractors::DenoisingTarget::noisy;
      else throw SpecError(where + ": target must be clean or noisy");
    } else if (key == "sigma") {
      const double s = detail::parse_number<double>(value, where);
      (rows.empty() ? default_sigma : rows.back().sigma) = s;
    } else if (!rows.empty()) {
      Pending& p = rows.back();
      if (key == "kind") {
        const auto k = extractors::parse_kind(value);
        if (!k) throw SpecError(where + ": unknown kind '" + value + "'");
        p.row.kind = *k;
        p.has_kind = true;
      } else if (key == "features") {
        try {
          p.row.features = extractors::FeatureSize::parse(value);
        } catch (const Error& e) {
          throw SpecError(where + ": " + e.what());
        }
        p.has_features = true;
      } else if (key == "noise_seed") {
        p.noise_seed = detail::parse_number<std::uint64_t>(value, where);
      } else {
        throw SpecError(where + ": unknown row key '" + key + "'");
      }
    } else if (key == "data") {
      std::filesystem::path p(value);
      spec.data_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    } else if (key == "synth_count") {
      spec.synth.count = detail::parse_number<std::size_t>(value, where);
    } else if (key == "synth_seed") {
      spec.synth.seed = detail::parse_number<std::uint64_t>(value, where);
    } else if (key == "train_fraction") {
      spec.train_fraction = detail::parse_number<double>(value, where);
    } else if (key == "split_seed") {
      spec.split_seed = detail::parse_number<std::uint64_t>(value, where);
    } else if (key == "eval_noisy") {
      spec.eval_noisy = detail::parse_bool(value, where);
    } else if (key == "eval_sigma") {
      spec.eval_noise.sigma = detail::parse_number<double>(value, where);
    } else if (key == "eval_seed") {
      eval_seed = detail::parse_number<std::uint64_t>(value, where);
    } else {
      throw SpecError(where + ": unknown key '" + key + "'");
    }
  }

  if (rows.empty()) throw SpecError("experiment lists no [row] sections");
  spec.eval_noise.seed = eval_seed.value_or(derive_seed(spec.split_seed, 3));
  for (auto& p : rows) {
    const std::string where = "row at line " + std::to_string(p.row.line);
    if (!p.has_kind) throw SpecError(where + ": missing kind");
    if (!p.has_features) throw SpecError(where + ": missing features");
    if (extractors::is_denoising(p.row.kind)) {
      auto noise = extractors::default_noise(p.row.train.seed, p.sigma.value_or(0.2));
      if (p.noise_seed) noise.seed = *p.noise_seed;
      p.row.train.noise = noise;
    }
    spec.rows.push_back(std::move(p.row));
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw SpecError("train_fraction must lie strictly between 0 and 1");
  spec.eval_noise.validate();
  if (!spec.data_dir) spec.synth.validate();
  return spec;
}

inline ExperimentSpec load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_text(path), path.parent_path());
}

struct ReportRow {
  extractors::ExtractorKind kind;
  extractors::FeatureSize features;
  double mse = 0.0;
  double cw_ssim = 0.0;
  double train_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;
};

/// Thrown when one row of a comparison fails; names the row.
class RowError : public Error {
 public:
  RowError(std::size_t index, const std::string& what) : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

using RowCallback = std::function<void(std::size_t index, const ReportRow&)>;

inline data::Split<data::Image> experiment_split(const ExperimentSpec& spec) {
  auto images = spec.data_dir ? data::load_corpus(*spec.data_dir) : data::generate_synthetic(spec.synth);
  if (images.size() < 2) throw ArgumentError("experiment corpus needs at least 2 images");
  auto parts = data::split(std::move(images), spec.train_fraction, spec.split_seed);
  if (parts.train.empty() || parts.test.empty()) throw ArgumentError("train/test split leaves a part empty");
  return parts;
}

/// Trains and scores every row in spec order on one shared split.
inline EvalReport run_compare(const ExperimentSpec& spec, const RowCallback& on_row = {}) {
  if (spec.rows.empty()) throw SpecError("experiment lists no rows");
  const auto parts = experiment_split(spec);
  const std::optional<data::NoiseConfig> eval_noise =
      spec.eval_noisy ? std::optional(spec.eval_noise) : std::nullopt;

  EvalReport report;
  for (std::size_t i = 0; i < spec.rows.size(); ++i) {
    const RowSpec& row = spec.rows[i];
    try {
      auto model = extractors::build_extractor(row.kind, row.features, row.train.seed);
      const auto t0 = std::chrono::steady_clock::now();
      if (row.kind != extractors::ExtractorKind::dct) extractors::train(model, parts.train, row.train);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto ev = evaluate(model, parts.test, eval_noise);
      report.rows.push_back({row.kind, row.features, ev.mse.mean, ev.cw_ssim.mean, seconds, row.train.seed});
      if (on_row) on_row(i, report.rows.back());
    } catch (const Error& e) {
      throw RowError(i, "row " + std::to_string(i + 1) + " (" + to_string(row.kind) + " " + row.features.str() +
                            ", line " + std::to_string(row.line) + "): " + e.what());
    }
  }
  return report;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string kind_label(extractors::ExtractorKind k) {
  std::string s = to_string(k);
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

/// CSV with header kind,features,K,mse,cw_ssim,train_seconds,seed. Wall
/// times vary run to run, so the column stays empty unless requested.
inline std::string report_csv(const EvalReport& report, bool with_timings = false) {
  std::string out = "kind,features,K,mse,cw_ssim,train_seconds,seed\n";
  for (const auto& r : report.rows) {
    out += to_string(r.kind) + ",\"" + r.features.str() + "\"," + std::to_string(r.features.length()) + "," +
           format_fixed(r.mse, 4) + "," + format_fixed(r.cw_ssim, 4) + "," +
           (with_timings ? format_fixed(r.train_seconds, 1) : std::string()) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

inline std::string report_table(const EvalReport& report) {
  std::vector<std::vector<std::string>> cells{{"Model", "Features", "K", "test MSE", "test CW-SSIM", "train s", "seed"}};
  for (const auto& r : report.rows)
    cells.push_back({kind_label(r.kind), r.features.str(), std::to_string(r.features.length()), format_fixed(r.mse, 2),
                     format_fixed(r.cw_ssim, 4), format_fixed(r.train_seconds, 1), std::to_string(r.seed)});
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const auto pad = std::string(width[c] - cells[r][c].size(), ' ');
      // Text columns left-aligned, numbers right-aligned.
      out += c < 2 ? cells[r][c] + pad : pad + cells[r][c];
      out += c + 1 < cells[r].size() ? "  " : "\n";
    }
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  return out;
}

}  // namespace utfe::bench
