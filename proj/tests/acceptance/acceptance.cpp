#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>

#include "cli.hpp"
#include "utfe/nn/layers.hpp"
#include "utfe/nn/loss.hpp"
#include "utfe/signal/cw_ssim.hpp"
#include "utfe/signal/dct.hpp"
#include "utfe/signal/metrics.hpp"

using namespace utfe;
using namespace utfe::extractors;
namespace fs = std::filesystem;
using D = BasicTensor<double>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("utfe_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<data::Image> synthetic(std::size_t count, std::uint64_t seed = 1) {
  data::SynthConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  return data::generate_synthetic(cfg);
}

// ---------------------------------------------------------------------------
// gradients

constexpr double kStep = 1e-3;
constexpr int kInstances = 24;

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

double dot(const D& a, const D& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double fd_error(D& x, const std::function<double()>& loss, const D& analytic) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kStep;
    const double up = loss();
    x[i] = saved - kStep;
    const double down = loss();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2 * kStep)));
  }
  return worst;
}

D away_from_zero(Rng& rng, const Shape& s) {
  D x = normal<double>(rng, s, 0.0, 1.0);
  for (auto& v : x.values())
    if (std::abs(v) < 10 * kStep) v = v < 0 ? v - 10 * kStep : v + 10 * kStep;
  return x;
}

Outcome gradient_correctness() {
  using namespace nn;
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::vector<std::pair<std::string, double>> worst;
  auto record = [&](const std::string& layer, const std::function<double()>& instance) {
    double w = 0.0;
    for (int i = 0; i < kInstances; ++i) w = std::max(w, instance());
    worst.emplace_back(layer, w);
  };

  record("dense", [&] {
    const std::size_t n = 1 + rng.below(3), in = 1 + rng.below(12), out = 1 + rng.below(12);
    D x = normal<double>(rng, {n, in}, 0.0, 1.0), w = normal<double>(rng, {out, in}, 0.0, 1.0),
      b = normal<double>(rng, {out}, 0.0, 1.0);
    const D r = normal<double>(rng, {n, out}, 0.0, 1.0);
    auto loss = [&] { return dot(r, dense_forward(x, w, b)); };
    const auto g = dense_backward(x, w, r);
    return std::max({fd_error(x, loss, g.input), fd_error(w, loss, g.weights), fd_error(b, loss, g.biases)});
  });
  int algo_index = 0;
  record("conv2d", [&] {
    const auto algo = std::array{ConvAlgo::im2col, ConvAlgo::per_offset, ConvAlgo::expanded_output}[algo_index++ % 3];
    const std::size_t n = 1 + rng.below(2), ci = 1 + rng.below(4), co = 1 + rng.below(4);
    const std::size_t h = 3 + rng.below(6), w = 3 + rng.below(6), kh = 1 + rng.below(4), kw = 1 + rng.below(4);
    D x = normal<double>(rng, {n, ci, h, w}, 0.0, 1.0), wt = normal<double>(rng, {co, ci, kh, kw}, 0.0, 1.0),
      b = normal<double>(rng, {co}, 0.0, 1.0);
    const D r = normal<double>(rng, {n, co, h, w}, 0.0, 1.0);
    auto loss = [&] { return dot(r, conv2d_forward(x, wt, b, algo)); };
    const auto g = conv2d_backward(x, wt, r, true, algo);
    return std::max({fd_error(x, loss, g.input), fd_error(wt, loss, g.weights), fd_error(b, loss, g.biases)});
  });
  record("maxpool2d", [&] {
    const std::size_t ph = 1 + rng.below(3), pw = 1 + rng.below(3);
    D x({1 + rng.below(3), ph * (1 + rng.below(3)), pw * (1 + rng.below(3))});
    // Distinct values spaced well beyond the probe step keep each argmax fixed.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i = 0; i < x.size(); ++i) x[order[i]] = 0.01 * static_cast<double>(i);
    const auto fwd = maxpool2d_forward(x, ph, pw);
    const D r = normal<double>(rng, fwd.output.shape(), 0.0, 1.0);
    return fd_error(x, [&] { return dot(r, maxpool2d_forward(x, ph, pw).output); }, maxpool2d_backward(fwd.mask, r));
  });
  record("upsample2d", [&] {
    const std::size_t fh = 1 + rng.below(3), fw = 1 + rng.below(3);
    D x = normal<double>(rng, {1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4)}, 0.0, 1.0);
    const D r = normal<double>(rng, upsample2d_forward(x, fh, fw).shape(), 0.0, 1.0);
    return fd_error(x, [&] { return dot(r, upsample2d_forward(x, fh, fw)); }, upsample2d_backward(r, fh, fw));
  });
  record("sigmoid", [&] {
    const Shape s{1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(5)};
    D x = normal<double>(rng, s, 0.0, 2.0);
    const D r = normal<double>(rng, s, 0.0, 1.0);
    return fd_error(x, [&] { return dot(r, sigmoid_forward(x)); }, sigmoid_backward(sigmoid_forward(x), r));
  });
  record("relu", [&] {
    const Shape s{1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(5)};
    D x = away_from_zero(rng, s);
    const D r = normal<double>(rng, s, 0.0, 1.0);
    return fd_error(x, [&] { return dot(r, relu_forward(x)); }, relu_backward(x, r));
  });
  record("mse", [&] {
    const Shape s{1 + rng.below(4), 1 + rng.below(6)};
    D p = normal<double>(rng, s, 0.0, 1.0);
    const D t = normal<double>(rng, s, 0.0, 1.0);
    return fd_error(p, [&] { return mse_loss(p, t).loss; }, mse_loss(p, t).grad);
  });

  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 60.0;
  std::string detail;
  for (const auto& [layer, w] : worst) {
    ok = ok && w < 1e-3;
    detail += fmt("%s %.1e, ", layer.c_str(), w);
  }
  return {ok, fmt("max rel err over %d instances each: %s%.1f s", kInstances, detail.c_str(), elapsed)};
}

// ---------------------------------------------------------------------------
// DCT

double energy(const Tensor& t) {
  double s = 0.0;
  for (float v : t.values()) s += static_cast<double>(v) * v;
  return s;
}

Outcome dct_oracle() {
  const auto t0 = Clock::now();
  Rng rng(7);
  double round_trip = 0.0, parseval = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = uniform(rng, {50, 60}, 0.0, 1.0);
    const auto c = signal::dct2(x);
    const auto back = signal::idct2(c);
    for (std::size_t p = 0; p < x.size(); ++p) round_trip = std::max(round_trip, double(std::abs(back[p] - x[p])));
    parseval = std::max(parseval, std::abs(energy(c.coeffs) / energy(x) - 1.0));
  }
  const std::vector<signal::Block> chain{{1, 1}, {5, 6}, {10, 6}, {10, 12}, {25, 30}, {50, 60}};
  std::size_t monotone = 0;
  const auto images = synthetic(100, 5);
  for (const auto& img : images) {
    const auto c = signal::dct2(img.pixels);
    double previous = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const auto& b : chain) {
      const auto approx = signal::idct2(signal::embed_low_freq(signal::select_low_freq(c, b), b, {50, 60}));
      const double m = signal::mse(img.pixels, approx);
      ok = ok && m <= previous + 1e-9;
      previous = m;
    }
    monotone += ok;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = round_trip < 1e-5 && parseval < 1e-4 && monotone == images.size() && elapsed < 30.0;
  return {pass, fmt("round trip %.1e, Parseval %.1e over 1000 images; nested blocks monotone on %zu/100; %.1f s",
                    round_trip, parseval, monotone, elapsed)};
}

// ---------------------------------------------------------------------------
// CW-SSIM

Outcome cw_ssim_axioms() {
  const auto t0 = Clock::now();
  const auto images = synthetic(20, 11);
  double identity = 0.0, symmetry = 0.0;
  for (std::size_t t = 0; t < images.size(); ++t) {
    const auto& x = images[t].pixels;
    Rng rng(derive_seed(42, t));
    const auto y = data::corrupt(x, 0.2, rng);
    identity = std::max(identity, std::abs(signal::cw_ssim(x, x) - 1.0));
    symmetry = std::max(symmetry, std::abs(signal::cw_ssim(x, y) - signal::cw_ssim(y, x)));
  }
  std::vector<double> means;
  for (double sigma : {0.05, 0.1, 0.2, 0.4}) {
    double total = 0.0;
    for (std::size_t t = 0; t < images.size(); ++t) {
      Rng rng(derive_seed(1000, t));
      total += signal::cw_ssim(images[t].pixels, data::corrupt(images[t].pixels, sigma, rng));
    }
    means.push_back(total / static_cast<double>(images.size()));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < means.size(); ++i) monotone = monotone && means[i] <= means[i - 1];
  const double elapsed = seconds_since(t0);
  return {identity <= 1e-6 && symmetry <= 1e-6 && monotone && elapsed < 60.0,
          fmt("|s(x,x)-1| %.1e, asymmetry %.1e, mean over 20 trials at sigma .05/.1/.2/.4: %.4f %.4f %.4f %.4f; %.1f s",
              identity, symmetry, means[0], means[1], means[2], means[3], elapsed)};
}

// ---------------------------------------------------------------------------
// architecture

Outcome architecture_fidelity() {
  const auto image = synthetic(1)[0].pixels;
  struct Case {
    ExtractorKind kind;
    FeatureSize fs;
    std::string label;
    std::size_t k;
  };
  const Case cases[] = {{ExtractorKind::cae, FeatureSize(2, 5, 6), "2x(5,6)", 60},
                        {ExtractorKind::dcae, FeatureSize(2, 5, 6), "2x(5,6)", 60},
                        {ExtractorKind::cae, FeatureSize(1, 5, 6), "1x(5,6)", 30},
                        {ExtractorKind::dcae, FeatureSize(1, 5, 6), "1x(5,6)", 30},
                        {ExtractorKind::ae, FeatureSize(1, 30, 1), "1x(30,1)", 30},
                        {ExtractorKind::ae, FeatureSize(1, 60, 1), "1x(60,1)", 60},
                        {ExtractorKind::dae, FeatureSize(1, 30, 1), "1x(30,1)", 30},
                        {ExtractorKind::dae, FeatureSize(1, 60, 1), "1x(60,1)", 60}};
  std::size_t ok = 0;
  for (const auto& c : cases) {
    const auto m = build_extractor(c.kind, c.fs, 1);
    const Shape map = {c.fs.channels(), c.fs.map_h(), c.fs.map_w()};
    const auto f = encode(m, image);
    const bool good = m.encoder.input_shape() == Shape{1, 50, 60} && m.encoder.output_shape() == map &&
                      m.feature_size.str() == c.label && f.size() == c.k &&
                      reconstruct(m, f).shape() == Shape{50, 60};
    if (!good) std::fprintf(stderr, "  architecture mismatch: %s %s\n", to_string(c.kind).c_str(), c.label.c_str());
    ok += good;
  }
  return {ok == std::size(cases), fmt("%zu/%zu encoder geometries match", ok, std::size(cases))};
}

// ---------------------------------------------------------------------------
// training progress

Outcome training_progress() {
  const auto images = synthetic(2000, 1);
  auto model = build_extractor(ExtractorKind::dcae, FeatureSize(2, 5, 6), 1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 1;
  cfg.noise = default_noise(1);
  const auto t0 = Clock::now();
  const auto result = train(model, images, cfg, [&](std::size_t epoch, double loss) {
    std::fprintf(stderr, "  dcae epoch %zu loss %.6f (%.0f s)\n", epoch, loss, seconds_since(t0));
  });
  const double elapsed = seconds_since(t0);
  const double first = result.loss_history.front(), last = result.loss_history.back();
  return {last < 0.5 * first && elapsed < 900.0,
          fmt("DCAE 2x(5,6), 2000 images, 50 epochs: epoch-1 loss %.5f, final %.5f (ratio %.3f); %.0f s", first, last,
              last / first, elapsed)};
}

// ---------------------------------------------------------------------------
// trend

Outcome table_trend() {
  const auto t0 = Clock::now();
  int ordered = 0, denoising = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    bench::ExperimentSpec spec;
    spec.eval_noisy = true;
    spec.eval_noise = {0.2, derive_seed(spec.split_seed, 3)};
    for (auto [kind, fs] : {std::pair{ExtractorKind::ae, FeatureSize(1, 60, 1)},
                            std::pair{ExtractorKind::dae, FeatureSize(1, 60, 1)},
                            std::pair{ExtractorKind::cae, FeatureSize(2, 5, 6)},
                            std::pair{ExtractorKind::dcae, FeatureSize(2, 5, 6)}}) {
      bench::RowSpec row;
      row.kind = kind;
      row.features = fs;
      row.train.epochs = 50;
      row.train.seed = seed;
      if (is_denoising(kind)) row.train.noise = default_noise(seed);
      spec.rows.push_back(row);
    }
    const auto report = bench::run_compare(spec, [&](std::size_t, const bench::ReportRow& r) {
      std::fprintf(stderr, "  seed %llu %-4s mse %.3f cw_ssim %.4f (%.0f s)\n", static_cast<unsigned long long>(seed),
                   to_string(r.kind).c_str(), r.mse, r.cw_ssim, r.train_seconds);
    });
    const double ae = report.rows[0].mse, dae = report.rows[1].mse, cae = report.rows[2].mse,
                 dcae = report.rows[3].mse;
    ordered += dcae <= cae && cae < ae;
    denoising += dcae <= cae && dae <= ae;
    detail += fmt("seed %llu AE %.2f DAE %.2f CAE %.2f DCAE %.2f; ", static_cast<unsigned long long>(seed), ae, dae,
                  cae, dcae);
  }
  return {ordered >= 2 && denoising >= 2,
          fmt("noisy-input test MSE: %sDCAE<=CAE<AE in %d/3 seeds, denoisers no worse in %d/3 seeds; %.0f s",
              detail.c_str(), ordered, denoising, seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// determinism

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "utfe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != cli::kExitOk) std::fprintf(stderr, "  utfe exited %d: %s", code, err.str().c_str());
  return code;
}

Outcome compare_determinism() {
  const auto dir = scratch("determinism");
  write_text_atomic(dir / "small.exp",
                    "synth_count = 96\nsynth_seed = 2\nepochs = 3\nbatch = 16\neval_noisy = true\n"
                    "[row]\nkind = dct\nfeatures = 1x(10,6)\n"
                    "[row]\nkind = ae\nfeatures = 1x(30,1)\nseed = 4\n"
                    "[row]\nkind = dae\nfeatures = 1x(30,1)\nseed = 4\nsigma = 0.3\n"
                    "[row]\nkind = cae\nfeatures = 1x(5,6)\nseed = 5\n"
                    "[row]\nkind = dcae\nfeatures = 2x(5,6)\nseed = 6\n");
  const int a = run_cli({"compare", "--spec", (dir / "small.exp").string(), "--out", (dir / "a.csv").string()});
  const int b = run_cli({"compare", "--spec", (dir / "small.exp").string(), "--out", (dir / "b.csv").string()});
  if (a != cli::kExitOk || b != cli::kExitOk) return {false, "compare failed"};
  const auto first = read_file(dir / "a.csv"), second = read_file(dir / "b.csv");
  return {first == second && !first.empty(),
          fmt("two runs of a 5-row spec: %zu and %zu bytes, %s", first.size(), second.size(),
              first == second ? "identical" : "different")};
}

// ---------------------------------------------------------------------------
// serialization

std::vector<Tensor> weights_of(const ExtractorModel& m) {
  std::vector<Tensor> out;
  for (const auto* net : {&m.encoder, &m.decoder})
    for (const auto& layer : net->layers())
      for (const auto& p : layer.params) out.push_back(p.value);
  return out;
}

Outcome serialization() {
  const auto dir = scratch("serialization");
  auto model = build_extractor(ExtractorKind::dcae, FeatureSize(2, 5, 6), 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 3;
  cfg.noise = default_noise(3);
  const auto images = synthetic(48, 3);
  train(model, images, cfg);
  save_model(model, dir / "model.bin");
  const auto back = load_model(dir / "model.bin");
  const bool exact = weights_of(back) == weights_of(model) && back.meta == model.meta && back.kind == model.kind &&
                     back.feature_size == model.feature_size && encode_model(back) == encode_model(model);

  const auto bytes = read_file(dir / "model.bin");
  constexpr std::size_t kHeader = 14;
  Rng rng(99);
  int detected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto corrupt = bytes;
    const std::size_t at = kHeader + rng.below(corrupt.size() - kHeader);
    corrupt[at] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    write_file_atomic(dir / "corrupt.bin", corrupt);
    try {
      load_model(dir / "corrupt.bin");
    } catch (const ModelFileError& e) {
      detected += e.code() == ModelFileError::Code::checksum;
    }
  }
  return {exact && detected == 100, fmt("round trip %s (%zu bytes); checksum caught %d/100 single-byte corruptions",
                                        exact ? "bit-exact" : "differs", bytes.size(), detected)};
}

// ---------------------------------------------------------------------------
// degeneracy

Outcome denoising_degeneracy() {
  const auto images = synthetic(64, 8);
  bool identical = true;
  std::string detail;
  for (auto [plain, noisy, fs] : {std::tuple{ExtractorKind::ae, ExtractorKind::dae, FeatureSize(1, 30, 1)},
                                  std::tuple{ExtractorKind::cae, ExtractorKind::dcae, FeatureSize(2, 5, 6)}}) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 12;
    auto a = build_extractor(plain, fs, 12);
    const auto ha = train(a, images, cfg).loss_history;
    cfg.noise = default_noise(12, 0.0);
    auto b = build_extractor(noisy, fs, 12);
    const auto hb = train(b, images, cfg).loss_history;
    const bool same = ha == hb && weights_of(a) == weights_of(b);
    identical = identical && same;
    detail += to_string(noisy) + " vs " + to_string(plain) + (same ? " identical" : " differ") + ", ";
  }
  return {identical, detail + "3-epoch histories and weights compared bitwise"};
}

}  // namespace

int main(int argc, char** argv) {
  cli::keep_heap_resident();
  const std::vector<Criterion> criteria{
      {"gradient-correctness", gradient_correctness}, {"dct-oracle", dct_oracle},
      {"cw-ssim-axioms", cw_ssim_axioms},             {"architecture-fidelity", architecture_fidelity},
      {"training-progress", training_progress},       {"table-trend", table_trend},
      {"determinism", compare_determinism},           {"serialization", serialization},
      {"denoising-degeneracy", denoising_degeneracy}};
  const std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
