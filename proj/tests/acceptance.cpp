// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "spmseg/analysis.hpp"
#include "spmseg/augment.hpp"
#include "spmseg/dataset.hpp"
#include "spmseg/io.hpp"
#include "spmseg/preprocess.hpp"
#include "spmseg/rng.hpp"
#include "spmseg/segment.hpp"
#include "spmseg/unet/model.hpp"
#include "support/test_util.hpp"

using namespace spmseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GrayImage normalize_gray(const GrayImage& g) {
  HeightMap h(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) h[i] = g[i];
  return normalize_contrast(h, {SigmaTruncation::two});
}

double pixel_accuracy(const BinaryMask& a, const BinaryMask& b) { return 1.0 - pixel_change_fraction(a, b); }

// Mixed-regime synthetic pattern with soft edges and mild texture.
LabeledImage suite_pattern(int i, std::uint64_t seed_base, int size) {
  static const Regime regimes[] = {Regime::worm_like,    Regime::islands, Regime::cellular,
                                   Regime::labyrinthine, Regime::pores,   Regime::fingering};
  PatternSpec s;
  s.width = s.height = size;
  s.regime = regimes[i % 6];
  s.seed = seed_base + static_cast<std::uint64_t>(i);
  s.coverage = s.regime == Regime::islands ? 0.2 : s.regime == Regime::cellular ? 0.3 : 0.4 + 0.05 * (i % 4);
  s.feature_count = s.regime == Regime::islands ? 6 : 10;
  s.edge_softness = 0.8;
  return synth_pattern(s);
}

std::vector<GrayImage> suite_images(int count, std::uint64_t seed_base, int size) {
  std::vector<GrayImage> out;
  for (int i = 0; i < count; ++i) out.push_back(suite_pattern(i, seed_base, size).image);
  return out;
}

NamedSegmenter local_mean_method() {
  return {"local-mean", [](const GrayImage& g) { return despeckle(threshold_local_mean(g)); }};
}

NamedSegmenter otsu_method() {
  return {"otsu", [](const GrayImage& g) { return despeckle(threshold_otsu(g).mask); }};
}

NoiseCase banding_case() {
  // One period across the image at half the 60/180 phase contrast.
  return {"banding", [](const GrayImage& g, std::size_t i) {
            NoiseSpec s;
            s.kind = NoiseKind::banding;
            s.amplitude = 60.0;
            s.band_period = g.width();
            s.seed = derive_seed(21, {i});
            return add_banding(g, s);
          }};
}

NoiseCase streak_contrast_case() {
  return {"streaking+contrast", [](const GrayImage& g, std::size_t i) {
            const GrayImage mask = synth_streak_mask(g.width(), g.height(), derive_seed(22, {i}));
            NoiseSpec s;
            s.kind = NoiseKind::streak_mask;
            s.seed = derive_seed(23, {i});
            const GrayImage streaked = apply_streak_mask(g, mask, s);
            s.kind = NoiseKind::background_contrast;
            return add_background_contrast(streaked, &mask, s);
          }};
}

// ---------------------------------------------------------------------------

Outcome otsu_oracle() {
  Stopwatch sw;
  int match = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const GrayImage img = test::random_gray(64, 64, derive_seed(1, {seed}));
    match += threshold_otsu(img).threshold == test::brute_force_otsu(img);
  }
  const double t = sw.seconds();
  return {match == 200 && t < 5.0, fmt("%d/200 exact, %.2f s (limit 5 s)", match, t)};
}

Outcome minkowski_oracle() {
  Stopwatch sw;
  long mismatches = 0;
  for (unsigned bits = 0; bits < (1u << 16); ++bits) {
    BinaryMask m(4, 4);
    for (int i = 0; i < 16; ++i) m[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
    mismatches += minkowski(m).euler != test::flood_fill_euler(m);
  }
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const double p = 0.2 + 0.6 * static_cast<double>(seed % 11) / 10.0;
    const BinaryMask m = test::random_mask(32, 32, derive_seed(2, {seed}), p);
    mismatches += minkowski(m).euler != test::flood_fill_euler(m);
  }
  const double t = sw.seconds();
  return {mismatches == 0 && t < 30.0, fmt("%ld mismatches over 65536 + 500 masks, %.2f s (limit 30 s)", mismatches, t)};
}

Outcome preprocessing_exactness() {
  double worst_align = 0.0;
  double worst_detrend = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    Rng rng(derive_seed(3, {k}));
    const int w = 24 + static_cast<int>(rng.below(40));
    const int h = 16 + static_cast<int>(rng.below(40));
    // Textured surface with a random offset per scan line.
    HeightMap map(w, h);
    for (int y = 0; y < h; ++y) {
      const double offset = 20.0 * rng.normal();
      for (int x = 0; x < w; ++x) map(x, y) = std::sin(0.3 * x + 0.2 * y) + 0.3 * rng.normal() + offset;
    }
    const HeightMap aligned = align_rows(map);
    for (int y = 1; y < h; ++y) {
      std::vector<double> d(static_cast<std::size_t>(w));
      for (int x = 0; x < w; ++x) d[static_cast<std::size_t>(x)] = aligned(x, y) - aligned(x, y - 1);
      worst_align = std::max(worst_align, std::abs(median(d)));
    }

    // Planted polynomial background of total degree <= 3.
    double coef[10];
    for (double& c : coef) c = 10.0 * rng.normal();
    HeightMap bg(w, h);
    double norm = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double u = x / 10.0, v = y / 10.0;
        const double terms[10] = {1, u, v, u * u, u * v, v * v, u * u * u, u * u * v, u * v * v, v * v * v};
        double s = 0.0;
        for (int i = 0; i < 10; ++i) s += coef[i] * terms[i];
        bg(x, y) = s;
        norm += s * s;
      }
    const HeightMap residual = detrend_poly(bg, 3);
    double res = 0.0;
    for (double r : residual.data()) res += r * r;
    worst_detrend = std::max(worst_detrend, std::sqrt(res / norm));
  }
  return {worst_align < 1e-9 && worst_detrend < 1e-6,
          fmt("max |row median diff| %.3g (limit 1e-9), max relative residual %.3g (limit 1e-6)", worst_align,
              worst_detrend)};
}

double network_gradient_error() {
  using namespace nn;
  ModelWeights m = build_unet({1, 2, 8}, 40);
  Rng rng(41);
  for (auto& p : m.params)
    if (p.name.ends_with(".bias") || p.name.starts_with("head"))
      for (auto& v : p.value.data()) v = 0.3 * rng.normal();
  Tensor4 x({1, 1, 8, 8});
  Tensor4 t({1, 1, 8, 8});
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform();
    t[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  ForwardTape tape;
  Tensor4 dlogits;
  bce_with_logits(unet_forward(m, x, &tape), t, &dlogits);
  m.zero_grad();
  const Tensor4 dx = unet_backward(m, tape, dlogits);

  auto loss = [&] { return bce_with_logits(unet_forward(m, x), t, nullptr); };
  double worst = 0.0;
  auto check = [&](Tensor4& v, const Tensor4& analytic) {
    double d2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + 1e-3;
      const double up = loss();
      v[i] = keep - 1e-3;
      const double down = loss();
      v[i] = keep;
      const double numeric = (up - down) / 2e-3;
      d2 += (numeric - analytic[i]) * (numeric - analytic[i]);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    worst = std::max(worst, std::sqrt(d2) / std::max(std::sqrt(std::max(a2, n2)), 1e-300));
  };
  check(x, dx);
  for (auto& p : m.params) {
    const Tensor4 analytic = p.grad;
    check(p.value, analytic);
  }
  return worst;
}

Outcome unet_numerics() {
  Stopwatch sw;
  const double grad_err = network_gradient_error();

  PatternSpec s;
  s.width = s.height = 64;
  s.seed = 42;
  const LabeledImage pair = synth_pattern(s);
  nn::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.learning_rate = 2e-3;
  cfg.seed = 43;
  const nn::TrainResult r = nn::train(nn::build_unet({3, 8, 64}, 44), {pair}, cfg);
  const double acc = pixel_accuracy(nn::infer(r.weights, pair.image), pair.mask);
  const double t = sw.seconds();
  const bool ok = grad_err < 1e-5 && acc >= 0.99 && std::abs(r.initial_loss - std::log(2.0)) <= 0.1 && t < 180.0;
  return {ok, fmt("gradient rel. error %.2e (limit 1e-5), overfit accuracy %.4f (>= 0.99), initial BCE %.4f "
                  "(ln 2 +- 0.1), %.1f s (limit 180 s)",
                  grad_err, acc, r.initial_loss, t)};
}

struct DeskModel {
  nn::ModelWeights weights;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

DeskModel train_desk_model() {
  Stopwatch sw;
  std::vector<LabeledImage> clean;
  std::vector<LabeledImage> held_out;
  for (int i = 0; i < 16; ++i) {
    clean.push_back(suite_pattern(i, 1000, 64));
    held_out.push_back(suite_pattern(i, 5000, 64));
  }
  const GrayImage streaks = synth_streak_mask(64, 64, 99);
  std::vector<LabeledImage> pairs = clean;
  for (auto& p : run_process(clean, make_process(3), &streaks, 7)) pairs.push_back({p.image, p.mask});
  for (auto& p : pairs) p.image = normalize_gray(p.image);

  nn::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.learning_rate = 2e-3;
  cfg.seed = 3;
  DeskModel out;
  out.weights = nn::train(nn::build_unet({3, 8, 64}, 11), pairs, cfg).weights;
  double acc = 0.0;
  for (const auto& t : held_out) acc += pixel_accuracy(nn::infer(out.weights, normalize_gray(t.image)), t.mask);
  out.test_accuracy = acc / static_cast<double>(held_out.size());
  out.seconds = sw.seconds();
  std::printf("      (desk model: %zu training pairs)\n", pairs.size());
  return out;
}

Outcome desk_training(const DeskModel& m) {
  return {m.test_accuracy >= 0.95 && m.seconds < 900.0,
          fmt("mean held-out pixel accuracy %.4f (>= 0.95), %.1f s (limit 900 s)", m.test_accuracy, m.seconds)};
}

double mean_of(const std::vector<RobustnessReport>& reports, const std::string& method) {
  for (const auto& r : reports)
    if (r.method == method) return r.mean_fraction;
  return std::nan("");
}

Outcome banding_ordering() {
  const auto reports =
      robustness_study(suite_images(16, 200, 128), {local_mean_method(), otsu_method()}, {banding_case()}, false);
  const double lm = mean_of(reports, "local-mean");
  const double ot = mean_of(reports, "otsu");
  return {lm * 2.0 <= ot && lm < ot,
          fmt("local mean %.4f vs Otsu %.4f, factor %.2f (>= 2)", lm, ot, lm > 0 ? ot / lm : INFINITY)};
}

Outcome streak_ordering() {
  const auto reports = robustness_study(suite_images(16, 300, 128), {local_mean_method(), otsu_method()},
                                        {streak_contrast_case()}, true);
  const double lm = mean_of(reports, "local-mean");
  const double ot = mean_of(reports, "otsu");
  return {ot * 1.5 <= lm && ot < lm,
          fmt("Otsu %.4f vs local mean %.4f, factor %.2f (>= 1.5)", ot, lm, ot > 0 ? lm / ot : INFINITY)};
}

Outcome unet_comparison(const DeskModel& m, const fs::path& csv_path) {
  const nn::ModelWeights& w = m.weights;
  const NamedSegmenter unet{"unet", [&w](const GrayImage& g) { return nn::infer(w, normalize_gray(g)); }};
  const std::vector<NamedSegmenter> methods = {local_mean_method(), otsu_method(), unet};
  auto a = robustness_study(suite_images(16, 200, 128), methods, {banding_case()}, false);
  const auto b = robustness_study(suite_images(16, 300, 128), methods, {streak_contrast_case()}, true);
  a.insert(a.end(), b.begin(), b.end());
  std::ofstream out(csv_path);
  write_robustness_csv(out, a);
  out.close();
  std::string detail = "report only, wrote " + csv_path.filename().string() + ":";
  for (const auto& r : a) detail += fmt(" %s/%s=%.4f", r.method.c_str(), r.noise.c_str(), r.mean_fraction);
  return {static_cast<bool>(out), detail};
}

Outcome sweep_sensitivity() {
  PatternSpec s;
  s.regime = Regime::worm_like;
  s.seed = 9;
  s.edge_softness = 1.5;
  s.texture_amplitude = 10.0;
  const GrayImage img = synth_pattern(s).image;
  const int t0 = threshold_otsu(img).threshold;
  std::vector<int> ts;
  for (int d = -20; d <= 20; d += 5) ts.push_back(std::clamp(t0 + d, 0, 255));
  const auto rows = threshold_sweep(img, ts);
  double lo = INFINITY, hi = -INFINITY, at_otsu = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.stats.euler_norm());
    hi = std::max(hi, r.stats.euler_norm());
    if (r.threshold == t0) at_otsu = r.stats.euler_norm();
  }
  const double scale = std::max(std::abs(lo), std::abs(hi));
  const double variation = scale > 0 ? (hi - lo) / scale : 0.0;
  return {variation >= 0.2, fmt("Otsu t=%d, normalized Euler in [%.5f, %.5f] (at Otsu %.5f), relative variation "
                                "%.2f (>= 0.20)",
                                t0, lo, hi, at_otsu, variation)};
}

// --- CLI determinism --------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SPMSEG_CLI) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::uint64_t fnv1a(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hashes of every output listed in the manifest, plus the manifest itself.
std::map<std::string, std::uint64_t> output_hashes(const fs::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = fnv1a(e.path());
  return out;
}

Outcome cli_determinism(const fs::path& work) {
  const fs::path log = work / "cli.log";
  const std::string w = work.string();
  struct Step {
    std::string name;
    std::string args;
  };
  const std::string img0 = w + "/synth/synth_000.png";
  const std::string img1 = w + "/synth/synth_001.png";
  const std::string msk0 = w + "/synth/synth_000_mask.png";
  const std::string msk1 = w + "/synth/synth_001_mask.png";
  {
    std::ofstream rec(work / "records.jsonl");
    std::vector<DatasetRecord> rs(8);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      rs[i].image = "i" + std::to_string(i) + ".png";
      rs[i].regime = i % 3 ? Regime::islands : Regime::cellular;
    }
    write_records(rec, rs);
  }
  const std::vector<Step> steps = {
      {"synth", "synth --count 2 --width 64 --height 64 --regime labyrinthine --edge-softness 1 --seed 5"},
      {"preprocess", "preprocess --cluster meanshift " + img0 + " " + img1},
      {"augment", "augment --process 1 " + img0 + " " + img1 + " --masks " + msk0 + "," + msk1},
      {"segment", "segment --method local-mean --despeckle " + img0 + " " + img1},
      {"train", "train --inputs " + img0 + "," + img1 + " --masks " + msk0 + "," + msk1 +
                    " --depth 1 --base-channels 4 --input-size 32 --epochs 3 --batch-size 2"},
      {"infer", "infer --weights " + w + "/train/unet.weights " + img0},
      {"minkowski", "minkowski " + msk0 + " " + msk1},
      {"sweep", "sweep " + img0 + " " + img1},
      {"robustness", "robustness --rescale --noises banding,streak_mask,stripes --threads 2 " + img0 + " " + img1},
      {"split", "split --records " + w + "/records.jsonl --assign-u --seed 2"},
  };
  int runs = 0;
  for (const auto& step : steps) {
    const std::string first = w + "/" + step.name;
    if (run_cli(step.args + " --out " + first, log) != 0) return {false, step.name + ": initial run failed, see " + log.string()};
    ++runs;
    const auto reference = output_hashes(first);
    for (int k = 1; k <= 3; ++k) {
      const std::string again = first + "_rerun" + std::to_string(k);
      if (run_cli(step.name + " --config " + first + "/manifest.json --out " + again, log) != 0) {
        return {false, step.name + ": rerun from manifest failed"};
      }
      ++runs;
      auto hashes = output_hashes(again);
      // The manifest records its own output directory; compare everything else.
      hashes.erase("manifest.json");
      auto ref = reference;
      ref.erase("manifest.json");
      if (hashes != ref) return {false, step.name + ": rerun " + std::to_string(k) + " differs"};
    }
  }
  return {true, fmt("%zu commands, %d runs, all outputs hash-identical to the first run", steps.size(), runs)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = fs::temp_directory_path() / ("spmseg_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  const fs::path report_dir = argc > 1 ? fs::path(argv[1]) : fs::current_path();

  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::printf("%s  %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [&](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "otsu-oracle", guarded(otsu_oracle));
  report(2, "minkowski-oracle", guarded(minkowski_oracle));
  report(3, "preprocessing-exactness", guarded(preprocessing_exactness));
  report(4, "unet-numerics", guarded(unet_numerics));
  DeskModel desk;
  report(5, "unet-desk-training", guarded([&] {
           desk = train_desk_model();
           return desk_training(desk);
         }));
  report(6, "banding-ordering", guarded(banding_ordering));
  report(7, "streaking-ordering", guarded(streak_ordering));
  report(8, "unet-comparison-report",
         guarded([&] { return unet_comparison(desk, report_dir / "acceptance_unet_comparison.csv"); }));
  report(9, "threshold-sweep-sensitivity", guarded(sweep_sensitivity));
  report(10, "cli-determinism", guarded([&] { return cli_determinism(work); }));

  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
