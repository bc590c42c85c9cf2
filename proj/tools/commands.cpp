#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "spmseg/analysis.hpp"
#include "spmseg/augment.hpp"
#include "spmseg/dataset.hpp"
#include "spmseg/io.hpp"
#include "spmseg/parallel.hpp"
#include "spmseg/preprocess.hpp"
#include "spmseg/rng.hpp"
#include "spmseg/segment.hpp"
#include "spmseg/unet/model.hpp"

#ifndef SPMSEG_VERSION
#define SPMSEG_VERSION "0.0.0"
#endif

namespace spmseg::cli {

namespace {

namespace fs = std::filesystem;

const json kNoFiles = json::array();

Param out_param() { return {"out", "", "output directory"}; }
Param threads_param() { return {"threads", 1, "worker threads (parallel over images)"}; }
Param seed_param() { return {"seed", 0, "base random seed"}; }
Param inputs_param(const std::string& what) { return {"inputs", kNoFiles, what}; }

std::vector<Param> noise_params() {
  return {
      {"amplitude", 40.0, "noise amplitude (intensity levels; pixels for drift)"},
      {"stripe_count", 3, "rows hit by stripe noise"},
      {"band_period", 0, "banding period in pixels (0 = default for the kind)"},
      {"noise_blur_kernel", 7, "blur noise kernel size"},
      {"noise_blur_sigma", 1.5, "blur noise sigma"},
      {"streak_mask", "", "streak mask image (empty = synthesized)"},
      {"mask_scale", 0.0, "streak mask scale factor (0 = fit to image)"},
      {"mask_flip_h", false, "flip the streak mask horizontally"},
      {"mask_flip_v", false, "flip the streak mask vertically"},
      {"mask_random_flips", true, "draw streak mask flips from the noise seed"},
  };
}

std::vector<Param> method_params() {
  return {
      {"window", 15, "local-mean window (odd)"},
      {"offset_c", 0, "local-mean offset added to the mean"},
      {"despeckle", false, "3x3 majority filter after binarisation"},
      {"weights", "", "U-Net weight file (method unet)"},
      {"prob_cut", 0.5, "U-Net foreground probability cut"},
  };
}

std::vector<Param> concat(std::vector<Param> a, const std::vector<Param>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<CommandDef> build_defs() {
  std::vector<CommandDef> d;
  d.push_back({"preprocess", "Level height maps and normalize them to 8-bit images",
               {inputs_param("height maps (PNG/TIFF)"), out_param(), threads_param(), seed_param(),
                {"align", true, "median line alignment"},
                {"align_columns", false, "align columns instead of rows"},
                {"detrend", true, "subtract a polynomial background"},
                {"detrend_degree", 3, "polynomial degree"},
                {"sigma_truncation", 0, "pin pixels beyond k std devs (0-3, 0 = off)"},
                {"blur_kernel", 0, "Gaussian kernel size (0 = off)"},
                {"blur_sigma", 1.0, "Gaussian sigma"},
                {"equalize", false, "histogram equalization"},
                {"cluster", "none", "none | kmeans | meanshift"},
                {"kmeans_k", 8, "k-means cluster count"},
                {"kmeans_iters", 50, "k-means iteration cap"},
                {"meanshift_bandwidth", 40.0, "mean-shift bandwidth"},
                {"meanshift_tol", 0.5, "mean-shift convergence tolerance"},
                {"meanshift_iters", 100, "mean-shift iteration cap"},
                {"coord_weight", 1.0, "weight of pixel coordinates in clustering features"}}});
  d.push_back({"augment", "Add artificial noise to labelled images",
               concat({inputs_param("clean images"), {"masks", kNoFiles, "label masks, one per input"},
                       out_param(), seed_param(), {"process", 3, "augmentation process 1, 2 or 3"},
                       {"noise", "", "single noise kind instead of a process"},
                       {"preset", "", "unet1 (process 1) or unet2 (process 3), both with 2-sigma truncation"},
                       {"normalize", "none", "contrast normalization: none | before | after the noise"},
                       {"sigma_truncation", 0, "outlier truncation for normalization (0-3)"}},
                      noise_params())});
  d.push_back({"segment", "Binarise images",
               concat({inputs_param("images"), out_param(), threads_param(),
                       {"method", "otsu", "global-mean | local-mean | otsu | unet"}},
                      method_params())});
  d.push_back({"train", "Train a U-Net on image/mask pairs",
               {inputs_param("training images"), {"masks", kNoFiles, "label masks, one per input"},
                {"pairs_csv", "", "CSV with image,mask columns (as written by augment)"}, out_param(), seed_param(),
                {"depth", 3, "number of poolings"},
                {"base_channels", 8, "channels at the first level"},
                {"input_size", 128, "network input size (multiple of 2^depth)"},
                {"learning_rate", 1e-3, "Adam step size"},
                {"batch_size", 4, "mini-batch size"},
                {"epochs", 20, "training epochs"}}});
  d.push_back({"infer", "Segment images with a trained U-Net",
               {inputs_param("images"), out_param(), threads_param(), {"weights", "", "U-Net weight file"},
                {"prob_cut", 0.5, "foreground probability cut"}}});
  d.push_back({"minkowski", "Area, perimeter and Euler characteristic of masks",
               {inputs_param("mask images"), out_param(), threads_param()}});
  d.push_back({"sweep", "Minkowski numbers over a list of fixed thresholds",
               {inputs_param("images"), out_param(), threads_param(),
                {"thresholds", json::array({105, 115, 125, 135}), "thresholds in [0, 255]"}}});
  d.push_back({"robustness", "Pixel-change robustness of segmentation methods under noise",
               concat(concat({inputs_param("clean images"), out_param(), threads_param(), seed_param(),
                              {"methods", json::array({"local-mean", "otsu"}), "methods to compare"},
                              {"noises", json::array({"banding"}), "noise kinds"},
                              {"rescale", false, "split into quadrants and rescale x2 first"}},
                             noise_params()),
                      method_params())});
  d.push_back({"split", "Curate records and assign a stratified train/test split",
               {{"records", "", "records file (JSON lines)"}, out_param(), seed_param(),
                {"train_fraction", 0.75, "train share within each stratum"},
                {"curate", true, "exclude records with no regime or excessive noise"},
                {"assign_u", false, "draw random_u from the seed instead of keeping stored values"}}});
  d.push_back({"synth", "Generate synthetic patterns with exact ground truth",
               {out_param(), threads_param(), seed_param(),
                {"regime", "worm-like", "islands | worm-like | labyrinthine | pores | fingering | cellular"},
                {"coverage", 0.5, "foreground fraction"},
                {"correlation_length", 4.0, "feature scale in pixels"},
                {"feature_count", 10, "islands or cells"},
                {"width", 128, "image width"},
                {"height", 128, "image height"},
                {"edge_softness", 0.0, "Gaussian sigma applied to edges"},
                {"texture_amplitude", 6.0, "intensity texture std"},
                {"count", 1, "number of patterns"}}});
  return d;
}

// ---- config access ----

int get_int(const json& c, const char* k) { return c.at(k).get<int>(); }
double get_num(const json& c, const char* k) { return c.at(k).get<double>(); }
bool get_bool(const json& c, const char* k) { return c.at(k).get<bool>(); }
std::string get_str(const json& c, const char* k) { return c.at(k).get<std::string>(); }
std::uint64_t get_seed(const json& c) { return c.at("seed").get<std::uint64_t>(); }
std::vector<std::string> get_list(const json& c, const char* k) { return c.at(k).get<std::vector<std::string>>(); }

std::vector<std::string> require_inputs(const json& c) {
  auto in = get_list(c, "inputs");
  if (in.empty()) throw ParameterError("no inputs given");
  return in;
}

int threads(const json& c) {
  const int t = get_int(c, "threads");
  if (t < 1) throw ParameterError("threads must be >= 1");
  return t;
}

// Output names derive from input stems, which must therefore be unique.
std::vector<std::string> stems(const std::vector<std::string>& paths) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    auto s = fs::path(p).stem().string();
    if (!seen.insert(s).second) throw ParameterError("two inputs share the file stem '" + s + "'");
    out.push_back(std::move(s));
  }
  return out;
}

NoiseSpec noise_spec(const json& c, NoiseKind kind) {
  NoiseSpec s;
  s.kind = kind;
  s.amplitude = get_num(c, "amplitude");
  s.stripe_count = get_int(c, "stripe_count");
  s.band_period = get_int(c, "band_period");
  s.blur_kernel = get_int(c, "noise_blur_kernel");
  s.blur_sigma = get_num(c, "noise_blur_sigma");
  s.mask_ref = get_str(c, "streak_mask");
  s.mask_transform.scale = get_num(c, "mask_scale");
  s.mask_transform.flip_horizontal = get_bool(c, "mask_flip_h");
  s.mask_transform.flip_vertical = get_bool(c, "mask_flip_v");
  s.mask_transform.random_flips = get_bool(c, "mask_random_flips");
  s.validate();
  return s;
}

constexpr std::uint64_t kStreakStream = 0x737472656b;

GrayImage streak_mask_for(const json& c, int w, int h, std::uint64_t stream) {
  const auto path = get_str(c, "streak_mask");
  if (!path.empty()) return load_gray(path);
  return synth_streak_mask(w, h, derive_seed(get_seed(c), {kStreakStream, stream}));
}

NamedSegmenter make_segmenter(const json& c, const std::string& method) {
  const bool speckle = get_bool(c, "despeckle");
  // Ranges are checked even when the method ignores the key.
  const LocalMeanConfig lm{get_int(c, "window"), get_int(c, "offset_c")};
  lm.validate();
  const double cut = get_num(c, "prob_cut");
  if (!(cut >= 0.0 && cut <= 1.0)) throw ParameterError("prob_cut must lie in [0, 1]");
  auto wrap = [speckle](Segmenter f) -> Segmenter {
    if (!speckle) return f;
    return [f](const GrayImage& img) { return despeckle(f(img)); };
  };
  if (method == "global-mean") return {method, wrap([](const GrayImage& i) { return threshold_global_mean(i); })};
  if (method == "otsu") return {method, wrap([](const GrayImage& i) { return threshold_otsu(i).mask; })};
  if (method == "local-mean") {
    return {method, wrap([lm](const GrayImage& i) { return threshold_local_mean(i, lm); })};
  }
  if (method == "unet") {
    const auto path = get_str(c, "weights");
    if (path.empty()) throw ParameterError("method unet needs --weights");
    auto model = std::make_shared<nn::ModelWeights>(nn::load_weights(path));
    return {method, wrap([model, cut](const GrayImage& i) { return nn::infer(*model, i, cut); })};
  }
  throw ParameterError("unknown method '" + method + "' (global-mean, local-mean, otsu, unet)");
}

std::vector<LabeledImage> load_pairs(const std::vector<std::string>& images, const std::vector<std::string>& masks) {
  if (images.size() != masks.size()) {
    throw ParameterError(std::to_string(images.size()) + " images but " + std::to_string(masks.size()) + " masks");
  }
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    LabeledImage p{load_gray(images[i]), load_mask(masks[i])};
    if (!p.image.same_shape(p.mask)) throw DataError(images[i] + " and " + masks[i] + " differ in size");
    out.push_back(std::move(p));
  }
  return out;
}

// ---- commands ----

json cmd_preprocess(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  const auto names = stems(inputs);
  const std::string cluster = get_str(c, "cluster");
  if (cluster != "none" && cluster != "kmeans" && cluster != "meanshift") {
    throw ParameterError("cluster must be none, kmeans or meanshift");
  }
  const NormalizationPolicy policy{sigma_truncation_from_int(get_int(c, "sigma_truncation"))};
  const int blur_kernel = get_int(c, "blur_kernel");
  if (blur_kernel != 0) gaussian_kernel(blur_kernel, get_num(c, "blur_sigma"));
  KMeansConfig km{get_int(c, "kmeans_k"), get_int(c, "kmeans_iters"), 0, get_num(c, "coord_weight")};
  MeanShiftConfig ms{get_num(c, "meanshift_bandwidth"), get_num(c, "meanshift_tol"), get_int(c, "meanshift_iters"), 0,
                     get_num(c, "coord_weight")};
  if (cluster == "kmeans") km.validate();
  if (cluster == "meanshift") ms.validate();

  std::vector<json> per(inputs.size());
  parallel_for(inputs.size(), threads(c), [&](std::size_t i) {
    HeightMap h = load_height(inputs[i]);
    if (get_bool(c, "align")) h = align_rows(h, get_bool(c, "align_columns"));
    if (get_bool(c, "detrend")) h = detrend_poly(h, get_int(c, "detrend_degree"));
    GrayImage g = normalize_contrast(h, policy);
    if (blur_kernel != 0) g = gaussian_filter(g, blur_kernel, get_num(c, "blur_sigma"));
    if (get_bool(c, "equalize")) g = histogram_equalize(g);
    json info = {{"input", inputs[i]}, {"output", names[i] + ".png"}};
    const std::uint64_t seed = derive_seed(get_seed(c), {i});
    if (cluster == "kmeans") {
      KMeansConfig k = km;
      k.seed = seed;
      KMeansResult r = kmeans_cluster(g, k);
      g = std::move(r.image);
      info["kmeans_iterations"] = r.iterations;
      info["kmeans_converged"] = r.converged;
      info["kmeans_objective"] = r.objective.empty() ? 0.0 : r.objective.back();
    } else if (cluster == "meanshift") {
      MeanShiftConfig m = ms;
      m.seed = seed;
      MeanShiftResult r = meanshift_cluster(g, m);
      g = std::move(r.image);
      info["meanshift_clusters"] = r.cluster_intensity.size();
      info["meanshift_diagnostics"] = r.diagnostics;
    }
    write_gray(g, ctx.output(names[i] + ".png"));
    per[i] = std::move(info);
  });
  return {{"images", per}};
}

json cmd_augment(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  const auto names = stems(inputs);
  auto pairs = load_pairs(inputs, get_list(c, "masks"));
  const std::string single = get_str(c, "noise");
  const std::string preset = get_str(c, "preset");
  int process_id = get_int(c, "process");
  int truncation = get_int(c, "sigma_truncation");
  std::string order = get_str(c, "normalize");
  if (!preset.empty()) {
    if (preset != "unet1" && preset != "unet2") throw ParameterError("preset must be unet1 or unet2");
    process_id = preset == "unet1" ? 1 : 3;
    truncation = 2;
    if (order == "none") order = "after";
  }
  if (order != "none" && order != "before" && order != "after") {
    throw ParameterError("normalize must be none, before or after");
  }
  const NormalizationPolicy policy{sigma_truncation_from_int(truncation)};
  auto normalized = [&](const GrayImage& g) {
    HeightMap h(g.width(), g.height());
    for (std::size_t k = 0; k < g.size(); ++k) h[k] = g[k];
    return normalize_contrast(h, policy);
  };
  if (order == "before")
    for (auto& p : pairs) p.image = normalized(p.image);

  AugmentationProcess process;
  if (single.empty()) {
    process = make_process(process_id);
    for (auto& v : process.variants) v = noise_spec(c, v.kind);
  } else {
    process.id = 0;
    process.variants = {noise_spec(c, noise_kind_from_string(single))};
  }
  bool needs_mask = false;
  for (const auto& v : process.variants)
    needs_mask = needs_mask || v.kind == NoiseKind::streak_mask || v.kind == NoiseKind::background_contrast;
  std::optional<GrayImage> streak;
  if (needs_mask) streak = streak_mask_for(c, pairs[0].image.width(), pairs[0].image.height(), 0);

  auto out = run_process(pairs, process, streak ? &*streak : nullptr, get_seed(c));
  if (order == "after")
    for (auto& p : out) p.image = normalized(p.image);
  std::ostringstream csv;
  csv << "image,mask,kind,source,geometry_changed\n";
  for (const auto& p : out) {
    const std::string base = names[p.source_index] + "_" + std::string(to_string(p.kind));
    write_gray(p.image, ctx.output(base + ".png"));
    write_mask(p.mask, ctx.output(base + "_mask.png"));
    csv << base << ".png," << base << "_mask.png," << to_string(p.kind) << ',' << inputs[p.source_index] << ','
        << (p.geometry_changed ? 1 : 0) << '\n';
  }
  ctx.write_text("pairs.csv", csv.str());
  return {{"pairs", out.size()}, {"variants", process.variants.size()}, {"process", process.id},
          {"normalize", order}, {"sigma_truncation", truncation}};
}

json cmd_segment(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  const auto names = stems(inputs);
  const std::string method = get_str(c, "method");
  const NamedSegmenter seg = make_segmenter(c, method);
  std::vector<json> per(inputs.size());
  parallel_for(inputs.size(), threads(c), [&](std::size_t i) {
    const GrayImage img = load_gray(inputs[i]);
    json info = {{"input", inputs[i]}, {"output", names[i] + "_mask.png"}};
    BinaryMask m;
    if (method == "otsu") {
      OtsuResult r = threshold_otsu(img);
      info["threshold"] = r.threshold;
      m = get_bool(c, "despeckle") ? despeckle(r.mask) : std::move(r.mask);
    } else {
      m = seg.segment(img);
    }
    info["foreground_fraction"] = m.empty() ? 0.0 : static_cast<double>(m.count()) / static_cast<double>(m.size());
    write_mask(m, ctx.output(names[i] + "_mask.png"));
    per[i] = std::move(info);
  });
  return {{"images", per}};
}

std::vector<LabeledImage> training_pairs(const json& c) {
  const std::string csv_path = get_str(c, "pairs_csv");
  auto images = get_list(c, "inputs");
  auto masks = get_list(c, "masks");
  if (!csv_path.empty()) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open " + csv_path);
    const fs::path root = fs::path(csv_path).parent_path();
    std::string line;
    std::getline(in, line);
    if (!line.starts_with("image,mask")) throw DataError(csv_path + ": expected an image,mask header");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string img, mask;
      std::getline(ss, img, ',');
      std::getline(ss, mask, ',');
      images.push_back((root / img).string());
      masks.push_back((root / mask).string());
    }
  }
  if (images.empty()) throw ParameterError("no training pairs given (inputs/masks or pairs_csv)");
  return load_pairs(images, masks);
}

json cmd_train(const json& c, RunContext& ctx) {
  nn::UNetSpec spec{get_int(c, "depth"), get_int(c, "base_channels"), get_int(c, "input_size")};
  spec.validate();
  nn::TrainConfig tc;
  tc.learning_rate = get_num(c, "learning_rate");
  tc.batch_size = get_int(c, "batch_size");
  tc.epochs = get_int(c, "epochs");
  tc.seed = get_seed(c);
  tc.validate();
  const auto pairs = training_pairs(c);
  auto model = nn::build_unet(spec, derive_seed(tc.seed, {0x696e6974}));
  model.metadata["init"] = "he-normal";
  const auto result = nn::train(std::move(model), pairs, tc, [](int epoch, double loss) {
    std::cerr << "epoch " << epoch << " loss " << csv_number(loss) << '\n';
  });
  nn::save_weights(result.weights, ctx.output("unet.weights"));
  std::ostringstream csv;
  csv << "epoch,mean_loss\n0," << csv_number(result.initial_loss) << '\n';
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) csv << e + 1 << ',' << csv_number(result.epoch_loss[e]) << '\n';
  ctx.write_text("loss.csv", csv.str());
  return {{"pairs", pairs.size()},
          {"parameters", result.weights.parameter_count()},
          {"initial_loss", result.initial_loss},
          {"final_loss", result.epoch_loss.empty() ? result.initial_loss : result.epoch_loss.back()}};
}

json cmd_infer(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  const auto names = stems(inputs);
  if (get_str(c, "weights").empty()) throw ParameterError("infer needs --weights");
  const auto model = nn::load_weights(get_str(c, "weights"));
  const double cut = get_num(c, "prob_cut");
  if (!(cut >= 0.0 && cut <= 1.0)) throw ParameterError("prob_cut must lie in [0, 1]");
  parallel_for(inputs.size(), threads(c), [&](std::size_t i) {
    write_mask(nn::infer(model, load_gray(inputs[i]), cut), ctx.output(names[i] + "_mask.png"));
  });
  return {{"images", inputs.size()}};
}

json cmd_minkowski(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  std::vector<MinkowskiTriple> stats(inputs.size());
  parallel_for(inputs.size(), threads(c), [&](std::size_t i) { stats[i] = minkowski(load_mask(inputs[i])); });
  std::ostringstream csv;
  csv << "image,area,perimeter,euler,area_norm,perimeter_norm,euler_norm\n";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& s = stats[i];
    csv << fs::path(inputs[i]).filename().string() << ',' << s.area << ',' << s.perimeter << ',' << s.euler << ','
        << csv_number(s.area_norm()) << ',' << csv_number(s.perimeter_norm()) << ',' << csv_number(s.euler_norm())
        << '\n';
  }
  ctx.write_text("minkowski.csv", csv.str());
  return {{"images", inputs.size()}};
}

json cmd_sweep(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  const auto thresholds = c.at("thresholds").get<std::vector<int>>();
  if (thresholds.empty()) throw ParameterError("no thresholds given");
  std::vector<std::vector<SweepRow>> rows(inputs.size());
  std::vector<int> otsu(inputs.size());
  parallel_for(inputs.size(), threads(c), [&](std::size_t i) {
    const GrayImage img = load_gray(inputs[i]);
    rows[i] = threshold_sweep(img, thresholds);
    otsu[i] = threshold_otsu(img).threshold;
  });
  std::ostringstream csv;
  csv << "image,threshold,area,perimeter,euler,area_norm,perimeter_norm,euler_norm\n";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto name = fs::path(inputs[i]).filename().string();
    for (const auto& r : rows[i]) {
      csv << name << ',' << r.threshold << ',' << r.stats.area << ',' << r.stats.perimeter << ',' << r.stats.euler
          << ',' << csv_number(r.stats.area_norm()) << ',' << csv_number(r.stats.perimeter_norm()) << ','
          << csv_number(r.stats.euler_norm()) << '\n';
    }
  }
  ctx.write_text("sweep.csv", csv.str());
  return {{"otsu_thresholds", otsu}};
}

json cmd_robustness(const json& c, RunContext& ctx) {
  const auto inputs = require_inputs(c);
  std::vector<GrayImage> images;
  for (const auto& p : inputs) images.push_back(load_gray(p));
  std::vector<NamedSegmenter> methods;
  for (const auto& m : get_list(c, "methods")) methods.push_back(make_segmenter(c, m));
  if (methods.empty()) throw ParameterError("no methods given");

  std::vector<NoiseCase> noises;
  std::uint64_t kind_index = 0;
  for (const auto& name : get_list(c, "noises")) {
    const NoiseSpec base = noise_spec(c, noise_kind_from_string(name));
    const std::uint64_t seed = get_seed(c);
    const bool with_mask = base.kind == NoiseKind::streak_mask ||
                           (base.kind == NoiseKind::background_contrast && !base.mask_ref.empty());
    const std::uint64_t k = kind_index++;
    noises.push_back({name, [=, &c](const GrayImage& img, std::size_t index) {
                        NoiseSpec s = base;
                        s.seed = derive_seed(seed, {k, index});
                        if (!with_mask) return apply_noise(img, s);
                        const GrayImage mask = streak_mask_for(c, img.width(), img.height(), index);
                        return apply_noise(img, s, &mask);
                      }});
  }
  if (noises.empty()) throw ParameterError("no noise kinds given");

  const int t = threads(c);
  const auto reports = robustness_study(images, methods, noises, get_bool(c, "rescale"), t);
  std::ostringstream rob;
  write_robustness_csv(rob, reports);
  ctx.write_text("robustness.csv", rob.str());

  std::vector<GrayImage> study;
  if (get_bool(c, "rescale")) {
    for (const auto& img : images)
      for (auto& q : quadrant_rescale(img)) study.push_back(std::move(q));
  } else {
    study = images;
  }
  std::ostringstream sens;
  write_sensitivity_csv(sens, noise_sensitivity_study(study, methods, noises, t));
  ctx.write_text("sensitivity.csv", sens.str());

  json summary = json::array();
  for (const auto& r : reports) summary.push_back({{"method", r.method}, {"noise", r.noise}, {"mean_pixel_change", r.mean_fraction}});
  return {{"robustness", summary},
          {"sensitivity_measure", "euler: mean |difference|; area, perimeter: mean |difference| / clean-set mean"}};
}

json cmd_split(const json& c, RunContext& ctx) {
  const std::string path = get_str(c, "records");
  if (path.empty()) throw ParameterError("split needs --records");
  auto records = read_records(fs::path(path));
  if (get_bool(c, "assign_u")) assign_random_u(records, get_seed(c));
  std::size_t excluded = 0;
  if (get_bool(c, "curate")) {
    auto cur = curate(std::move(records));
    records = std::move(cur.records);
    excluded = cur.excluded;
  }
  records = stratified_split(std::move(records), get_num(c, "train_fraction"));
  std::size_t train = 0, test = 0, eligible = 0;
  for (const auto& r : records) {
    train += r.split == Split::train;
    test += r.split == Split::test;
    eligible += training_eligible(r);
  }
  std::ostringstream out;
  write_records(out, records);
  ctx.write_text("records.jsonl", out.str());
  return {{"records", records.size()}, {"excluded", excluded}, {"train", train}, {"test", test},
          {"training_eligible", eligible}};
}

json cmd_synth(const json& c, RunContext& ctx) {
  PatternSpec base;
  base.regime = regime_from_string(get_str(c, "regime"));
  base.coverage = get_num(c, "coverage");
  base.correlation_length = get_num(c, "correlation_length");
  base.feature_count = get_int(c, "feature_count");
  base.width = get_int(c, "width");
  base.height = get_int(c, "height");
  base.edge_softness = get_num(c, "edge_softness");
  base.texture_amplitude = get_num(c, "texture_amplitude");
  base.validate();
  const int count = get_int(c, "count");
  if (count < 1) throw ParameterError("count must be >= 1");
  parallel_for(static_cast<std::size_t>(count), threads(c), [&](std::size_t i) {
    PatternSpec s = base;
    s.seed = derive_seed(get_seed(c), {i});
    const auto pair = synth_pattern(s);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03zu", i);
    write_gray(pair.image, ctx.output(std::string(name) + ".png"));
    write_mask(pair.mask, ctx.output(std::string(name) + "_mask.png"));
  });
  return {{"patterns", count}};
}

using Handler = json (*)(const json&, RunContext&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"preprocess", cmd_preprocess}, {"augment", cmd_augment},     {"segment", cmd_segment},
      {"train", cmd_train},           {"infer", cmd_infer},         {"minkowski", cmd_minkowski},
      {"sweep", cmd_sweep},           {"robustness", cmd_robustness}, {"split", cmd_split},
      {"synth", cmd_synth},
  };
  return h;
}

std::vector<std::string> declared_inputs(const json& c) {
  std::vector<std::string> in;
  for (const char* k : {"inputs", "masks"})
    if (c.contains(k))
      for (const auto& p : c[k]) in.push_back(p.get<std::string>());
  for (const char* k : {"weights", "streak_mask", "records", "pairs_csv"})
    if (c.contains(k) && !c[k].get<std::string>().empty()) in.push_back(c[k].get<std::string>());
  return in;
}

}  // namespace

const std::vector<CommandDef>& command_defs() {
  static const std::vector<CommandDef> defs = build_defs();
  return defs;
}

void run_command(const std::string& name, const json& cfg) {
  RunContext ctx(get_str(cfg, "out"), declared_inputs(cfg));
  json results = handlers().at(name)(cfg, ctx);
  json manifest = {{"tool", "spmseg"},
                   {"version", SPMSEG_VERSION},
                   {"command", name},
                   {"config", cfg},
                   {"outputs", ctx.outputs()},
                   {"results", std::move(results)}};
  ctx.write_text("manifest.json", manifest.dump(2) + "\n");
  ctx.commit();
}

}  // namespace spmseg::cli
