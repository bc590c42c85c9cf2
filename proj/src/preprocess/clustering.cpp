// Colour-and-position clustering used as optional pre-processing. Each pixel
// is the feature (v, v, v, w*x, w*y): the gray value replicated into three
// channels plus weighted coordinates. Because the three channel components of
// every mean stay equal, a centre is stored as (v, x, y) and the squared
// Euclidean distance is 3*dv^2 + dx^2 + dy^2.

#include <algorithm>
#include <cmath>
#include <limits>

#include "spmseg/preprocess.hpp"
#include "spmseg/rng.hpp"

namespace spmseg {

namespace {

struct Feature {
  double v;
  double x;
  double y;
};

std::vector<Feature> features(const GrayImage& img, double coord_weight) {
  std::vector<Feature> f(img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      f[static_cast<std::size_t>(y) * img.width() + x] = {static_cast<double>(img(x, y)),
                                                          coord_weight * x, coord_weight * y};
    }
  }
  return f;
}

double dist2(const Feature& a, const Feature& b) {
  const double dv = a.v - b.v;
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return 3.0 * dv * dv + dx * dx + dy * dy;
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 3) throw ParameterError("k-means needs k >= 3 (k > 2 clusters)");
  if (max_iters < 1) throw ParameterError("k-means max_iters must be >= 1");
  if (!(coord_weight > 0.0)) throw ParameterError("k-means coord_weight must be > 0");
}

void MeanShiftConfig::validate() const {
  if (!(bandwidth > 0.0)) throw ParameterError("mean-shift bandwidth must be > 0");
  if (!(convergence_tol > 0.0)) throw ParameterError("mean-shift convergence_tol must be > 0");
  if (max_iters < 1) throw ParameterError("mean-shift max_iters must be >= 1");
  if (!(coord_weight >= 0.0)) throw ParameterError("mean-shift coord_weight must be >= 0");
}

KMeansResult kmeans_cluster(const GrayImage& img, const KMeansConfig& cfg) {
  cfg.validate();
  const std::size_t n = img.size();
  if (n == 0) return {img, {}, {}, 0, true};
  const auto pts = features(img, cfg.coord_weight);
  const int k = cfg.k;

  // k-means++ seeding: the first centre is a uniformly drawn pixel, later
  // ones are drawn with probability proportional to squared distance.
  Rng rng(cfg.seed);
  std::vector<Feature> centres;
  centres.reserve(k);
  centres.push_back(pts[rng.below(n)]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = dist2(pts[i], centres[0]);
  while (static_cast<int>(centres.size()) < k) {
    double total = 0.0;
    for (double d : nearest) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] <= 0.0) continue;
        target -= nearest[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    centres.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist2(pts[i], centres.back()));
  }

  KMeansResult result;
  std::vector<int> labels(n, -1);
  std::vector<double> own(n);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist2(pts[i], centres[0]);
      for (int c = 1; c < k; ++c) {
        const double d = dist2(pts[i], centres[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed = changed || labels[i] != best;
      labels[i] = best;
      own[i] = best_d;
      objective += best_d;
    }
    result.objective.push_back(objective);
    result.iterations = iter + 1;
    if (!changed) {
      result.converged = true;
      break;
    }

    std::vector<Feature> sums(k, Feature{0.0, 0.0, 0.0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[labels[i]];
      s.v += pts[i].v;
      s.x += pts[i].x;
      s.y += pts[i].y;
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Empty cluster: re-seed from the point farthest from its own centre.
        const auto far = std::max_element(own.begin(), own.end()) - own.begin();
        centres[c] = pts[far];
        own[far] = 0.0;
        continue;
      }
      const double cnt = static_cast<double>(counts[c]);
      centres[c] = {sums[c].v / cnt, sums[c].x / cnt, sums[c].y / cnt};
    }
  }

  result.centroid_intensity.resize(k);
  for (int c = 0; c < k; ++c) result.centroid_intensity[c] = centres[c].v;
  result.image = GrayImage(img.width(), img.height());
  for (std::size_t i = 0; i < n; ++i) result.image[i] = clamp_to_byte(centres[labels[i]].v);
  return result;
}

GrayImage kmeans_quantize(const GrayImage& img, const KMeansConfig& cfg) {
  return kmeans_cluster(img, cfg).image;
}

MeanShiftResult meanshift_cluster(const GrayImage& img, const MeanShiftConfig& cfg) {
  cfg.validate();
  const std::size_t n = img.size();
  MeanShiftResult result;
  if (n == 0) {
    result.image = img;
    return result;
  }
  const auto pts = features(img, cfg.coord_weight);
  const double band2 = cfg.bandwidth * cfg.bandwidth;
  const double merge_dist = cfg.bandwidth / 2.0;

  struct Cluster {
    Feature centre;
    std::vector<std::uint32_t> votes;
  };
  std::vector<Cluster> clusters;
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<std::uint32_t> votes(n);
  std::vector<std::size_t> window;
  std::size_t unvisited = n;
  int stalled = 0;
  Rng rng(cfg.seed);

  auto pick_start = [&](bool any) {
    // Uniform over unvisited pixels (or over all pixels when `any`).
    std::uint64_t r = rng.below(any ? n : unvisited);
    if (any) return static_cast<std::size_t>(r);
    for (std::size_t i = 0; i < n; ++i) {
      if (visited[i]) continue;
      if (r == 0) return i;
      --r;
    }
    return n - 1;
  };

  // Runs one mode-seeking trajectory and folds it into the cluster list.
  auto run_trajectory = [&](std::size_t start, bool force_new) {
    std::fill(votes.begin(), votes.end(), 0u);
    Feature mean = pts[start];
    for (int iter = 1;; ++iter) {
      window.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (dist2(pts[i], mean) < band2) window.push_back(i);
      }
      if (window.empty()) break;
      Feature next{0.0, 0.0, 0.0};
      for (std::size_t i : window) {
        ++votes[i];
        if (!visited[i]) {
          visited[i] = 1;
          --unvisited;
        }
        next.v += pts[i].v;
        next.x += pts[i].x;
        next.y += pts[i].y;
      }
      const double cnt = static_cast<double>(window.size());
      next = {next.v / cnt, next.x / cnt, next.y / cnt};
      const double step = std::sqrt(dist2(next, mean));
      mean = next;
      if (step < cfg.convergence_tol) break;
      if (iter >= cfg.max_iters) {
        ++stalled;
        break;
      }
    }
    ++result.trajectories;

    int merge_with = -1;
    if (!force_new) {
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        if (std::sqrt(dist2(mean, clusters[c].centre)) < merge_dist) {
          merge_with = static_cast<int>(c);
          break;
        }
      }
    }
    if (merge_with >= 0) {
      auto& c = clusters[merge_with];
      c.centre = {(c.centre.v + mean.v) / 2, (c.centre.x + mean.x) / 2, (c.centre.y + mean.y) / 2};
      for (std::size_t i = 0; i < n; ++i) c.votes[i] += votes[i];
    } else {
      clusters.push_back({mean, votes});
    }
  };

  while (unvisited > 0) {
    // The second trajectory always opens a new cluster so that at least two exist.
    run_trajectory(pick_start(false), clusters.size() == 1 && result.trajectories == 1);
  }
  if (clusters.size() < 2) run_trajectory(pick_start(true), true);

  result.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (std::size_t c = 1; c < clusters.size(); ++c) {
      if (clusters[c].votes[i] > clusters[best].votes[i]) best = static_cast<int>(c);
    }
    result.labels[i] = best;
  }
  result.cluster_intensity.resize(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) result.cluster_intensity[c] = clusters[c].centre.v;
  result.image = GrayImage(img.width(), img.height());
  for (std::size_t i = 0; i < n; ++i) {
    result.image[i] = clamp_to_byte(result.cluster_intensity[result.labels[i]]);
  }
  if (stalled > 0) {
    result.diagnostics = std::to_string(stalled) + " of " + std::to_string(result.trajectories) +
                         " mean-shift trajectories hit max_iters=" + std::to_string(cfg.max_iters) +
                         " before converging";
  }
  return result;
}

GrayImage meanshift_quantize(const GrayImage& img, const MeanShiftConfig& cfg) {
  return meanshift_cluster(img, cfg).image;
}

}  // namespace spmseg
