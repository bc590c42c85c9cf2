#include <algorithm>
#include <cmath>
#include <numeric>

#include "spmseg/preprocess.hpp"

namespace spmseg {

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

HeightMap align_rows(const HeightMap& h, bool columns) {
  if (columns) return transpose(align_rows(transpose(h), false));
  if (h.height() < 2) throw ParameterError("align_rows needs at least two rows");

  HeightMap out = h;
  std::vector<double> diff(h.width());
  for (int y = 1; y < out.height(); ++y) {
    const auto prev = out.row(y - 1);
    auto cur = out.row(y);
    for (int x = 0; x < out.width(); ++x) diff[x] = cur[x] - prev[x];
    const double offset = median_inplace(diff);
    for (double& v : cur) v -= offset;
  }
  return out;
}

HeightMap detrend_poly(const HeightMap& h, int degree) {
  if (degree < 1) throw ParameterError("detrend degree must be >= 1");
  const int w = h.width();
  const int ht = h.height();
  const std::size_t n = h.size();
  if (n == 0) return h;

  // Coordinates rescaled to [-1, 1] keep the monomials well conditioned.
  std::vector<double> u(w), v(ht);
  for (int x = 0; x < w; ++x) u[x] = w > 1 ? 2.0 * x / (w - 1) - 1.0 : 0.0;
  for (int y = 0; y < ht; ++y) v[y] = ht > 1 ? 2.0 * y / (ht - 1) - 1.0 : 0.0;

  std::vector<std::vector<double>> basis;
  for (int total = 0; total <= degree; ++total) {
    for (int b = 0; b <= total; ++b) {
      const int a = total - b;
      std::vector<double> q(n);
      for (int y = 0; y < ht; ++y)
        for (int x = 0; x < w; ++x)
          q[static_cast<std::size_t>(y) * w + x] = std::pow(u[x], a) * std::pow(v[y], b);
      const double raw_norm = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
      // Modified Gram-Schmidt, two passes for numerical orthogonality.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& e : basis) {
          const double c = std::inner_product(e.begin(), e.end(), q.begin(), 0.0);
          for (std::size_t i = 0; i < n; ++i) q[i] -= c * e[i];
        }
      }
      const double norm = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
      // Monomials that are dependent on the grid (e.g. a one-pixel-wide map) are dropped.
      if (raw_norm == 0.0 || norm <= 1e-10 * raw_norm) continue;
      for (double& x : q) x /= norm;
      basis.push_back(std::move(q));
    }
  }

  std::vector<double> out(h.data().begin(), h.data().end());
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& e : basis) {
      const double c = std::inner_product(e.begin(), e.end(), out.begin(), 0.0);
      for (std::size_t i = 0; i < n; ++i) out[i] -= c * e[i];
    }
  }
  return HeightMap(w, ht, std::move(out));
}

}  // namespace spmseg
