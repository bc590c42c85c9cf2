#include "spmseg/unet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace spmseg::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// im2col for one batch item: rows = (c, ky, kx), columns = output pixels.
void im2col(const Tensor4& x, int n, int k, RowMatrix& cols) {
  const auto& s = x.shape();
  const int r = k / 2;
  const int hw = s.h * s.w;
  cols.resize(static_cast<Eigen::Index>(s.c) * k * k, hw);
  for (int c = 0; c < s.c; ++c) {
    const double* src = x.plane(n, c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.data() + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        const int dy = ky - r;
        const int dx = kx - r;
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + dy;
          double* row = dst + static_cast<std::size_t>(y) * s.w;
          if (sy < 0 || sy >= s.h) {
            std::fill(row, row + s.w, 0.0);
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(sy) * s.w;
          const int x0 = std::min(s.w, std::max(0, -dx));
          const int x1 = std::max(x0, std::min(s.w, s.w - dx));
          std::fill(row, row + x0, 0.0);
          for (int xx = x0; xx < x1; ++xx) row[xx] = srow[xx + dx];
          std::fill(row + x1, row + s.w, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back into dx (accumulating).
void col2im(const RowMatrix& cols, int n, int k, Tensor4& dx) {
  const auto& s = dx.shape();
  const int r = k / 2;
  const int hw = s.h * s.w;
  for (int c = 0; c < s.c; ++c) {
    double* dst = dx.plane(n, c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = cols.data() + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * hw;
        const int dy = ky - r;
        const int ddx = kx - r;
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= s.h) continue;
          const double* row = src + static_cast<std::size_t>(y) * s.w;
          double* drow = dst + static_cast<std::size_t>(sy) * s.w;
          const int x0 = std::max(0, -ddx);
          const int x1 = std::min(s.w, s.w - ddx);
          for (int xx = x0; xx < x1; ++xx) drow[xx + ddx] += row[xx];
        }
      }
    }
  }
}

void check_conv(const Tensor4& x, const Tensor4& weight) {
  const auto& ws = weight.shape();
  require(ws.h == ws.w && ws.h % 2 == 1,
          "conv2d: kernel must be square with odd size, got weight " + ws.str());
  require(ws.c == x.shape().c,
          "conv2d: weight " + ws.str() + " expects " + std::to_string(ws.c) +
              " input channels but input is " + x.shape().str());
}

}  // namespace

Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias) {
  check_conv(x, weight);
  const auto& s = x.shape();
  const auto& ws = weight.shape();
  require_shape(bias, {1, ws.n, 1, 1}, "conv2d bias");
  const int k = ws.h;
  const int hw = s.h * s.w;
  Tensor4 y({s.n, ws.n, s.h, s.w});
  ConstMatMap wmat(weight.data().data(), ws.n, static_cast<Eigen::Index>(ws.c) * k * k);
  RowMatrix cols;
  for (int n = 0; n < s.n; ++n) {
    im2col(x, n, k, cols);
    MatMap out(y.plane(n, 0), ws.n, hw);
    out.noalias() = wmat * cols;
    for (int o = 0; o < ws.n; ++o) out.row(o).array() += bias[o];
  }
  return y;
}

Conv2dGrads conv2d_backward(const Tensor4& x, const Tensor4& weight, const Tensor4& dy) {
  check_conv(x, weight);
  const auto& s = x.shape();
  const auto& ws = weight.shape();
  require_shape(dy, {s.n, ws.n, s.h, s.w}, "conv2d dy");
  const int k = ws.h;
  const int hw = s.h * s.w;
  const Eigen::Index ckk = static_cast<Eigen::Index>(ws.c) * k * k;

  Conv2dGrads g{Tensor4(s), Tensor4(ws), Tensor4({1, ws.n, 1, 1})};
  ConstMatMap wmat(weight.data().data(), ws.n, ckk);
  MatMap dw(g.dweight.data().data(), ws.n, ckk);
  RowMatrix cols;
  RowMatrix dcols;
  for (int n = 0; n < s.n; ++n) {
    im2col(x, n, k, cols);
    ConstMatMap dout(dy.plane(n, 0), ws.n, hw);
    dw.noalias() += dout * cols.transpose();
    for (int o = 0; o < ws.n; ++o) g.dbias[o] += dout.row(o).sum();
    dcols.noalias() = wmat.transpose() * dout;
    col2im(dcols, n, k, g.dx);
  }
  return g;
}

MaxPoolOutput maxpool2x2_forward(const Tensor4& x) {
  const auto& s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, "maxpool2x2: spatial dims must be even, got " + s.str());
  MaxPoolOutput out{Tensor4({s.n, s.c, s.h / 2, s.w / 2}), {}};
  out.argmax.resize(out.y.size());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
      for (int y = 0; y < s.h / 2; ++y) {
        for (int xx = 0; xx < s.w / 2; ++xx, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i = base + static_cast<std::size_t>(2 * y + dy) * s.w + 2 * xx + dx;
              if (x[i] > x[best]) best = i;
            }
          }
          out.y[o] = x[best];
          out.argmax[o] = best;
        }
      }
    }
  }
  return out;
}

Tensor4 maxpool2x2_backward(const Shape4& x_shape, const std::vector<std::size_t>& argmax,
                            const Tensor4& dy) {
  require(argmax.size() == dy.size(), "maxpool2x2 backward: argmax/dy size mismatch");
  Tensor4 dx(x_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

Tensor4 upconv2x2_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias) {
  const auto& s = x.shape();
  const auto& ws = weight.shape();
  require(ws.h == 2 && ws.w == 2 && ws.n == s.c,
          "upconv2x2: weight " + ws.str() + " incompatible with input " + s.str());
  require_shape(bias, {1, ws.c, 1, 1}, "upconv2x2 bias");
  const int cout = ws.c;
  const int hw = s.h * s.w;
  Tensor4 y({s.n, cout, 2 * s.h, 2 * s.w});
  // Z = W^T X with W viewed as (in, out*4): rows of Z are (o, a, b).
  ConstMatMap wmat(weight.data().data(), s.c, static_cast<Eigen::Index>(cout) * 4);
  RowMatrix z;
  for (int n = 0; n < s.n; ++n) {
    ConstMatMap xin(x.plane(n, 0), s.c, hw);
    z.noalias() = wmat.transpose() * xin;
    for (int o = 0; o < cout; ++o) {
      double* dst = y.plane(n, o);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double* zr = z.data() + (static_cast<std::size_t>(o) * 4 + a * 2 + b) * hw;
          for (int i = 0; i < s.h; ++i)
            for (int j = 0; j < s.w; ++j)
              dst[static_cast<std::size_t>(2 * i + a) * (2 * s.w) + 2 * j + b] =
                  zr[static_cast<std::size_t>(i) * s.w + j] + bias[o];
        }
      }
    }
  }
  return y;
}

UpConvGrads upconv2x2_backward(const Tensor4& x, const Tensor4& weight, const Tensor4& dy) {
  const auto& s = x.shape();
  const auto& ws = weight.shape();
  require(ws.h == 2 && ws.w == 2 && ws.n == s.c,
          "upconv2x2: weight " + ws.str() + " incompatible with input " + s.str());
  const int cout = ws.c;
  require_shape(dy, {s.n, cout, 2 * s.h, 2 * s.w}, "upconv2x2 dy");
  const int hw = s.h * s.w;
  UpConvGrads g{Tensor4(s), Tensor4(ws), Tensor4({1, cout, 1, 1})};
  ConstMatMap wmat(weight.data().data(), s.c, static_cast<Eigen::Index>(cout) * 4);
  MatMap dw(g.dweight.data().data(), s.c, static_cast<Eigen::Index>(cout) * 4);
  RowMatrix dz(static_cast<Eigen::Index>(cout) * 4, hw);
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < cout; ++o) {
      const double* src = dy.plane(n, o);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          double* zr = dz.data() + (static_cast<std::size_t>(o) * 4 + a * 2 + b) * hw;
          for (int i = 0; i < s.h; ++i)
            for (int j = 0; j < s.w; ++j)
              zr[static_cast<std::size_t>(i) * s.w + j] =
                  src[static_cast<std::size_t>(2 * i + a) * (2 * s.w) + 2 * j + b];
        }
      }
      for (std::size_t i = 0; i < static_cast<std::size_t>(4 * hw); ++i) g.dbias[o] += src[i];
    }
    ConstMatMap xin(x.plane(n, 0), s.c, hw);
    dw.noalias() += xin * dz.transpose();
    MatMap dxin(g.dx.plane(n, 0), s.c, hw);
    dxin.noalias() = wmat * dz;
  }
  return g;
}

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& dy) {
  require_shape(dy, x.shape(), "relu dy");
  Tensor4 dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

Tensor4 sigmoid_forward(const Tensor4& x) {
  Tensor4 y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y[i] = e / (1.0 + e);
    }
  }
  return y;
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& dy) {
  require_shape(dy, y.shape(), "sigmoid dy");
  Tensor4 dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
  return dx;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
          "concat: incompatible shapes " + sa.str() + " and " + sb.str());
  Tensor4 y({sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t plane = sa.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.plane(n, 0), plane * sa.c, y.plane(n, 0));
    std::copy_n(b.plane(n, 0), plane * sb.c, y.plane(n, sa.c));
  }
  return y;
}

ConcatGrads concat_channels_backward(const Tensor4& dy, int channels_a) {
  const auto& s = dy.shape();
  require(channels_a >= 0 && channels_a <= s.c, "concat backward: bad channel split");
  ConcatGrads g{Tensor4({s.n, channels_a, s.h, s.w}), Tensor4({s.n, s.c - channels_a, s.h, s.w})};
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(dy.plane(n, 0), plane * channels_a, g.da.plane(n, 0));
    std::copy_n(dy.plane(n, channels_a), plane * (s.c - channels_a), g.db.plane(n, 0));
  }
  return g;
}

namespace {
constexpr double kProbEps = 1e-12;
}

double bce_loss(const Tensor4& p, const Tensor4& target) {
  require_shape(target, p.shape(), "bce target");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbEps, 1.0 - kProbEps);
    sum -= target[i] * std::log(q) + (1.0 - target[i]) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(p.size());
}

Tensor4 bce_loss_backward(const Tensor4& p, const Tensor4& target) {
  require_shape(target, p.shape(), "bce target");
  Tensor4 g(p.shape());
  const double inv_n = 1.0 / static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbEps, 1.0 - kProbEps);
    g[i] = inv_n * (-target[i] / q + (1.0 - target[i]) / (1.0 - q));
  }
  return g;
}

double bce_with_logits(const Tensor4& logits, const Tensor4& target, Tensor4* grad) {
  require_shape(target, logits.shape(), "bce target");
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  if (grad != nullptr) *grad = Tensor4(logits.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    // softplus(z) - t*z, written to avoid overflow for large |z|
    sum += std::max(z, 0.0) - target[i] * z + std::log1p(std::exp(-std::abs(z)));
    if (grad != nullptr) {
      const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      (*grad)[i] = inv_n * (p - target[i]);
    }
  }
  return sum * inv_n;
}

}  // namespace spmseg::nn
