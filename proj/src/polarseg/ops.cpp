#include "polarseg/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "polarseg/error.hpp"
#include "polarseg/polar_codec.hpp"

namespace polarseg::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ShapeMismatch, what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require(a->shape() == b->shape(), std::string(op) + ": shapes " + shape_string(a->shape()) +
                                        " and " + shape_string(b->shape()) + " differ");
}

struct ConvGeometry {
  std::size_t channels, height, width, kernel, stride, padding, out_h, out_w;
  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t cells() const { return out_h * out_w; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t L = g.cells();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = x + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * L;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
          double* out = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.height)) {
            std::fill(out, out + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + iy * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
            out[ox] = (ix < 0 || ix >= static_cast<long>(g.width)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* dx) {
  const std::size_t L = g.cells();
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = dx + c * g.height * g.width;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * L;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ki) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          double* dst = plane + iy * g.width;
          const double* in = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kj) - static_cast<long>(g.padding);
            if (ix >= 0 && ix < static_cast<long>(g.width)) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <typename F, typename D>
Var unary(const Var& x, F f, D df_from_xy) {
  Tensor out(x->shape());
  const auto& xv = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result(std::move(out), {x}, [df_from_xy](Node& self) {
    Node& in = *self.inputs[0];
    Tensor& gx = in.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * df_from_xy(in.value[i], self.value[i]);
  });
}

}  // namespace

double ray_angle(std::size_t k, std::size_t n) {
  return static_cast<double>(k + 1) * 2.0 * std::numbers::pi / static_cast<double>(n);
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding) {
  const auto& xs = input->shape();
  const auto& ws = weight->shape();
  require(xs.size() == 4, "conv2d: input must be NCHW, got " + shape_string(xs));
  require(ws.size() == 4 && ws[2] == ws[3], "conv2d: weight must be [O,C,k,k]");
  require(ws[1] == xs[1], "conv2d: weight expects " + std::to_string(ws[1]) +
                              " input channels, input has " + std::to_string(xs[1]));
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(xs[2] + 2 * padding >= ws[2] && xs[3] + 2 * padding >= ws[3],
          "conv2d: kernel larger than padded input");
  if (bias) require(bias->shape() == Shape{ws[0]}, "conv2d: bias must be [O]");

  ConvGeometry g{xs[1], xs[2], xs[3], ws[2], stride, padding, 0, 0};
  g.out_h = (g.height + 2 * padding - g.kernel) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kernel) / stride + 1;
  const std::size_t N = xs[0], O = ws[0], K = g.patch(), L = g.cells();

  Tensor out({N, O, g.out_h, g.out_w});
  auto cols = std::make_shared<std::vector<double>>();
  if (!g.is_pointwise()) cols->resize(N * K * L);
  ConstMapMat W(weight->value.data(), O, K);
  for (std::size_t n = 0; n < N; ++n) {
    const double* xn = input->value.data() + n * g.channels * g.height * g.width;
    const double* col = xn;
    if (!g.is_pointwise()) {
      im2col(g, xn, cols->data() + n * K * L);
      col = cols->data() + n * K * L;
    }
    MapMat Y(out.data() + n * O * L, O, L);
    Y.noalias() = W * ConstMapMat(col, K, L);
    if (bias) {
      for (std::size_t o = 0; o < O; ++o) Y.row(o).array() += bias->value[o];
    }
  }

  std::vector<Var> inputs{input, weight};
  if (bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [g, N, O, K, L, cols](Node& self) {
    Node& x = *self.inputs[0];
    Node& w = *self.inputs[1];
    Node* b = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    ConstMapMat W(w.value.data(), O, K);
    std::vector<double> dcol;
    if (x.requires_grad && !g.is_pointwise()) dcol.resize(K * L);
    for (std::size_t n = 0; n < N; ++n) {
      ConstMapMat G(self.grad.data() + n * O * L, O, L);
      const double* col =
          g.is_pointwise() ? x.value.data() + n * K * L : cols->data() + n * K * L;
      if (w.requires_grad) {
        MapMat dW(w.ensure_grad().data(), O, K);
        dW.noalias() += G * ConstMapMat(col, K, L).transpose();
      }
      if (b && b->requires_grad) {
        Tensor& db = b->ensure_grad();
        // Plain loop: Eigen's vectorised sum peels by pointer alignment, which
        // would make the rounding depend on where the buffer was allocated.
        for (std::size_t o = 0; o < O; ++o) {
          const double* row = self.grad.data() + (n * O + o) * L;
          double acc = 0.0;
          for (std::size_t l = 0; l < L; ++l) acc += row[l];
          db[o] += acc;
        }
      }
      if (x.requires_grad) {
        double* dxn = x.ensure_grad().data() + n * g.channels * g.height * g.width;
        if (g.is_pointwise()) {
          MapMat dX(dxn, K, L);
          dX.noalias() += W.transpose() * G;
        } else {
          MapMat dC(dcol.data(), K, L);
          dC.noalias() = W.transpose() * G;
          col2im_add(g, dcol.data(), dxn);
        }
      }
    }
  });
}

Var grouped_conv1x1(const Var& input, const Var& weight, const Var& bias, std::size_t groups) {
  const auto& xs = input->shape();
  require(xs.size() == 4, "grouped_conv1x1: input must be NCHW");
  require(groups >= 1 && xs[1] % groups == 0,
          "grouped_conv1x1: " + std::to_string(xs[1]) + " channels not divisible by " +
              std::to_string(groups) + " groups");
  const std::size_t C = xs[1] / groups;
  require(weight->shape() == Shape{groups, C}, "grouped_conv1x1: weight must be [G, C]");
  if (bias) require(bias->shape() == Shape{groups}, "grouped_conv1x1: bias must be [G]");
  const std::size_t N = xs[0], HW = xs[2] * xs[3];

  Tensor out({N, groups, xs[2], xs[3]});
  const double* x = input->value.data();
  const double* w = weight->value.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t gi = 0; gi < groups; ++gi) {
      double* o = out.data() + (n * groups + gi) * HW;
      const double b = bias ? bias->value[gi] : 0.0;
      std::fill(o, o + HW, b);
      for (std::size_t c = 0; c < C; ++c) {
        const double wc = w[gi * C + c];
        const double* xc = x + (n * groups * C + gi * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) o[i] += wc * xc[i];
      }
    }
  }

  std::vector<Var> inputs{input, weight};
  if (bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [N, groups, C, HW](Node& self) {
    Node& xin = *self.inputs[0];
    Node& win = *self.inputs[1];
    Node* bin = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const double* x = xin.value.data();
    const double* w = win.value.data();
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t gi = 0; gi < groups; ++gi) {
        const double* go = self.grad.data() + (n * groups + gi) * HW;
        if (bin && bin->requires_grad) {
          double s = 0.0;
          for (std::size_t i = 0; i < HW; ++i) s += go[i];
          bin->ensure_grad()[gi] += s;
        }
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t plane = (n * groups * C + gi * C + c) * HW;
          if (win.requires_grad) {
            double s = 0.0;
            for (std::size_t i = 0; i < HW; ++i) s += go[i] * x[plane + i];
            win.ensure_grad()[gi * C + c] += s;
          }
          if (xin.requires_grad) {
            double* dx = xin.ensure_grad().data() + plane;
            const double wc = w[gi * C + c];
            for (std::size_t i = 0; i < HW; ++i) dx[i] += wc * go[i];
          }
        }
      }
    }
  });
}

namespace {

struct BilinearTaps {
  long x0, y0;
  double fx, fy;  // fractional offsets within the cell
  bool valid;
};

BilinearTaps bilinear_taps(double x, double y) {
  // Far-away or non-finite points read zero everywhere; keeps floor() in range.
  constexpr double kLimit = 1e7;
  if (!std::isfinite(x) || !std::isfinite(y) || std::abs(x) > kLimit || std::abs(y) > kLimit)
    return {0, 0, 0.0, 0.0, false};
  const double xf = std::floor(x), yf = std::floor(y);
  return {static_cast<long>(xf), static_cast<long>(yf), x - xf, y - yf, true};
}

}  // namespace

Var bilinear_sample(const Var& features, const Var& points) {
  const auto& fs = features->shape();
  require(fs.size() == 3, "bilinear_sample: features must be [C,H,W]");
  require(points->shape().size() == 2 && points->shape()[1] == 2,
          "bilinear_sample: points must be [K,2]");
  const std::size_t C = fs[0], H = fs[1], W = fs[2], K = points->shape()[0];
  const long Hl = static_cast<long>(H), Wl = static_cast<long>(W);

  auto inside = [Hl, Wl](long y, long x) { return y >= 0 && y < Hl && x >= 0 && x < Wl; };

  Tensor out({K, C});
  const double* f = features->value.data();
  const double* p = points->value.data();
  for (std::size_t k = 0; k < K; ++k) {
    const auto t = bilinear_taps(p[2 * k], p[2 * k + 1]);
    if (!t.valid) continue;
    const long ys[2] = {t.y0, t.y0 + 1}, xs[2] = {t.x0, t.x0 + 1};
    const double wy[2] = {1.0 - t.fy, t.fy}, wx[2] = {1.0 - t.fx, t.fx};
    double* o = out.data() + k * C;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        if (!inside(ys[a], xs[b])) continue;
        const double w = wy[a] * wx[b];
        const std::size_t cell = static_cast<std::size_t>(ys[a] * Wl + xs[b]);
        for (std::size_t c = 0; c < C; ++c) o[c] += w * f[c * H * W + cell];
      }
  }

  return make_result(std::move(out), {features, points}, [C, H, W, K, inside, Wl](Node& self) {
    Node& fin = *self.inputs[0];
    Node& pin = *self.inputs[1];
    const double* f = fin.value.data();
    const double* p = pin.value.data();
    for (std::size_t k = 0; k < K; ++k) {
      const auto t = bilinear_taps(p[2 * k], p[2 * k + 1]);
      if (!t.valid) continue;
      const double* g = self.grad.data() + k * C;
      const long ys[2] = {t.y0, t.y0 + 1}, xs[2] = {t.x0, t.x0 + 1};
      const double wy[2] = {1.0 - t.fy, t.fy}, wx[2] = {1.0 - t.fx, t.fx};
      // d(wx)/dx = (-1, +1), d(wy)/dy = (-1, +1)
      const double dwx[2] = {-1.0, 1.0}, dwy[2] = {-1.0, 1.0};
      double gx = 0.0, gy = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          if (!inside(ys[a], xs[b])) continue;
          const std::size_t cell = static_cast<std::size_t>(ys[a] * Wl + xs[b]);
          const double w = wy[a] * wx[b];
          double dot = 0.0;
          for (std::size_t c = 0; c < C; ++c) dot += g[c] * f[c * H * W + cell];
          gx += dot * wy[a] * dwx[b];
          gy += dot * dwy[a] * wx[b];
          if (fin.requires_grad) {
            double* df = fin.ensure_grad().data();
            for (std::size_t c = 0; c < C; ++c) df[c * H * W + cell] += w * g[c];
          }
        }
      if (pin.requires_grad) {
        Tensor& dp = pin.ensure_grad();
        dp[2 * k] += gx;
        dp[2 * k + 1] += gy;
      }
    }
  });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var clamp_min(const Var& x, double lo) {
  return unary(
      x, [lo](double v) { return v > lo ? v : lo; },
      [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

Var scale(const Var& x, double c) {
  return unary(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var scalar_scale(const Var& x, const Var& s) {
  require(s->value.size() == 1, "scalar_scale: scale must have one element");
  const double sv = s->value[0];
  Tensor out(x->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * sv;
  return make_result(std::move(out), {x, s}, [](Node& self) {
    Node& xin = *self.inputs[0];
    Node& sin = *self.inputs[1];
    const double sv = sin.value[0];
    double ds = 0.0;
    const bool want_x = xin.requires_grad;
    double* dx = want_x ? xin.ensure_grad().data() : nullptr;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ds += self.grad[i] * xin.value[i];
      if (want_x) dx[i] += self.grad[i] * sv;
    }
    if (sin.requires_grad) sin.ensure_grad()[0] += ds;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      Tensor& g = in->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      Tensor& g = x.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      Tensor& g = y.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Var sum(const Var& x) {
  return make_result(Tensor::scalar(x->value.sum()), {x}, [](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    const double up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

Var reshape(const Var& x, Shape shape) {
  return make_result(x->value.reshaped(std::move(shape)), {x}, [](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var detach(const Var& x) { return constant(x->value); }

Var upsample_nearest(const Var& x, std::size_t out_h, std::size_t out_w) {
  const auto& s = x->shape();
  require(s.size() == 4, "upsample_nearest: input must be NCHW");
  const std::size_t planes = s[0] * s[1], H = s[2], W = s[3];
  std::vector<std::size_t> src(out_h * out_w);
  for (std::size_t i = 0; i < out_h; ++i)
    for (std::size_t j = 0; j < out_w; ++j) src[i * out_w + j] = (i * H / out_h) * W + j * W / out_w;
  Tensor out({s[0], s[1], out_h, out_w});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < src.size(); ++i)
      out[p * src.size() + i] = x->value[p * H * W + src[i]];
  return make_result(std::move(out), {x}, [src, planes, HW = H * W](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < src.size(); ++i) g[p * HW + src[i]] += self.grad[p * src.size() + i];
  });
}

Var gather_cells(const Var& x, const std::vector<std::size_t>& cells) {
  const auto& s = x->shape();
  require(s.size() == 3 || (s.size() == 4 && s[0] == 1), "gather_cells: need [C,H,W] or [1,C,H,W]");
  const std::size_t C = s[s.size() - 3], HW = s[s.size() - 2] * s[s.size() - 1];
  for (auto c : cells) require(c < HW, "gather_cells: cell index out of range");
  Tensor out({cells.size(), C});
  for (std::size_t p = 0; p < cells.size(); ++p)
    for (std::size_t c = 0; c < C; ++c) out[p * C + c] = x->value[c * HW + cells[p]];
  return make_result(std::move(out), {x}, [cells, C, HW](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (std::size_t p = 0; p < cells.size(); ++p)
      for (std::size_t c = 0; c < C; ++c) g[c * HW + cells[p]] += self.grad[p * C + c];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  Shape tail(parts[0]->shape().begin() + 1, parts[0]->shape().end());
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require(p->shape().size() >= 1 &&
                Shape(p->shape().begin() + 1, p->shape().end()) == tail,
            "concat_rows: trailing dimensions differ");
    rows += p->shape()[0];
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  Tensor out(shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p->value.storage().begin(), p->value.storage().end(), out.data() + offset);
    offset += p->value.size();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (auto& in : self.inputs) {
      const std::size_t n = in->value.size();
      if (in->requires_grad) {
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Var polar_to_grid(const Var& radii, const std::vector<double>& pole_x,
                  const std::vector<double>& pole_y, double stride) {
  const auto& s = radii->shape();
  require(s.size() == 2, "polar_to_grid: radii must be [P, n]");
  require(pole_x.size() == s[0] && pole_y.size() == s[0], "polar_to_grid: one pole per row");
  require(stride > 0.0, "polar_to_grid: stride must be positive");
  const std::size_t P = s[0], n = s[1];
  std::vector<double> sx(n), cy(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point d = ray_direction(k, n);
    sx[k] = d.x / stride;
    cy[k] = d.y / stride;
  }
  Tensor out({P * n, 2});
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < n; ++k) {
      const double r = radii->value[p * n + k];
      out[2 * (p * n + k)] = pole_x[p] + r * sx[k];
      out[2 * (p * n + k) + 1] = pole_y[p] + r * cy[k];
    }
  return make_result(std::move(out), {radii}, [sx, cy, P, n](Node& self) {
    Tensor& g = self.inputs[0]->ensure_grad();
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = p * n + k;
        g[i] += self.grad[2 * i] * sx[k] + self.grad[2 * i + 1] * cy[k];
      }
  });
}

}  // namespace polarseg::ad
