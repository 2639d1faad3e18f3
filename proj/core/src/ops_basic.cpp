#include <Eigen/Core>
#include <cmath>

#include "depthlab/ops.hpp"

namespace depthlab::ops {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

Tensor ew(const Tensor& a, const Tensor& b, double (*f)(double, double)) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  check(a.val().same_shape(b.val()),
        std::string(op) + ": shape mismatch " + a.val().shape_str() + " vs " + b.val().shape_str());
}

Tensor map_unary(const Tensor& x, double (*f)(double)) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return Var::make(
      "add", ew(a.val(), b.val(), [](double x, double y) { return x + y; }), {a, b},
      [](const Var& g, const Var&) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return Var::make(
      "sub", ew(a.val(), b.val(), [](double x, double y) { return x - y; }), {a, b},
      [](const Var& g, const Var&) { return std::vector<Var>{g, neg(g)}; });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return Var::make(
      "mul", ew(a.val(), b.val(), [](double x, double y) { return x * y; }), {a, b},
      [](const Var& g, const Var& self) {
        return std::vector<Var>{mul(g, self.input(1)), mul(g, self.input(0))};
      });
}

Var divv(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  return Var::make(
      "div", ew(a.val(), b.val(), [](double x, double y) { return x / y; }), {a, b},
      [](const Var& g, const Var& self) {
        const Var& x = self.input(0);
        const Var& y = self.input(1);
        Var gx = divv(g, y);
        Var gy = neg(divv(mul(g, x), mul(y, y)));
        return std::vector<Var>{gx, gy};
      });
}

Var scale(const Var& x, double c) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x.val()[i] * c;
  return Var::make("scale", std::move(out), {x},
                   [c](const Var& g, const Var&) { return std::vector<Var>{scale(g, c)}; });
}

Var add_scalar(const Var& x, double c) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x.val()[i] + c;
  return Var::make("add_scalar", std::move(out), {x},
                   [](const Var& g, const Var&) { return std::vector<Var>{g}; });
}

Var rsub_scalar(double c, const Var& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = c - x.val()[i];
  return Var::make("rsub_scalar", std::move(out), {x},
                   [](const Var& g, const Var&) { return std::vector<Var>{neg(g)}; });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var abs_v(const Var& x) {
  return Var::make("abs", map_unary(x.val(), [](double v) { return std::fabs(v); }), {x},
                   [](const Var& g, const Var& self) {
                     Tensor s(self.input(0).shape());
                     const Tensor& xin = self.input(0).val();
                     for (int64_t i = 0; i < s.size(); ++i)
                       s[i] = xin[i] > 0 ? 1.0 : (xin[i] < 0 ? -1.0 : 0.0);
                     return std::vector<Var>{mul(g, Var::leaf(std::move(s)))};
                   });
}

Var exp_v(const Var& x) {
  return Var::make("exp", map_unary(x.val(), [](double v) { return std::exp(v); }), {x},
                   [](const Var& g, const Var& self) {
                     return std::vector<Var>{mul(g, exp_v(self.input(0)))};
                   });
}

Var log_v(const Var& x) {
  return Var::make("log", map_unary(x.val(), [](double v) { return std::log(v); }), {x},
                   [](const Var& g, const Var& self) {
                     return std::vector<Var>{divv(g, self.input(0))};
                   });
}

Var sqrt_v(const Var& x) {
  return Var::make("sqrt", map_unary(x.val(), [](double v) { return std::sqrt(v); }), {x},
                   [](const Var& g, const Var& self) {
                     return std::vector<Var>{divv(scale(g, 0.5), sqrt_v(self.input(0)))};
                   });
}

Var square(const Var& x) {
  return Var::make("square", map_unary(x.val(), [](double v) { return v * v; }), {x},
                   [](const Var& g, const Var& self) {
                     return std::vector<Var>{mul(g, scale(self.input(0), 2.0))};
                   });
}

Var sigmoid(const Var& x) {
  return Var::make("sigmoid", map_unary(x.val(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); }),
                   {x}, [](const Var& g, const Var& self) {
                     Var s = sigmoid(self.input(0));
                     return std::vector<Var>{mul(g, mul(s, rsub_scalar(1.0, s)))};
                   });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var leaky_relu(const Var& x, double slope) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    double v = x.val()[i];
    out[i] = v > 0 ? v : slope * v;
  }
  return Var::make("leaky_relu", std::move(out), {x}, [slope](const Var& g, const Var& self) {
    Tensor mask(self.input(0).shape());
    const Tensor& xin = self.input(0).val();
    for (int64_t i = 0; i < mask.size(); ++i) mask[i] = xin[i] > 0 ? 1.0 : slope;
    return std::vector<Var>{mul(g, Var::leaf(std::move(mask)))};
  });
}

Var elu(const Var& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    double v = x.val()[i];
    out[i] = v > 0 ? v : std::expm1(v);
  }
  return Var::make(
      "elu", std::move(out), {x},
      [](const Var& g, const Var& self) {
        Tensor d(self.input(0).shape());
        const Tensor& xin = self.input(0).val();
        for (int64_t i = 0; i < d.size(); ++i) d[i] = xin[i] > 0 ? 1.0 : std::exp(xin[i]);
        return std::vector<Var>{mul(g, Var::leaf(std::move(d)))};
      },
      /*recordable=*/false);
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = std::min(hi, std::max(lo, x.val()[i]));
  return Var::make("clamp", std::move(out), {x}, [lo, hi](const Var& g, const Var& self) {
    Tensor mask(self.input(0).shape());
    const Tensor& xin = self.input(0).val();
    for (int64_t i = 0; i < mask.size(); ++i) mask[i] = (xin[i] > lo && xin[i] < hi) ? 1.0 : 0.0;
    return std::vector<Var>{mul(g, Var::leaf(std::move(mask)))};
  });
}

Var sum_all(const Var& x) {
  double s = 0;
  for (int64_t i = 0; i < x.size(); ++i) s += x.val()[i];
  return Var::make("sum_all", Tensor::scalar(s), {x}, [](const Var& g, const Var& self) {
    return std::vector<Var>{broadcast_scalar(g, self.input(0).shape())};
  });
}

Var mean_all(const Var& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

Var broadcast_scalar(const Var& s, Tensor::Shape shape) {
  check(s.size() == 1, "broadcast_scalar: source must be scalar");
  Tensor out(shape, s.val().item());
  return Var::make("broadcast_scalar", std::move(out), {s},
                   [](const Var& g, const Var&) { return std::vector<Var>{sum_all(g)}; });
}

Var sum_per_sample(const Var& x) {
  check(x.val().rank() >= 1, "sum_per_sample: rank must be >= 1");
  int64_t n = x.val().dim(0);
  int64_t stride = x.size() / std::max<int64_t>(n, 1);
  Tensor out({n});
  for (int64_t i = 0; i < n; ++i) {
    double s = 0;
    for (int64_t j = 0; j < stride; ++j) s += x.val()[i * stride + j];
    out[i] = s;
  }
  return Var::make("sum_per_sample", std::move(out), {x}, [](const Var& g, const Var& self) {
    return std::vector<Var>{broadcast_per_sample(g, self.input(0).shape())};
  });
}

Var broadcast_per_sample(const Var& s, Tensor::Shape shape) {
  check(s.val().rank() == 1 && !shape.empty() && s.val().dim(0) == shape[0],
        "broadcast_per_sample: leading dim mismatch");
  Tensor out(shape);
  int64_t n = shape[0];
  int64_t stride = out.size() / std::max<int64_t>(n, 1);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < stride; ++j) out[i * stride + j] = s.val()[i];
  return Var::make("broadcast_per_sample", std::move(out), {s},
                   [](const Var& g, const Var&) { return std::vector<Var>{sum_per_sample(g)}; });
}

Var sum_rows(const Var& x) {
  check(x.val().rank() == 2, "sum_rows: expects [n,m]");
  int64_t n = x.val().dim(0), m = x.val().dim(1);
  Tensor out({m});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out[j] += x.val()[i * m + j];
  return Var::make("sum_rows", std::move(out), {x}, [](const Var& g, const Var& self) {
    return std::vector<Var>{broadcast_rows(g, self.input(0).val().dim(0))};
  });
}

Var broadcast_rows(const Var& b, int64_t n) {
  check(b.val().rank() == 1, "broadcast_rows: expects [m]");
  int64_t m = b.val().dim(0);
  Tensor out({n, m});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out[i * m + j] = b.val()[j];
  return Var::make("broadcast_rows", std::move(out), {b},
                   [](const Var& g, const Var&) { return std::vector<Var>{sum_rows(g)}; });
}

Var sum_channel(const Var& x) {
  check(x.val().rank() == 4, "sum_channel: expects [N,C,H,W]");
  int64_t n = x.val().dim(0), c = x.val().dim(1), hw = x.val().dim(2) * x.val().dim(3);
  Tensor out({c});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      double s = 0;
      const double* p = x.val().data() + (in * c + ic) * hw;
      for (int64_t k = 0; k < hw; ++k) s += p[k];
      out[ic] += s;
    }
  return Var::make("sum_channel", std::move(out), {x}, [](const Var& g, const Var& self) {
    Tensor::Shape shape = self.input(0).shape();
    Var zeros = Var::leaf(Tensor::zeros(shape));
    return std::vector<Var>{add_channel(zeros, g)};
  });
}

Var add_channel(const Var& x, const Var& b) {
  check(x.val().rank() == 4 && b.val().rank() == 1 && b.val().dim(0) == x.val().dim(1),
        "add_channel: expects x[N,C,H,W], b[C]");
  int64_t n = x.val().dim(0), c = x.val().dim(1), hw = x.val().dim(2) * x.val().dim(3);
  Tensor out(x.shape());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const double* p = x.val().data() + (in * c + ic) * hw;
      double* q = out.data() + (in * c + ic) * hw;
      double bias = b.val()[ic];
      for (int64_t k = 0; k < hw; ++k) q[k] = p[k] + bias;
    }
  return Var::make("add_channel", std::move(out), {x, b}, [](const Var& g, const Var&) {
    return std::vector<Var>{g, sum_channel(g)};
  });
}

Var mul_channel(const Var& x, const Var& s) {
  check(x.val().rank() == 4 && s.val().rank() == 1 && s.val().dim(0) == x.val().dim(1),
        "mul_channel: expects x[N,C,H,W], s[C]");
  int64_t n = x.val().dim(0), c = x.val().dim(1), hw = x.val().dim(2) * x.val().dim(3);
  Tensor out(x.shape());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const double* p = x.val().data() + (in * c + ic) * hw;
      double* q = out.data() + (in * c + ic) * hw;
      double f = s.val()[ic];
      for (int64_t k = 0; k < hw; ++k) q[k] = p[k] * f;
    }
  return Var::make("mul_channel", std::move(out), {x, s}, [](const Var& g, const Var& self) {
    Var gx = mul_channel(g, self.input(1));
    Var gs = sum_channel(mul(g, self.input(0)));
    return std::vector<Var>{gx, gs};
  });
}

Var reshape(const Var& x, Tensor::Shape shape) {
  Tensor out = x.val().reshaped(shape);
  return Var::make("reshape", std::move(out), {x}, [](const Var& g, const Var& self) {
    return std::vector<Var>{reshape(g, self.input(0).shape())};
  });
}

Var transpose2d(const Var& x) {
  check(x.val().rank() == 2, "transpose2d: expects [n,m]");
  int64_t n = x.val().dim(0), m = x.val().dim(1);
  Tensor out({m, n});
  CMap a(x.val().data(), n, m);
  MMap o(out.data(), m, n);
  o = a.transpose();
  return Var::make("transpose2d", std::move(out), {x},
                   [](const Var& g, const Var&) { return std::vector<Var>{transpose2d(g)}; });
}

Var concat_channels(const std::vector<Var>& xs) {
  check(!xs.empty(), "concat_channels: empty input");
  int64_t n = xs[0].val().dim(0), h = xs[0].val().dim(2), w = xs[0].val().dim(3);
  int64_t ctot = 0;
  for (const auto& x : xs) {
    check(x.val().rank() == 4 && x.val().dim(0) == n && x.val().dim(2) == h && x.val().dim(3) == w,
          "concat_channels: incompatible shapes");
    ctot += x.val().dim(1);
  }
  Tensor out({n, ctot, h, w});
  int64_t hw = h * w;
  int64_t coff = 0;
  for (const auto& x : xs) {
    int64_t c = x.val().dim(1);
    for (int64_t in = 0; in < n; ++in)
      std::copy(x.val().data() + in * c * hw, x.val().data() + (in + 1) * c * hw,
                out.data() + (in * ctot + coff) * hw);
    coff += c;
  }
  std::vector<int64_t> widths;
  for (const auto& x : xs) widths.push_back(x.val().dim(1));
  return Var::make("concat_channels", std::move(out), xs,
                   [widths](const Var& g, const Var&) {
                     std::vector<Var> grads;
                     int64_t gn = g.val().dim(0), gc = g.val().dim(1);
                     int64_t ghw = g.val().dim(2) * g.val().dim(3);
                     int64_t coff2 = 0;
                     for (int64_t wdt : widths) {
                       Tensor part({gn, wdt, g.val().dim(2), g.val().dim(3)});
                       for (int64_t in = 0; in < gn; ++in)
                         std::copy(g.val().data() + (in * gc + coff2) * ghw,
                                   g.val().data() + (in * gc + coff2 + wdt) * ghw,
                                   part.data() + in * wdt * ghw);
                       coff2 += wdt;
                       grads.push_back(Var::leaf(std::move(part)));
                     }
                     return grads;
                   },
                   /*recordable=*/false);
}

Var slice_channels(const Var& x, int64_t c0, int64_t c1) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4 && 0 <= c0 && c0 < c1 && c1 <= xv.dim(1), "slice_channels: bad range");
  int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out({n, c1 - c0, xv.dim(2), xv.dim(3)});
  for (int64_t in = 0; in < n; ++in)
    std::copy(xv.data() + (in * c + c0) * hw, xv.data() + (in * c + c1) * hw,
              out.data() + in * (c1 - c0) * hw);
  return Var::make(
      "slice_channels", std::move(out), {x},
      [c0, c1](const Var& g, const Var& self) {
        const Tensor& xv2 = self.input(0).val();
        int64_t n2 = xv2.dim(0), c2 = xv2.dim(1), hw2 = xv2.dim(2) * xv2.dim(3);
        Tensor gx(xv2.shape());
        for (int64_t in = 0; in < n2; ++in)
          std::copy(g.val().data() + in * (c1 - c0) * hw2, g.val().data() + (in + 1) * (c1 - c0) * hw2,
                    gx.data() + (in * c2 + c0) * hw2);
        return std::vector<Var>{Var::leaf(std::move(gx))};
      },
      /*recordable=*/false);
}

namespace {
// Shared by crop2d for rank-3 and rank-4 tensors: rows/cols are the last two dims.
struct HwView {
  int64_t outer, h, w;
};
HwView hw_view(const Tensor& t, const char* op) {
  check(t.rank() >= 2, std::string(op) + ": rank must be >= 2");
  int64_t h = t.dim(t.rank() - 2), w = t.dim(t.rank() - 1);
  return {t.size() / (h * w), h, w};
}
}  // namespace

Var crop2d(const Var& x, int64_t r0, int64_t r1, int64_t c0, int64_t c1) {
  auto v = hw_view(x.val(), "crop2d");
  check(0 <= r0 && r0 < r1 && r1 <= v.h && 0 <= c0 && c0 < c1 && c1 <= v.w, "crop2d: bad bounds");
  Tensor::Shape shape = x.shape();
  shape[shape.size() - 2] = r1 - r0;
  shape[shape.size() - 1] = c1 - c0;
  Tensor out(shape);
  int64_t oh = r1 - r0, ow = c1 - c0;
  for (int64_t k = 0; k < v.outer; ++k)
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j)
        out[(k * oh + i) * ow + j] = x.val()[(k * v.h + (i + r0)) * v.w + (j + c0)];
  return Var::make("crop2d", std::move(out), {x}, [r0, r1, c0, c1](const Var& g, const Var& self) {
    auto v2 = hw_view(self.input(0).val(), "crop2d.bwd");
    Tensor gx(self.input(0).shape());
    int64_t oh = r1 - r0, ow = c1 - c0;
    for (int64_t k = 0; k < v2.outer; ++k)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j)
          gx[(k * v2.h + (i + r0)) * v2.w + (j + c0)] = g.val()[(k * oh + i) * ow + j];
    return std::vector<Var>{Var::leaf(std::move(gx))};
  },
  /*recordable=*/false);
}

Var flip_w(const Var& x) {
  auto v = hw_view(x.val(), "flip_w");
  Tensor out(x.shape());
  for (int64_t k = 0; k < v.outer; ++k)
    for (int64_t i = 0; i < v.h; ++i)
      for (int64_t j = 0; j < v.w; ++j)
        out[(k * v.h + i) * v.w + j] = x.val()[(k * v.h + i) * v.w + (v.w - 1 - j)];
  return Var::make("flip_w", std::move(out), {x},
                   [](const Var& g, const Var&) { return std::vector<Var>{flip_w(g)}; });
}

Var matmul(const Var& a, const Var& b) {
  check(a.val().rank() == 2 && b.val().rank() == 2 && a.val().dim(1) == b.val().dim(0),
        "matmul: shapes " + a.val().shape_str() + " x " + b.val().shape_str());
  int64_t n = a.val().dim(0), k = a.val().dim(1), m = b.val().dim(1);
  Tensor out({n, m});
  CMap ma(a.val().data(), n, k);
  CMap mb(b.val().data(), k, m);
  MMap mo(out.data(), n, m);
  mo.noalias() = ma * mb;
  return Var::make("matmul", std::move(out), {a, b}, [](const Var& g, const Var& self) {
    Var ga = matmul(g, transpose2d(self.input(1)));
    Var gb = matmul(transpose2d(self.input(0)), g);
    return std::vector<Var>{ga, gb};
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  check(x.val().rank() == 2 && weight.val().rank() == 2 && x.val().dim(1) == weight.val().dim(1),
        "linear: expects x[n,k], weight[m,k]");
  Var y = matmul(x, transpose2d(weight));
  if (bias.defined()) y = add(y, broadcast_rows(bias, x.val().dim(0)));
  return y;
}

}  // namespace depthlab::ops
