#include <Eigen/Core>
#include <cmath>

#include "depthlab/ops.hpp"

namespace depthlab::ops {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

int64_t conv_out(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// col is [C*kh*kw, Ho*Wo]
void im2col(const Tensor& x, int64_t n, int64_t k, int64_t stride, int64_t pad, EMat& col) {
  int64_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t ho = conv_out(h, k, stride, pad), wo = conv_out(w, k, stride, pad);
  const double* base = x.data() + n * c * h * w;
  for (int64_t ic = 0; ic < c; ++ic)
    for (int64_t ki = 0; ki < k; ++ki)
      for (int64_t kj = 0; kj < k; ++kj) {
        int64_t row = (ic * k + ki) * k + kj;
        double* dst = col.data() + row * ho * wo;
        for (int64_t oi = 0; oi < ho; ++oi) {
          int64_t ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= h) {
            std::fill(dst + oi * wo, dst + (oi + 1) * wo, 0.0);
            continue;
          }
          const double* src = base + (ic * h + ii) * w;
          for (int64_t oj = 0; oj < wo; ++oj) {
            int64_t jj = oj * stride + kj - pad;
            dst[oi * wo + oj] = (jj >= 0 && jj < w) ? src[jj] : 0.0;
          }
        }
      }
}

void col2im_add(const EMat& col, int64_t n, int64_t k, int64_t stride, int64_t pad, Tensor& gx) {
  int64_t c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
  int64_t ho = conv_out(h, k, stride, pad), wo = conv_out(w, k, stride, pad);
  double* base = gx.data() + n * c * h * w;
  for (int64_t ic = 0; ic < c; ++ic)
    for (int64_t ki = 0; ki < k; ++ki)
      for (int64_t kj = 0; kj < k; ++kj) {
        int64_t row = (ic * k + ki) * k + kj;
        const double* src = col.data() + row * ho * wo;
        for (int64_t oi = 0; oi < ho; ++oi) {
          int64_t ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= h) continue;
          double* dst = base + (ic * h + ii) * w;
          for (int64_t oj = 0; oj < wo; ++oj) {
            int64_t jj = oj * stride + kj - pad;
            if (jj >= 0 && jj < w) dst[jj] += src[oi * wo + oj];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& xv = x.val();
  const Tensor& wv = weight.val();
  check(xv.rank() == 4 && wv.rank() == 4 && xv.dim(1) == wv.dim(1) && wv.dim(2) == wv.dim(3),
        "conv2d: expects x[N,C,H,W], w[O,C,k,k]");
  int64_t n = xv.dim(0), o = wv.dim(0), k = wv.dim(2);
  int64_t ho = conv_out(xv.dim(2), k, stride, pad), wo = conv_out(xv.dim(3), k, stride, pad);
  check(ho > 0 && wo > 0, "conv2d: output would be empty");
  int64_t ck2 = wv.dim(1) * k * k;

  Tensor out({n, o, ho, wo});
  {
    EMat col(ck2, ho * wo);
    CMap wm(wv.data(), o, ck2);
    for (int64_t in = 0; in < n; ++in) {
      im2col(xv, in, k, stride, pad, col);
      MMap om(out.data() + in * o * ho * wo, o, ho * wo);
      om.noalias() = wm * col;
    }
    if (bias.defined())
      for (int64_t in = 0; in < n; ++in)
        for (int64_t io = 0; io < o; ++io) {
          double b = bias.val()[io];
          double* p = out.data() + (in * o + io) * ho * wo;
          for (int64_t q = 0; q < ho * wo; ++q) p[q] += b;
        }
  }

  std::vector<Var> inputs{x, weight};
  bool has_bias = bias.defined();
  if (has_bias) inputs.push_back(bias);
  return Var::make(
      "conv2d", std::move(out), std::move(inputs),
      [stride, pad, has_bias](const Var& g, const Var& self) {
        const Tensor& xv2 = self.input(0).val();
        const Tensor& wv2 = self.input(1).val();
        const Tensor& gv = g.val();
        int64_t n2 = xv2.dim(0), o2 = wv2.dim(0), k2 = wv2.dim(2);
        int64_t ho2 = gv.dim(2), wo2 = gv.dim(3);
        int64_t ck = wv2.dim(1) * k2 * k2;
        Tensor gx(xv2.shape());
        Tensor gw(wv2.shape());
        EMat col(ck, ho2 * wo2);
        EMat gcol(ck, ho2 * wo2);
        CMap wm(wv2.data(), o2, ck);
        MMap gwm(gw.data(), o2, ck);
        for (int64_t in = 0; in < n2; ++in) {
          CMap gm(gv.data() + in * o2 * ho2 * wo2, o2, ho2 * wo2);
          im2col(xv2, in, k2, stride, pad, col);
          gwm.noalias() += gm * col.transpose();
          gcol.noalias() = wm.transpose() * gm;
          col2im_add(gcol, in, k2, stride, pad, gx);
        }
        std::vector<Var> grads{Var::leaf(std::move(gx)), Var::leaf(std::move(gw))};
        if (has_bias) {
          Tensor gb({o2});
          for (int64_t in = 0; in < n2; ++in)
            for (int64_t io = 0; io < o2; ++io) {
              const double* p = gv.data() + (in * o2 + io) * ho2 * wo2;
              double s = 0;
              for (int64_t q = 0; q < ho2 * wo2; ++q) s += p[q];
              gb[io] += s;
            }
          grads.push_back(Var::leaf(std::move(gb)));
        }
        return grads;
      },
      /*recordable=*/false);
}

Var maxpool2d_3x3s2(const Var& x) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4, "maxpool2d: expects [N,C,H,W]");
  int64_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  int64_t ho = conv_out(h, 3, 2, 1), wo = conv_out(w, 3, 2, 1);
  Tensor out({n, c, ho, wo});
  for (int64_t nc = 0; nc < n * c; ++nc) {
    const double* src = xv.data() + nc * h * w;
    double* dst = out.data() + nc * ho * wo;
    for (int64_t oi = 0; oi < ho; ++oi)
      for (int64_t oj = 0; oj < wo; ++oj) {
        double best = -1e300;
        for (int64_t ki = 0; ki < 3; ++ki)
          for (int64_t kj = 0; kj < 3; ++kj) {
            int64_t ii = oi * 2 + ki - 1, jj = oj * 2 + kj - 1;
            if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
            best = std::max(best, src[ii * w + jj]);
          }
        dst[oi * wo + oj] = best;
      }
  }
  return Var::make(
      "maxpool2d", std::move(out), {x},
      [](const Var& g, const Var& self) {
        const Tensor& xv2 = self.input(0).val();
        const Tensor& yv = self.val();
        const Tensor& gv = g.val();
        int64_t n2 = xv2.dim(0), c2 = xv2.dim(1), h2 = xv2.dim(2), w2 = xv2.dim(3);
        int64_t ho2 = yv.dim(2), wo2 = yv.dim(3);
        Tensor gx(xv2.shape());
        for (int64_t nc = 0; nc < n2 * c2; ++nc) {
          const double* src = xv2.data() + nc * h2 * w2;
          const double* yval = yv.data() + nc * ho2 * wo2;
          const double* gp = gv.data() + nc * ho2 * wo2;
          double* dst = gx.data() + nc * h2 * w2;
          for (int64_t oi = 0; oi < ho2; ++oi)
            for (int64_t oj = 0; oj < wo2; ++oj) {
              double target = yval[oi * wo2 + oj];
              // route to the first window element equal to the max
              for (int64_t ki = 0; ki < 3; ++ki) {
                bool done = false;
                for (int64_t kj = 0; kj < 3; ++kj) {
                  int64_t ii = oi * 2 + ki - 1, jj = oj * 2 + kj - 1;
                  if (ii < 0 || ii >= h2 || jj < 0 || jj >= w2) continue;
                  if (src[ii * w2 + jj] == target) {
                    dst[ii * w2 + jj] += gp[oi * wo2 + oj];
                    done = true;
                    break;
                  }
                }
                if (done) break;
              }
            }
        }
        return std::vector<Var>{Var::leaf(std::move(gx))};
      },
      /*recordable=*/false);
}

Var upsample_nearest2(const Var& x) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4, "upsample_nearest2: expects [N,C,H,W]");
  int64_t nc = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out({xv.dim(0), xv.dim(1), 2 * h, 2 * w});
  for (int64_t k = 0; k < nc; ++k) {
    const double* src = xv.data() + k * h * w;
    double* dst = out.data() + k * 4 * h * w;
    for (int64_t i = 0; i < 2 * h; ++i)
      for (int64_t j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + (j / 2)];
  }
  return Var::make("upsample_nearest2", std::move(out), {x},
                   [](const Var& g, const Var&) { return std::vector<Var>{downsample_sum2(g)}; });
}

Var downsample_sum2(const Var& x) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4 && xv.dim(2) % 2 == 0 && xv.dim(3) % 2 == 0,
        "downsample_sum2: spatial dims must be even");
  int64_t nc = xv.dim(0) * xv.dim(1), h = xv.dim(2) / 2, w = xv.dim(3) / 2;
  Tensor out({xv.dim(0), xv.dim(1), h, w});
  for (int64_t k = 0; k < nc; ++k) {
    const double* src = xv.data() + k * 4 * h * w;
    double* dst = out.data() + k * h * w;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        dst[i * w + j] = src[(2 * i) * 2 * w + 2 * j] + src[(2 * i) * 2 * w + 2 * j + 1] +
                         src[(2 * i + 1) * 2 * w + 2 * j] + src[(2 * i + 1) * 2 * w + 2 * j + 1];
  }
  return Var::make("downsample_sum2", std::move(out), {x},
                   [](const Var& g, const Var&) { return std::vector<Var>{upsample_nearest2(g)}; });
}

Var avg_pool2(const Var& x) { return scale(downsample_sum2(x), 0.25); }

namespace {
Var adaptive_avg_pool_adjoint(const Var& g, int64_t in_h, int64_t in_w);
}

Var adaptive_avg_pool(const Var& x, int64_t oh, int64_t ow) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4 && oh >= 1 && ow >= 1 && oh <= xv.dim(2) && ow <= xv.dim(3),
        "adaptive_avg_pool: bad target size");
  int64_t nc = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out({xv.dim(0), xv.dim(1), oh, ow});
  for (int64_t k = 0; k < nc; ++k) {
    const double* src = xv.data() + k * h * w;
    double* dst = out.data() + k * oh * ow;
    for (int64_t oi = 0; oi < oh; ++oi) {
      int64_t r0 = oi * h / oh, r1 = (oi + 1) * h / oh;
      for (int64_t oj = 0; oj < ow; ++oj) {
        int64_t c0 = oj * w / ow, c1 = (oj + 1) * w / ow;
        double s = 0;
        for (int64_t i = r0; i < r1; ++i)
          for (int64_t j = c0; j < c1; ++j) s += src[i * w + j];
        dst[oi * ow + oj] = s / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
  }
  return Var::make("adaptive_avg_pool", std::move(out), {x}, [h, w](const Var& g, const Var&) {
    return std::vector<Var>{adaptive_avg_pool_adjoint(g, h, w)};
  });
}

namespace {
Var adaptive_avg_pool_adjoint(const Var& g, int64_t in_h, int64_t in_w) {
  const Tensor& gv = g.val();
  int64_t nc = gv.dim(0) * gv.dim(1), oh = gv.dim(2), ow = gv.dim(3);
  Tensor out({gv.dim(0), gv.dim(1), in_h, in_w});
  for (int64_t k = 0; k < nc; ++k) {
    const double* src = gv.data() + k * oh * ow;
    double* dst = out.data() + k * in_h * in_w;
    for (int64_t oi = 0; oi < oh; ++oi) {
      int64_t r0 = oi * in_h / oh, r1 = (oi + 1) * in_h / oh;
      for (int64_t oj = 0; oj < ow; ++oj) {
        int64_t c0 = oj * in_w / ow, c1 = (oj + 1) * in_w / ow;
        double v = src[oi * ow + oj] / static_cast<double>((r1 - r0) * (c1 - c0));
        for (int64_t i = r0; i < r1; ++i)
          for (int64_t j = c0; j < c1; ++j) dst[i * in_w + j] += v;
      }
    }
  }
  int64_t oh2 = oh, ow2 = ow;
  return Var::make("adaptive_avg_pool_adjoint", std::move(out), {g},
                   [oh2, ow2](const Var& gg, const Var&) {
                     return std::vector<Var>{adaptive_avg_pool(gg, oh2, ow2)};
                   });
}
}  // namespace

namespace {
Var box_mean3_adjoint(const Var& g, int64_t in_h, int64_t in_w);
}

Var box_mean3(const Var& x) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4 && xv.dim(2) >= 3 && xv.dim(3) >= 3,
        "box_mean3: image smaller than 3x3 window");
  int64_t nc = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  int64_t oh = h - 2, ow = w - 2;
  Tensor out({xv.dim(0), xv.dim(1), oh, ow});
  for (int64_t k = 0; k < nc; ++k) {
    const double* src = xv.data() + k * h * w;
    double* dst = out.data() + k * oh * ow;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        double s = 0;
        for (int64_t di = 0; di < 3; ++di)
          for (int64_t dj = 0; dj < 3; ++dj) s += src[(i + di) * w + (j + dj)];
        dst[i * ow + j] = s / 9.0;
      }
  }
  return Var::make("box_mean3", std::move(out), {x}, [h, w](const Var& g, const Var&) {
    return std::vector<Var>{box_mean3_adjoint(g, h, w)};
  });
}

namespace {
Var box_mean3_adjoint(const Var& g, int64_t in_h, int64_t in_w) {
  const Tensor& gv = g.val();
  int64_t nc = gv.dim(0) * gv.dim(1), oh = gv.dim(2), ow = gv.dim(3);
  Tensor out({gv.dim(0), gv.dim(1), in_h, in_w});
  for (int64_t k = 0; k < nc; ++k) {
    const double* src = gv.data() + k * oh * ow;
    double* dst = out.data() + k * in_h * in_w;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) {
        double v = src[i * ow + j] / 9.0;
        for (int64_t di = 0; di < 3; ++di)
          for (int64_t dj = 0; dj < 3; ++dj) dst[(i + di) * in_w + (j + dj)] += v;
      }
  }
  return Var::make("box_mean3_adjoint", std::move(out), {g}, [](const Var& gg, const Var&) {
    return std::vector<Var>{box_mean3(gg)};
  });
}
}  // namespace

Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta, const Tensor& batch_mean,
                    const Tensor& batch_var, double eps) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4, "batchnorm: expects [N,C,H,W]");
  int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out(xv.shape());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      double inv = 1.0 / std::sqrt(batch_var[ic] + eps);
      double gmma = gamma.val()[ic], bta = beta.val()[ic], mu = batch_mean[ic];
      const double* p = xv.data() + (in * c + ic) * hw;
      double* q = out.data() + (in * c + ic) * hw;
      for (int64_t k = 0; k < hw; ++k) q[k] = gmma * (p[k] - mu) * inv + bta;
    }
  Tensor mean_copy = batch_mean, var_copy = batch_var;
  return Var::make(
      "batchnorm_train", std::move(out), {x, gamma, beta},
      [mean_copy, var_copy, eps](const Var& g, const Var& self) {
        const Tensor& xv2 = self.input(0).val();
        const Tensor& gv = g.val();
        const Tensor& gm = self.input(1).val();
        int64_t n2 = xv2.dim(0), c2 = xv2.dim(1), hw2 = xv2.dim(2) * xv2.dim(3);
        double m = static_cast<double>(n2 * hw2);
        Tensor gx(xv2.shape()), ggamma({c2}), gbeta({c2});
        for (int64_t ic = 0; ic < c2; ++ic) {
          double inv = 1.0 / std::sqrt(var_copy[ic] + eps);
          double mu = mean_copy[ic];
          double sum_g = 0, sum_gxh = 0;
          for (int64_t in = 0; in < n2; ++in) {
            const double* xp = xv2.data() + (in * c2 + ic) * hw2;
            const double* gp = gv.data() + (in * c2 + ic) * hw2;
            for (int64_t k = 0; k < hw2; ++k) {
              double xh = (xp[k] - mu) * inv;
              sum_g += gp[k];
              sum_gxh += gp[k] * xh;
            }
          }
          ggamma[ic] = sum_gxh;
          gbeta[ic] = sum_g;
          double mg = sum_g / m, mgxh = sum_gxh / m;
          double s = gm[ic] * inv;
          for (int64_t in = 0; in < n2; ++in) {
            const double* xp = xv2.data() + (in * c2 + ic) * hw2;
            const double* gp = gv.data() + (in * c2 + ic) * hw2;
            double* op = gx.data() + (in * c2 + ic) * hw2;
            for (int64_t k = 0; k < hw2; ++k) {
              double xh = (xp[k] - mu) * inv;
              op[k] = s * (gp[k] - mg - xh * mgxh);
            }
          }
        }
        return std::vector<Var>{Var::leaf(std::move(gx)), Var::leaf(std::move(ggamma)),
                                Var::leaf(std::move(gbeta))};
      },
      /*recordable=*/false);
}

Var instancenorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.val();
  check(xv.rank() == 4, "instancenorm: expects [N,C,H,W]");
  int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out(xv.shape());
  Tensor means({n, c}), vars({n, c});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const double* p = xv.data() + (in * c + ic) * hw;
      double mu = 0;
      for (int64_t k = 0; k < hw; ++k) mu += p[k];
      mu /= static_cast<double>(hw);
      double var = 0;
      for (int64_t k = 0; k < hw; ++k) var += (p[k] - mu) * (p[k] - mu);
      var /= static_cast<double>(hw);
      means.at(in, ic) = mu;
      vars.at(in, ic) = var;
      double inv = 1.0 / std::sqrt(var + eps);
      double* q = out.data() + (in * c + ic) * hw;
      for (int64_t k = 0; k < hw; ++k) q[k] = gamma.val()[ic] * (p[k] - mu) * inv + beta.val()[ic];
    }
  return Var::make(
      "instancenorm", std::move(out), {x, gamma, beta},
      [means, vars, eps](const Var& g, const Var& self) {
        const Tensor& xv2 = self.input(0).val();
        const Tensor& gv = g.val();
        const Tensor& gm = self.input(1).val();
        int64_t n2 = xv2.dim(0), c2 = xv2.dim(1), hw2 = xv2.dim(2) * xv2.dim(3);
        double m = static_cast<double>(hw2);
        Tensor gx(xv2.shape()), ggamma({c2}), gbeta({c2});
        for (int64_t in = 0; in < n2; ++in)
          for (int64_t ic = 0; ic < c2; ++ic) {
            double inv = 1.0 / std::sqrt(vars.at(in, ic) + eps);
            double mu = means.at(in, ic);
            const double* xp = xv2.data() + (in * c2 + ic) * hw2;
            const double* gp = gv.data() + (in * c2 + ic) * hw2;
            double sum_g = 0, sum_gxh = 0;
            for (int64_t k = 0; k < hw2; ++k) {
              double xh = (xp[k] - mu) * inv;
              sum_g += gp[k];
              sum_gxh += gp[k] * xh;
            }
            ggamma[ic] += sum_gxh;
            gbeta[ic] += sum_g;
            double mg = sum_g / m, mgxh = sum_gxh / m;
            double s = gm[ic] * inv;
            double* op = gx.data() + (in * c2 + ic) * hw2;
            for (int64_t k = 0; k < hw2; ++k) {
              double xh = (xp[k] - mu) * inv;
              op[k] = s * (gp[k] - mg - xh * mgxh);
            }
          }
        return std::vector<Var>{Var::leaf(std::move(gx)), Var::leaf(std::move(ggamma)),
                                Var::leaf(std::move(gbeta))};
      },
      /*recordable=*/false);
}

Var warp(const Var& image, const Var& disparity, int direction) {
  const Tensor& iv = image.val();
  const Tensor& dv = disparity.val();
  check(direction == 1 || direction == -1, "warp: direction must be +1 or -1");
  check(iv.rank() == 4 && dv.rank() == 3, "warp: expects image[N,C,H,W], disparity[N,H,W]");
  check(iv.dim(0) == dv.dim(0) && iv.dim(2) == dv.dim(1) && iv.dim(3) == dv.dim(2),
        "warp: image/disparity dimension mismatch " + iv.shape_str() + " vs " + dv.shape_str());
  for (int64_t i = 0; i < dv.size(); ++i)
    check(std::isfinite(dv[i]), "warp: non-finite disparity value");

  int64_t n = iv.dim(0), c = iv.dim(1), h = iv.dim(2), w = iv.dim(3);
  double wd = static_cast<double>(w);
  Tensor out(iv.shape());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) {
        double xx = static_cast<double>(j) + direction * dv.at(in, i, j) * wd;
        xx = std::min(std::max(xx, 0.0), wd - 1.0);
        int64_t x0 = static_cast<int64_t>(std::floor(xx));
        int64_t x1 = std::min(x0 + 1, w - 1);
        double f = xx - static_cast<double>(x0);
        for (int64_t ic = 0; ic < c; ++ic) {
          const double* row = iv.data() + ((in * c + ic) * h + i) * w;
          out.at(in, ic, i, j) = (1.0 - f) * row[x0] + f * row[x1];
        }
      }

  return Var::make(
      "warp", std::move(out), {image, disparity},
      [direction](const Var& g, const Var& self) {
        const Tensor& iv2 = self.input(0).val();
        const Tensor& dv2 = self.input(1).val();
        const Tensor& gv = g.val();
        int64_t n2 = iv2.dim(0), c2 = iv2.dim(1), h2 = iv2.dim(2), w2 = iv2.dim(3);
        double wd2 = static_cast<double>(w2);
        Tensor gimg(iv2.shape());
        Tensor gdisp(dv2.shape());
        for (int64_t in = 0; in < n2; ++in)
          for (int64_t i = 0; i < h2; ++i)
            for (int64_t j = 0; j < w2; ++j) {
              double raw = static_cast<double>(j) + direction * dv2.at(in, i, j) * wd2;
              double xx = std::min(std::max(raw, 0.0), wd2 - 1.0);
              int64_t x0 = static_cast<int64_t>(std::floor(xx));
              int64_t x1 = std::min(x0 + 1, w2 - 1);
              double f = xx - static_cast<double>(x0);
              bool interior = raw > 0.0 && raw < wd2 - 1.0;
              double gd = 0;
              for (int64_t ic = 0; ic < c2; ++ic) {
                const double* row = iv2.data() + ((in * c2 + ic) * h2 + i) * w2;
                double gout = gv.at(in, ic, i, j);
                double* grow = gimg.data() + ((in * c2 + ic) * h2 + i) * w2;
                grow[x0] += (1.0 - f) * gout;
                grow[x1] += f * gout;
                if (interior) gd += gout * (row[x1] - row[x0]);
              }
              gdisp.at(in, i, j) = gd * direction * wd2;
            }
        return std::vector<Var>{Var::leaf(std::move(gimg)), Var::leaf(std::move(gdisp))};
      },
      /*recordable=*/false);
}

}  // namespace depthlab::ops
