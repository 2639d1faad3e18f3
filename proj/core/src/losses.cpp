#include "depthlab/losses.hpp"

#include <cmath>

namespace depthlab::losses {

namespace {

using namespace ops;

Var as_batched_image(const Var& x, const char* who) {
  if (x.val().rank() == 4) return x;
  check(x.val().rank() == 3, std::string(who) + ": expects [C,H,W] or [N,C,H,W]");
  auto s = x.shape();
  return reshape(x, {1, s[0], s[1], s[2]});
}

Var as_batched_disp(const Var& d, const char* who) {
  if (d.val().rank() == 3) return d;
  check(d.val().rank() == 2, std::string(who) + ": expects [H,W] or [N,H,W]");
  auto s = d.shape();
  return reshape(d, {1, s[0], s[1]});
}

}  // namespace

Var l1_loss(const Var& reconstruction, const Var& target) {
  check(reconstruction.val().same_shape(target.val()), "l1_loss: dimension mismatch");
  return ops::mean_all(ops::abs_v(reconstruction - target));
}

Var ssim_loss(const Var& reconstruction, const Var& target) {
  check(reconstruction.val().same_shape(target.val()), "ssim_loss: dimension mismatch");
  Var x = as_batched_image(reconstruction, "ssim_loss");
  Var y = as_batched_image(target, "ssim_loss");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;

  Var mu_x = ops::box_mean3(x);
  Var mu_y = ops::box_mean3(y);
  Var sigma_x = ops::box_mean3(x * x) - mu_x * mu_x;
  Var sigma_y = ops::box_mean3(y * y) - mu_y * mu_y;
  Var sigma_xy = ops::box_mean3(x * y) - mu_x * mu_y;

  Var num = ops::add_scalar(ops::scale(mu_x * mu_y, 2.0), c1) *
            ops::add_scalar(ops::scale(sigma_xy, 2.0), c2);
  Var den = ops::add_scalar(mu_x * mu_x + mu_y * mu_y, c1) *
            ops::add_scalar(sigma_x + sigma_y, c2);
  Var ssim = num / den;
  return ops::mean_all(ops::scale(ops::rsub_scalar(1.0, ssim), 0.5));
}

Var lr_consistency_loss(const Var& d_a, const Var& d_b, int direction) {
  check(d_a.val().same_shape(d_b.val()), "lr_consistency_loss: dimension mismatch");
  Var a = as_batched_disp(d_a, "lr_consistency_loss");
  Var b = as_batched_disp(d_b, "lr_consistency_loss");
  auto s = a.shape();
  Var b_img = ops::reshape(b, {s[0], 1, s[1], s[2]});
  Var sampled = ops::reshape(ops::warp(b_img, a, direction), s);
  return ops::mean_all(ops::abs_v(a - sampled));
}

Var smoothness_loss(const Var& disparity, const Var& image) {
  Var d = as_batched_disp(disparity, "smoothness_loss");
  Var img = as_batched_image(image, "smoothness_loss");
  check(d.val().dim(0) == img.val().dim(0) && d.val().dim(1) == img.val().dim(2) &&
            d.val().dim(2) == img.val().dim(3),
        "smoothness_loss: dimension mismatch");
  int64_t h = d.val().dim(1), w = d.val().dim(2);

  // Edge weights exp(-mean_c |dI|) are data; computed outside the tape.
  Tensor wx, wy;
  {
    NoRecordGuard norec;
    const Tensor& iv = img.val();
    int64_t n = iv.dim(0), c = iv.dim(1);
    if (w > 1) {
      wx = Tensor({n, h, w - 1});
      for (int64_t in = 0; in < n; ++in)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j + 1 < w; ++j) {
            double s = 0;
            for (int64_t ic = 0; ic < c; ++ic)
              s += std::fabs(iv.at(in, ic, i, j + 1) - iv.at(in, ic, i, j));
            wx.at(in, i, j) = std::exp(-s / static_cast<double>(c));
          }
    }
    if (h > 1) {
      wy = Tensor({n, h - 1, w});
      for (int64_t in = 0; in < n; ++in)
        for (int64_t i = 0; i + 1 < h; ++i)
          for (int64_t j = 0; j < w; ++j) {
            double s = 0;
            for (int64_t ic = 0; ic < c; ++ic)
              s += std::fabs(iv.at(in, ic, i + 1, j) - iv.at(in, ic, i, j));
            wy.at(in, i, j) = std::exp(-s / static_cast<double>(c));
          }
    }
  }

  Var total = Var::leaf(Tensor::scalar(0.0));
  if (w > 1) {
    Var dx = ops::crop2d(d, 0, h, 1, w) - ops::crop2d(d, 0, h, 0, w - 1);
    total = total + ops::mean_all(ops::abs_v(dx) * Var::leaf(wx));
  }
  if (h > 1) {
    Var dy = ops::crop2d(d, 1, h, 0, w) - ops::crop2d(d, 0, h - 1, 0, w);
    total = total + ops::mean_all(ops::abs_v(dy) * Var::leaf(wy));
  }
  return total;
}

Var reconstruction_loss(const ScaleOutputs& outputs, const LossWeights& weights,
                        LossBreakdown* breakdown) {
  int64_t s_count = outputs.scales();
  check(s_count >= 1 && s_count <= 4, "reconstruction_loss: scales must be in 1..4");
  check(static_cast<int64_t>(outputs.recon_left.size()) == s_count &&
            static_cast<int64_t>(outputs.recon_right.size()) == s_count &&
            static_cast<int64_t>(outputs.disp_right.size()) == s_count &&
            static_cast<int64_t>(outputs.target_left.size()) == s_count &&
            static_cast<int64_t>(outputs.target_right.size()) == s_count,
        "reconstruction_loss: outputs not populated for all scales");

  LossBreakdown bd;
  Var total = Var::leaf(Tensor::scalar(0.0));
  for (int64_t s = 0; s < s_count; ++s) {
    if (weights.use_l1) {
      Var term = l1_loss(outputs.recon_left[s], outputs.target_left[s]) +
                 l1_loss(outputs.recon_right[s], outputs.target_right[s]);
      bd.l1 += weights.gamma_l1 * term.item();
      total = total + ops::scale(term, weights.gamma_l1);
    }
    if (weights.use_ssim) {
      Var term = ssim_loss(outputs.recon_left[s], outputs.target_left[s]) +
                 ssim_loss(outputs.recon_right[s], outputs.target_right[s]);
      bd.ssim += weights.gamma_ssim * term.item();
      total = total + ops::scale(term, weights.gamma_ssim);
    }
    if (weights.use_lr) {
      Var term = lr_consistency_loss(outputs.disp_left[s], outputs.disp_right[s], +1) +
                 lr_consistency_loss(outputs.disp_right[s], outputs.disp_left[s], -1);
      bd.lr += weights.gamma_lr * term.item();
      total = total + ops::scale(term, weights.gamma_lr);
    }
    if (weights.use_disp) {
      double factor = weights.gamma_disp / std::pow(2.0, static_cast<double>(s));
      Var term = smoothness_loss(outputs.disp_left[s], outputs.target_left[s]) +
                 smoothness_loss(outputs.disp_right[s], outputs.target_right[s]);
      bd.disp += factor * term.item();
      total = total + ops::scale(term, factor);
    }
  }
  bd.total = total.item();
  if (breakdown) *breakdown = bd;
  return total;
}

}  // namespace depthlab::losses
