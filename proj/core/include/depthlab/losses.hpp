#pragma once

#include <string>
#include <vector>

#include "depthlab/ops.hpp"

namespace depthlab::losses {

/// Weights of the composite reconstruction objective plus the adversarial
/// mixing weight phi_g. Components can be toggled for the ablation matrix;
/// an empty set is the GAN-only configuration.
struct LossWeights {
  double gamma_l1 = 0.15;
  double gamma_ssim = 0.85;
  double gamma_lr = 1.0;
  double gamma_disp = 0.1;
  double phi_g = 0.1;
  bool use_l1 = true;
  bool use_ssim = true;
  bool use_lr = true;
  bool use_disp = true;

  bool any_component() const { return use_l1 || use_ssim || use_lr || use_disp; }
};

/// Per-scale bundle the engine assembles after warping: reconstructions,
/// disparities and pooled targets for both views, finest scale first.
struct ScaleOutputs {
  std::vector<Var> recon_left, recon_right;    // [N,C,H_s,W_s]
  std::vector<Var> disp_left, disp_right;      // [N,H_s,W_s]
  std::vector<Var> target_left, target_right;  // [N,C,H_s,W_s]

  int64_t scales() const { return static_cast<int64_t>(disp_left.size()); }
};

/// Per-component values of the last reconstruction_loss call (for logging).
struct LossBreakdown {
  double l1 = 0, ssim = 0, lr = 0, disp = 0, total = 0;
};

/// Mean absolute difference over pixels and channels.
Var l1_loss(const Var& reconstruction, const Var& target);

/// Mean over valid 3x3 windows of (1 - SSIM)/2, with c1 = 0.01^2, c2 = 0.03^2.
Var ssim_loss(const Var& reconstruction, const Var& target);

/// mean |d_a(i,j) - d_b(i, j + direction*d_a(i,j)*W)|; the shifted read uses
/// the bilinear sampler with edge clamp. direction +1 is the left instance,
/// the symmetric right instance uses direction -1 with roles swapped.
Var lr_consistency_loss(const Var& d_a, const Var& d_b, int direction = +1);

/// Edge-aware smoothness: mean |dx d| exp(-|dx I|) + |dy d| exp(-|dy I|) with
/// forward differences; the channel norm is the mean absolute channel
/// gradient. Each directional term averages over its valid positions.
Var smoothness_loss(const Var& disparity, const Var& image);

/// Multi-scale weighted sum per Eqs. 8-9; left and right instances of every
/// component are summed, the smoothness term is scaled by 1/2^s.
Var reconstruction_loss(const ScaleOutputs& outputs, const LossWeights& weights,
                        LossBreakdown* breakdown = nullptr);

}  // namespace depthlab::losses
