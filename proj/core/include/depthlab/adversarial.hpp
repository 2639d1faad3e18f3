#pragma once

#include <memory>

#include "depthlab/nn.hpp"

namespace depthlab::adversarial {

enum class GanKind { NONE, VANILLA, LSGAN, WGAN_GP };

struct GanVariant {
  GanKind kind = GanKind::NONE;
  double lambda_gp = 10.0;
  int n_critic = 1;
  /// Eq. 14 as printed uses +E[D(fake)] for the generator; the default
  /// follows the text's NS-GAN direction (-E). The printed sign is exposed
  /// as an explicit switch rather than guessed.
  bool wgan_printed_g_sign = false;
};

class Discriminator : public nn::ModuleBase {
 public:
  /// VANILLA: per-patch probabilities in (0,1); LSGAN: unbounded per-patch
  /// scores [N,1,h,w]; WGAN_GP: per-sample scalars [N].
  virtual Var forward(const Var& images, bool training) = 0;
};

/// Five-layer patch discriminator: 64-128-256-512-1 channels, 4x4 kernels,
/// stride 2 on the first three layers, leaky slope 0.2, batch norm on layers
/// 2-4. Applies a sigmoid head when built for the vanilla objective.
class PatchDiscriminator final : public Discriminator {
 public:
  PatchDiscriminator(bool sigmoid_output, uint64_t seed);
  Var forward(const Var& images, bool training) override;

 private:
  nn::Conv2d c1_, c2_, c3_, c4_, c5_;
  nn::Norm2d n2_, n3_, n4_;
  bool sigmoid_output_;
};

/// Fully-connected WGAN-GP critic: adaptive average pooling to a small grid
/// followed by 3 linear layers (512, 256, 1) with leaky rectifiers. No
/// normalization layers anywhere on the path (the gradient penalty couples
/// samples otherwise), which also keeps the whole forward twice
/// differentiable.
class FcCritic final : public Discriminator {
 public:
  FcCritic(int64_t channels, int64_t pool_h, int64_t pool_w, uint64_t seed,
           int64_t hidden1 = 512, int64_t hidden2 = 256);
  Var forward(const Var& images, bool training) override;

 private:
  int64_t pool_h_, pool_w_;
  nn::Linear f1_, f2_, f3_;
};

/// Builds the paper's discriminator for the variant; input_shape is
/// {C, H, W} of the training images.
std::unique_ptr<Discriminator> build_discriminator(const GanVariant& variant,
                                                   const Tensor::Shape& input_shape,
                                                   uint64_t seed);

/// Discriminator/critic minimization objective. fake should be detached from
/// the generator graph. For WGAN_GP the gradient penalty is included with
/// interpolation factors drawn per sample from rng.
Var d_loss(const GanVariant& variant, Discriminator& d, const Var& real, const Var& fake,
           Rng& rng, bool training = true);

/// Generator-side adversarial term (Eq. 16 is formed by the caller as
/// L_rec + phi_g * g_loss).
Var g_loss(const GanVariant& variant, Discriminator& d, const Var& fake, bool training = true);

/// E[(||grad_xhat D(xhat)||_2 - 1)^2] with xhat = u*real + (1-u)*fake,
/// one u per sample. The explicit-u overload pins the interpolation points.
Var gradient_penalty(Discriminator& d, const Var& real, const Var& fake,
                     const std::vector<double>& u);
Var gradient_penalty(Discriminator& d, const Var& real, const Var& fake, Rng& rng);

}  // namespace depthlab::adversarial
