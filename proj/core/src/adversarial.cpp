#include "depthlab/adversarial.hpp"

namespace depthlab::adversarial {

namespace {
using namespace ops;
constexpr double kProbGuard = 1e-7;

Var log_guarded(const Var& p) { return log_v(clamp(p, kProbGuard, 1.0 - kProbGuard)); }
}  // namespace

PatchDiscriminator::PatchDiscriminator(bool sigmoid_output, uint64_t seed)
    : sigmoid_output_(sigmoid_output) {
  Rng rng(seed);
  c1_ = nn::Conv2d(*this, "c1", 3, 64, 4, 2, 1, rng);
  c2_ = nn::Conv2d(*this, "c2", 64, 128, 4, 2, 1, rng);
  n2_ = nn::Norm2d(*this, "n2", nn::NormKind::BATCH, 128);
  c3_ = nn::Conv2d(*this, "c3", 128, 256, 4, 2, 1, rng);
  n3_ = nn::Norm2d(*this, "n3", nn::NormKind::BATCH, 256);
  c4_ = nn::Conv2d(*this, "c4", 256, 512, 4, 1, 1, rng);
  n4_ = nn::Norm2d(*this, "n4", nn::NormKind::BATCH, 512);
  c5_ = nn::Conv2d(*this, "c5", 512, 1, 4, 1, 1, rng);
}

Var PatchDiscriminator::forward(const Var& images, bool training) {
  Var x = leaky_relu(c1_.forward(images), 0.2);
  x = leaky_relu(n2_.forward(c2_.forward(x), training), 0.2);
  x = leaky_relu(n3_.forward(c3_.forward(x), training), 0.2);
  x = leaky_relu(n4_.forward(c4_.forward(x), training), 0.2);
  x = c5_.forward(x);
  return sigmoid_output_ ? sigmoid(x) : x;
}

FcCritic::FcCritic(int64_t channels, int64_t pool_h, int64_t pool_w, uint64_t seed,
                   int64_t hidden1, int64_t hidden2)
    : pool_h_(pool_h), pool_w_(pool_w) {
  Rng rng(seed);
  f1_ = nn::Linear(*this, "f1", channels * pool_h * pool_w, hidden1, rng);
  f2_ = nn::Linear(*this, "f2", hidden1, hidden2, rng);
  f3_ = nn::Linear(*this, "f3", hidden2, 1, rng);
}

Var FcCritic::forward(const Var& images, bool /*training*/) {
  const Tensor& v = images.val();
  check(v.rank() == 4, "FcCritic: expects [N,C,H,W]");
  int64_t n = v.dim(0);
  Var x = images;
  if (v.dim(2) != pool_h_ || v.dim(3) != pool_w_) x = adaptive_avg_pool(x, pool_h_, pool_w_);
  x = reshape(x, {n, x.val().size() / n});
  x = leaky_relu(f1_.forward(x), 0.2);
  x = leaky_relu(f2_.forward(x), 0.2);
  x = f3_.forward(x);
  return reshape(x, {n});
}

std::unique_ptr<Discriminator> build_discriminator(const GanVariant& variant,
                                                   const Tensor::Shape& input_shape,
                                                   uint64_t seed) {
  check(variant.kind != GanKind::NONE, "build_discriminator: variant is NONE");
  check(input_shape.size() == 3, "build_discriminator: input_shape must be {C,H,W}");
  if (variant.kind == GanKind::WGAN_GP) {
    int64_t ph = std::min<int64_t>(32, input_shape[1]);
    int64_t pw = std::min<int64_t>(64, input_shape[2]);
    return std::make_unique<FcCritic>(input_shape[0], ph, pw, seed);
  }
  check(input_shape[0] == 3, "PatchDiscriminator: expects 3-channel images");
  return std::make_unique<PatchDiscriminator>(variant.kind == GanKind::VANILLA, seed);
}

Var gradient_penalty(Discriminator& d, const Var& real, const Var& fake,
                     const std::vector<double>& u) {
  check(real.val().same_shape(fake.val()), "gradient_penalty: dimension mismatch");
  check(real.val().rank() == 4, "gradient_penalty: expects [N,C,H,W]");
  int64_t n = real.val().dim(0);
  check(static_cast<int64_t>(u.size()) == n, "gradient_penalty: one u per sample required");

  Tensor mix(real.shape());
  int64_t stride = mix.size() / n;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < stride; ++k)
      mix[i * stride + k] = u[static_cast<size_t>(i)] * real.val()[i * stride + k] +
                            (1.0 - u[static_cast<size_t>(i)]) * fake.val()[i * stride + k];

  Var xhat = Var::leaf(std::move(mix), /*requires_grad=*/true);
  Var score = d.forward(xhat, /*training=*/true);
  check(score.val().rank() == 1 && score.val().dim(0) == n,
        "gradient_penalty: critic must emit one scalar per sample");
  Var g = grad(sum_all(score), {xhat}, /*create_graph=*/true)[0];
  Var norm = sqrt_v(add_scalar(sum_per_sample(square(g)), 1e-12));
  return mean_all(square(add_scalar(norm, -1.0)));
}

Var gradient_penalty(Discriminator& d, const Var& real, const Var& fake, Rng& rng) {
  std::vector<double> u(static_cast<size_t>(real.val().dim(0)));
  for (auto& v : u) v = rng.uniform();
  return gradient_penalty(d, real, fake, u);
}

Var d_loss(const GanVariant& variant, Discriminator& d, const Var& real, const Var& fake,
           Rng& rng, bool training) {
  check(real.val().same_shape(fake.val()), "d_loss: dimension mismatch");
  switch (variant.kind) {
    case GanKind::VANILLA: {
      Var dr = d.forward(real, training);
      Var df = d.forward(fake, training);
      return neg(mean_all(log_guarded(dr)) + mean_all(log_guarded(rsub_scalar(1.0, df))));
    }
    case GanKind::LSGAN: {
      Var dr = d.forward(real, training);
      Var df = d.forward(fake, training);
      return scale(mean_all(square(add_scalar(dr, -1.0))) + mean_all(square(df)), 0.5);
    }
    case GanKind::WGAN_GP: {
      Var dr = d.forward(real, training);
      Var df = d.forward(fake, training);
      Var base = mean_all(df) - mean_all(dr);
      return base + scale(gradient_penalty(d, real, fake, rng), variant.lambda_gp);
    }
    case GanKind::NONE:
      break;
  }
  throw std::logic_error("d_loss: variant is NONE");
}

Var g_loss(const GanVariant& variant, Discriminator& d, const Var& fake, bool training) {
  switch (variant.kind) {
    case GanKind::VANILLA:
      return neg(mean_all(log_guarded(d.forward(fake, training))));
    case GanKind::LSGAN:
      return scale(mean_all(square(add_scalar(d.forward(fake, training), -1.0))), 0.5);
    case GanKind::WGAN_GP: {
      Var e = mean_all(d.forward(fake, training));
      return variant.wgan_printed_g_sign ? e : neg(e);
    }
    case GanKind::NONE:
      break;
  }
  throw std::logic_error("g_loss: variant is NONE");
}

}  // namespace depthlab::adversarial
