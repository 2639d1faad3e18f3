#include "depthlab/nn.hpp"

#include <cmath>

namespace depthlab::nn {

namespace {
// Xavier-uniform fill, the init the baseline architecture family uses.
Tensor xavier_uniform(Tensor::Shape shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}
}  // namespace

Conv2d::Conv2d(ModuleBase& m, const std::string& name, int64_t in_c, int64_t out_c, int64_t k,
               int stride_, int pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
  int64_t fan_in = in_c * k * k, fan_out = out_c * k * k;
  weight = m.add_param(name + ".weight", xavier_uniform({out_c, in_c, k, k}, fan_in, fan_out, rng));
  bias = m.add_param(name + ".bias", Tensor::zeros({out_c}));
}

Linear::Linear(ModuleBase& m, const std::string& name, int64_t in_f, int64_t out_f, Rng& rng) {
  weight = m.add_param(name + ".weight", xavier_uniform({out_f, in_f}, in_f, out_f, rng));
  bias = m.add_param(name + ".bias", Tensor::zeros({out_f}));
}

Norm2d::Norm2d(ModuleBase& m, const std::string& name, NormKind kind_, int64_t channels)
    : kind(kind_) {
  if (kind == NormKind::NONE) return;
  gamma = m.add_param(name + ".gamma", Tensor::ones({channels}));
  beta = m.add_param(name + ".beta", Tensor::zeros({channels}));
  if (kind == NormKind::BATCH) {
    running_mean = std::make_shared<Tensor>(Tensor::zeros({channels}));
    running_var = std::make_shared<Tensor>(Tensor::ones({channels}));
    m.register_buffer(name + ".running_mean", running_mean);
    m.register_buffer(name + ".running_var", running_var);
  }
}

Var Norm2d::forward(const Var& x, bool training) {
  if (kind == NormKind::NONE) return x;
  if (kind == NormKind::INSTANCE) return ops::instancenorm(x, gamma, beta, eps);

  const Tensor& xv = x.val();
  int64_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  if (training) {
    Tensor mean({c}), var({c});
    double m = static_cast<double>(n * hw);
    for (int64_t ic = 0; ic < c; ++ic) {
      double s = 0;
      for (int64_t in = 0; in < n; ++in) {
        const double* p = xv.data() + (in * c + ic) * hw;
        for (int64_t k = 0; k < hw; ++k) s += p[k];
      }
      mean[ic] = s / m;
      double v = 0;
      for (int64_t in = 0; in < n; ++in) {
        const double* p = xv.data() + (in * c + ic) * hw;
        for (int64_t k = 0; k < hw; ++k) v += (p[k] - mean[ic]) * (p[k] - mean[ic]);
      }
      var[ic] = v / m;
    }
    // running stats track the unbiased variance
    double unbias = m > 1 ? m / (m - 1.0) : 1.0;
    for (int64_t ic = 0; ic < c; ++ic) {
      (*running_mean)[ic] = (1.0 - momentum) * (*running_mean)[ic] + momentum * mean[ic];
      (*running_var)[ic] = (1.0 - momentum) * (*running_var)[ic] + momentum * var[ic] * unbias;
    }
    return ops::batchnorm_train(x, gamma, beta, mean, var, eps);
  }

  // evaluation mode: affine transform with frozen statistics
  Tensor a({c}), b({c});
  for (int64_t ic = 0; ic < c; ++ic) {
    double inv = 1.0 / std::sqrt((*running_var)[ic] + eps);
    a[ic] = inv;
    b[ic] = -(*running_mean)[ic] * inv;
  }
  Var xhat = ops::add_channel(ops::mul_channel(x, Var::leaf(std::move(a))), Var::leaf(std::move(b)));
  return ops::add_channel(ops::mul_channel(xhat, gamma), beta);
}

Adam::Adam(std::vector<ModuleBase::Param> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  slots_.reserve(params_.size());
  for (const auto& p : params_)
    slots_.push_back({Tensor::zeros(p.var.shape()), Tensor::zeros(p.var.shape())});
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i].var;
    Tensor& g = p.grad();
    Tensor& m = slots_[i].m;
    Tensor& v = slots_[i].v;
    Tensor& w = p.mutable_val();
    for (int64_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      w[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

}  // namespace depthlab::nn
