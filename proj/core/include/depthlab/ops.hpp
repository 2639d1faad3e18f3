#pragma once

#include <vector>

#include "depthlab/autograd.hpp"

namespace depthlab::ops {

// ---- elementwise (same shape) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divv(const Var& a, const Var& b);

// ---- scalar forms ----
Var scale(const Var& x, double c);
Var add_scalar(const Var& x, double c);
Var rsub_scalar(double c, const Var& x);  // c - x
Var neg(const Var& x);

// ---- unary ----
Var abs_v(const Var& x);
Var exp_v(const Var& x);
Var log_v(const Var& x);
Var sqrt_v(const Var& x);
Var square(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var elu(const Var& x);                       // non-recordable backward
Var clamp(const Var& x, double lo, double hi);

// ---- reductions / broadcasts ----
Var sum_all(const Var& x);                    // -> scalar
Var mean_all(const Var& x);                   // -> scalar
Var sum_per_sample(const Var& x);             // [N,...] -> [N]
Var broadcast_per_sample(const Var& s, Tensor::Shape shape);  // [N] -> shape
Var broadcast_scalar(const Var& s, Tensor::Shape shape);
Var sum_rows(const Var& x);                   // [n,m] -> [m]
Var broadcast_rows(const Var& b, int64_t n);  // [m] -> [n,m]
Var sum_channel(const Var& x);                // [N,C,H,W] -> [C]
Var add_channel(const Var& x, const Var& b);  // bias over channel dim
Var mul_channel(const Var& x, const Var& s);

// ---- shape ----
Var reshape(const Var& x, Tensor::Shape shape);
Var transpose2d(const Var& x);
Var concat_channels(const std::vector<Var>& xs);            // along dim 1 of [N,C,H,W]
Var slice_channels(const Var& x, int64_t c0, int64_t c1);    // channels [c0,c1) of [N,C,H,W]
Var crop2d(const Var& x, int64_t r0, int64_t r1, int64_t c0, int64_t c1);  // rows [r0,r1), cols [c0,c1)
Var flip_w(const Var& x);                                    // reverse the last dim

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);  // [n,k] x [k,m]
Var linear(const Var& x, const Var& weight, const Var& bias);  // x[n,k], weight[m,k], bias[m]

// ---- spatial ----
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var maxpool2d_3x3s2(const Var& x);             // 3x3, stride 2, pad 1
Var upsample_nearest2(const Var& x);
Var downsample_sum2(const Var& x);
Var avg_pool2(const Var& x);                   // factor-2 average pooling
Var adaptive_avg_pool(const Var& x, int64_t oh, int64_t ow);
Var box_mean3(const Var& x);                   // valid 3x3 uniform window

// ---- normalization ----
Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta, const Tensor& batch_mean,
                    const Tensor& batch_var, double eps);
Var instancenorm(const Var& x, const Var& gamma, const Var& beta, double eps);

// ---- stereo warping (the differentiable bilinear sampler) ----
// out(n,c,i,j) = image(n,c,i, j + direction*disp(n,i,j)*W), sampled bilinearly
// along columns with edge clamp. Gradients flow to both image and disparity.
Var warp(const Var& image, const Var& disparity, int direction);

}  // namespace depthlab::ops

namespace depthlab {
inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ops::mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return ops::divv(a, b); }
}  // namespace depthlab
