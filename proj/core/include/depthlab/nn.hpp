#pragma once

#include <string>
#include <vector>

#include "depthlab/ops.hpp"
#include "depthlab/random.hpp"

namespace depthlab::nn {

/// Owner of named parameters and buffers. Networks derive from this and wire
/// layers into it at construction; registration order is deterministic and is
/// the checkpoint/optimizer order.
class ModuleBase {
 public:
  struct Param {
    std::string name;
    Var var;
  };
  struct Buffer {
    std::string name;
    std::shared_ptr<Tensor> tensor;  // shared so layer objects stay movable
  };

  virtual ~ModuleBase() = default;

  Var add_param(std::string name, Tensor init) {
    Var v = Var::leaf(std::move(init), /*requires_grad=*/true);
    params_.push_back({std::move(name), v});
    return v;
  }
  void register_buffer(std::string name, std::shared_ptr<Tensor> t) {
    buffers_.push_back({std::move(name), std::move(t)});
  }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Buffer>& buffers() { return buffers_; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.var.val().size();
    return n;
  }
  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

 private:
  std::vector<Param> params_;
  std::vector<Buffer> buffers_;
};

enum class NormKind { NONE, BATCH, INSTANCE };

struct Conv2d {
  Var weight, bias;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(ModuleBase& m, const std::string& name, int64_t in_c, int64_t out_c, int64_t k,
         int stride, int pad, Rng& rng);
  Var forward(const Var& x) const { return ops::conv2d(x, weight, bias, stride, pad); }
};

struct Linear {
  Var weight, bias;

  Linear() = default;
  Linear(ModuleBase& m, const std::string& name, int64_t in_f, int64_t out_f, Rng& rng);
  Var forward(const Var& x) const { return ops::linear(x, weight, bias); }
};

/// Channel normalization behind one switch; NONE passes through. BATCH keeps
/// running statistics for evaluation mode.
struct Norm2d {
  NormKind kind = NormKind::NONE;
  Var gamma, beta;
  std::shared_ptr<Tensor> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  Norm2d() = default;
  Norm2d(ModuleBase& m, const std::string& name, NormKind kind, int64_t channels);
  Var forward(const Var& x, bool training);
};

/// Adam with bias correction; owns first/second moment state per parameter.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ModuleBase::Param> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int64_t step_count() const { return t_; }

  // exposed for checkpointing
  struct Slot {
    Tensor m, v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<ModuleBase::Param>& params() const { return params_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<ModuleBase::Param> params_;
  std::vector<Slot> slots_;
  double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

/// Halves the learning rate style scheduler: multiplies lr by `factor` when
/// the monitored value has not improved for `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience) : factor_(factor), patience_(patience) {}

  /// Feeds one epoch's monitored value; returns the (possibly reduced) lr.
  double update(double value, double current_lr) {
    if (value < best_ - 1e-12) {
      best_ = value;
      bad_epochs_ = 0;
      return current_lr;
    }
    ++bad_epochs_;
    if (bad_epochs_ > patience_) {
      bad_epochs_ = 0;
      return current_lr * factor_;
    }
    return current_lr;
  }

 private:
  double factor_;
  int patience_;
  double best_ = 1e300;
  int bad_epochs_ = 0;
};

}  // namespace depthlab::nn
