#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "depthlab/tensor.hpp"

namespace depthlab {

class Var;

/// One node of the reverse-mode tape. The backward callback receives the
/// upstream gradient and the node's own handle and returns one gradient per
/// input (an undefined Var means "no gradient"). Backward callbacks of
/// recordable ops build their result out of recordable ops themselves, which
/// is what makes grad(..., create_graph=true) produce differentiable
/// gradients (needed by the gradient penalty).
struct Node {
  Tensor value;
  bool requires_grad = false;
  bool recordable = true;
  const char* op = "leaf";
  std::vector<Var> inputs;
  std::function<std::vector<Var>(const Var& upstream, const Var& self)> backward;
  std::unique_ptr<Tensor> grad;  // leaf accumulator, lazily allocated
};

/// Shared handle to a Node. Cheap to copy; the graph is a DAG of these.
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(n_); }
  const Tensor& val() const { return n_->value; }
  Tensor& mutable_val() { return n_->value; }
  const Tensor::Shape& shape() const { return n_->value.shape(); }
  int64_t size() const { return n_->value.size(); }
  double item() const { return n_->value.item(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }

  Node* node() const { return n_.get(); }
  const std::vector<Var>& inputs() const { return n_->inputs; }
  const Var& input(size_t i) const { return n_->inputs[i]; }

  /// Gradient accumulated by backward(); valid on grad-requiring leaves.
  Tensor& grad();
  const Tensor& grad() const;
  void zero_grad();

  /// Leaf copy of the value, cut off from the graph.
  Var detach() const { return leaf(val(), false); }

  static Var make(const char* op, Tensor value, std::vector<Var> inputs,
                  std::function<std::vector<Var>(const Var&, const Var&)> backward,
                  bool recordable = true);

 private:
  std::shared_ptr<Node> n_;
};

/// While alive, newly created ops do not record inputs/backward (they become
/// constant leaves). Used inside backward() itself and in evaluation paths.
class NoRecordGuard {
 public:
  NoRecordGuard();
  ~NoRecordGuard();
  NoRecordGuard(const NoRecordGuard&) = delete;
  NoRecordGuard& operator=(const NoRecordGuard&) = delete;
};

/// Re-enables recording inside a NoRecordGuard scope (used by create_graph).
class RecordGuard {
 public:
  RecordGuard();
  ~RecordGuard();
  RecordGuard(const RecordGuard&) = delete;
  RecordGuard& operator=(const RecordGuard&) = delete;
};

bool recording_enabled();

/// Accumulates d(loss)/d(leaf) into the .grad() of every grad-requiring leaf
/// reachable from loss. loss must be scalar.
void backward(const Var& loss);

/// Returns d(output)/d(wrt[i]) for each requested node (which may be interior
/// nodes of the graph). With create_graph the returned gradients are
/// themselves differentiable; every node on the path must be recordable.
/// Unreachable wrt entries yield zero tensors.
std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph = false);

}  // namespace depthlab
