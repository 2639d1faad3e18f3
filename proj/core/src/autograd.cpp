#include "depthlab/autograd.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "depthlab/ops.hpp"

namespace depthlab {

std::string Tensor::shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

namespace {
thread_local std::vector<bool> g_mode_stack;  // innermost guard wins
}

NoRecordGuard::NoRecordGuard() { g_mode_stack.push_back(false); }
NoRecordGuard::~NoRecordGuard() { g_mode_stack.pop_back(); }
RecordGuard::RecordGuard() { g_mode_stack.push_back(true); }
RecordGuard::~RecordGuard() { g_mode_stack.pop_back(); }
bool recording_enabled() { return g_mode_stack.empty() || g_mode_stack.back(); }

Var Var::leaf(Tensor value, bool requires_grad) {
  Var v;
  v.n_ = std::make_shared<Node>();
  v.n_->value = std::move(value);
  v.n_->requires_grad = requires_grad;
  return v;
}

Var Var::make(const char* op, Tensor value, std::vector<Var> inputs,
              std::function<std::vector<Var>(const Var&, const Var&)> backward, bool recordable) {
  bool any_grad = false;
  for (const auto& in : inputs)
    if (in.defined() && in.requires_grad()) any_grad = true;
  if (!recording_enabled() || !any_grad) {
    return leaf(std::move(value), false);
  }
  Var v;
  v.n_ = std::make_shared<Node>();
  v.n_->value = std::move(value);
  v.n_->requires_grad = true;
  v.n_->recordable = recordable;
  v.n_->op = op;
  v.n_->inputs = std::move(inputs);
  v.n_->backward = std::move(backward);
  return v;
}

Tensor& Var::grad() {
  if (!n_) throw std::logic_error("Var::grad on undefined Var");
  if (!n_->grad) n_->grad = std::make_unique<Tensor>(n_->value.shape());
  return *n_->grad;
}

const Tensor& Var::grad() const {
  if (!n_ || !n_->grad) throw std::logic_error("Var::grad: no gradient accumulated");
  return *n_->grad;
}

void Var::zero_grad() {
  if (n_ && n_->grad) n_->grad->fill(0.0);
}

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative postorder DFS.
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx].node();
      ++idx;
      if (child && child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // children before parents; traverse in reverse for backward
}

struct VarOfNode {
  // grad() needs a Var handle for each node to pass to backward callbacks;
  // rebuilt by walking input edges (shared_ptr handles live in parents).
  std::unordered_map<Node*, Var> map;
  void index(const Var& root) {
    std::vector<Var> stack{root};
    while (!stack.empty()) {
      Var v = stack.back();
      stack.pop_back();
      if (!v.defined() || map.count(v.node())) continue;
      map.emplace(v.node(), v);
      if (v.node()->requires_grad)
        for (const auto& in : v.inputs()) stack.push_back(in);
    }
  }
};

void run_backward(const Var& root, const std::vector<Var>& wrt, bool create_graph,
                  bool accumulate_leaves, std::vector<Var>* out) {
  check(root.defined(), "backward: undefined root");
  if (!root.requires_grad()) {
    if (out) {
      out->clear();
      for (const auto& w : wrt) out->push_back(Var::leaf(Tensor::zeros(w.shape()), false));
    }
    return;
  }

  VarOfNode vars;
  vars.index(root);
  auto order = topo_order(root.node());

  std::unordered_map<Node*, Var> grads;
  grads[root.node()] = Var::leaf(Tensor::ones(root.shape()), false);

  auto process = [&]() {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto git = grads.find(node);
      if (git == grads.end()) continue;
      Var upstream = git->second;
      if (node->inputs.empty()) {
        if (accumulate_leaves && node->requires_grad && !node->backward) {
          Var self = vars.map.at(node);
          Tensor& acc = self.grad();
          const Tensor& g = upstream.val();
          for (int64_t i = 0; i < g.size(); ++i) acc[i] += g[i];
        }
        continue;
      }
      if (create_graph && !node->recordable)
        throw std::logic_error(std::string("grad(create_graph): op '") + node->op +
                               "' does not support second-order gradients");
      Var self = vars.map.at(node);
      auto input_grads = node->backward(upstream, self);
      check(input_grads.size() == node->inputs.size(),
            std::string("backward of '") + node->op + "' returned wrong arity");
      for (size_t i = 0; i < input_grads.size(); ++i) {
        const Var& in = node->inputs[i];
        Var g = input_grads[i];
        if (!g.defined() || !in.defined() || !in.node()->requires_grad) continue;
        auto acc = grads.find(in.node());
        if (acc == grads.end()) {
          grads[in.node()] = g;
        } else {
          acc->second = ops::add(acc->second, g);
        }
      }
      // The upstream gradient of this node is no longer needed unless the
      // caller asked for it explicitly; keep map entries (cheap handles).
    }
  };

  if (create_graph) {
    RecordGuard rec;
    process();
  } else {
    NoRecordGuard norec;
    process();
  }

  if (out) {
    out->clear();
    for (const auto& w : wrt) {
      auto it = grads.find(w.node());
      if (it == grads.end())
        out->push_back(Var::leaf(Tensor::zeros(w.shape()), false));
      else
        out->push_back(it->second);
    }
  }
}

}  // namespace

void backward(const Var& loss) {
  check(loss.defined() && loss.size() == 1, "backward: loss must be scalar");
  run_backward(loss, {}, /*create_graph=*/false, /*accumulate_leaves=*/true, nullptr);
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt, bool create_graph) {
  check(output.defined() && output.size() == 1, "grad: output must be scalar");
  std::vector<Var> out;
  run_backward(output, wrt, create_graph, /*accumulate_leaves=*/false, &out);
  return out;
}

}  // namespace depthlab
