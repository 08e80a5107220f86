#include "cpath/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace cpath::tg {

namespace {
thread_local bool t_grad_enabled = true;
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() {
  return t_grad_enabled;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) {
  t_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
  t_grad_enabled = previous_;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<Tensor<T>>& parents,
                      std::string op, typename TensorImpl<T>::BackwardFn backward_fn) {
  auto out = Tensor<T>::from(std::move(shape), std::move(data), false);
  if (!grad_enabled()) return out;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor<T>& p) { return p.requires_grad(); });
  if (!needs) return out;
  auto* impl = out.impl();
  impl->requires_grad = true;
  impl->leaf = false;
  impl->op = std::move(op);
  impl->backward_fn = std::move(backward_fn);
  for (const auto& p : parents) impl->parents.push_back(p.impl_ptr());
  return out;
}

template <typename T>
void accumulate(TensorImpl<T>& target, std::span<const T> g) {
  if (!target.requires_grad) return;
  auto& buf = target.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& root) {
  Tape tape;
  std::unordered_set<const TensorImpl<T>*> seen;
  // Iterative post-order DFS: a node is emitted after all of its parents.
  std::vector<std::pair<TensorImpl<T>*, std::size_t>> stack;
  stack.emplace_back(root.impl(), 0);
  seen.insert(root.impl());
  tape.owners_.push_back(root.impl_ptr());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed) {
      throw StateError("backward already ran through '" + node->op +
                       "'; recompute the forward pass first");
    }
    if (next < node->parents.size()) {
      const auto& parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) {
        tape.owners_.push_back(parent);
        stack.emplace_back(parent.get(), 0);
      }
      continue;
    }
    tape.nodes_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

template <typename T>
void Tape<T>::run() {
  if (nodes_.empty()) return;
  TensorImpl<T>* root = nodes_.back();
  root->grad_buffer()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorImpl<T>* node = *it;
    if (node->leaf) continue;
    if (!node->grad.empty() && node->backward_fn) node->backward_fn(*node);
    // Release saved activations and intermediate gradients.
    node->backward_fn = nullptr;
    node->parents.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->consumed = true;
  }
  owners_.clear();
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (loss.impl()->consumed) {
    throw StateError("backward already ran on this loss; recompute the forward pass first");
  }
  if (!loss.requires_grad()) {
    throw ContractError("loss does not depend on any tensor that requires a gradient");
  }
  auto tape = Tape<T>::record(loss);
  tape.run();
}

#define CPATH_INSTANTIATE(T)                                                                     \
  template Tensor<T> make_result<T>(Shape, std::vector<T>, const std::vector<Tensor<T>>&,       \
                                    std::string, typename TensorImpl<T>::BackwardFn);           \
  template void accumulate<T>(TensorImpl<T>&, std::span<const T>);                              \
  template class Tape<T>;                                                                        \
  template void backward<T>(const Tensor<T>&);

CPATH_INSTANTIATE(float)
CPATH_INSTANTIATE(double)

#undef CPATH_INSTANTIATE

}  // namespace cpath::tg
