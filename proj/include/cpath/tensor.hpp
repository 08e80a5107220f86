#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cpath/errors.hpp"

namespace cpath::tg {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorImpl {
  using BackwardFn = std::function<void(TensorImpl&)>;

  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;  // set once backward has traversed this node
  std::string op = "leaf";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward_fn;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Shared handle to a dense row-major array that may take part in reverse-mode
/// differentiation. Copies share storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
      throw DimensionError("tensor data has " + std::to_string(data.size()) +
                           " values but shape " + shape_str(shape) + " needs " +
                           std::to_string(shape_numel(shape)));
    }
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return from(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    return from(std::move(shape), std::vector<T>(n, value), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::int64_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }

  /// Write access to values; only leaves (parameters, inputs) may be mutated.
  std::span<T> mutable_data() {
    if (!impl_->leaf) throw StateError("cannot mutate the values of a non-leaf tensor");
    return impl_->data;
  }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) {
    if (!impl_->leaf) throw StateError("requires_grad can only be toggled on leaves");
    impl_->requires_grad = on;
  }
  bool is_leaf() const { return impl_->leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad_buffer(); }
  void zero_grad() { impl_->grad.clear(); }

  /// Leaf copy of the values with no history.
  Tensor detach() const { return from(shape(), impl_->data, false); }

  template <typename U>
  Tensor<U> cast(bool requires_grad = false) const {
    std::vector<U> out(impl_->data.begin(), impl_->data.end());
    return Tensor<U>::from(shape(), std::move(out), requires_grad);
  }

  TensorImpl<T>* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl<T>>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op result. History is recorded only when grad mode is on and at
/// least one parent requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<Tensor<T>>& parents,
                      std::string op, typename TensorImpl<T>::BackwardFn backward_fn);

/// Adds g into the gradient buffer of a parent if it requires one.
template <typename T>
void accumulate(TensorImpl<T>& target, std::span<const T> g);

/// Topologically ordered record of the operations that produced a tensor.
template <typename T>
class Tape {
 public:
  /// Walks the history of root. Throws StateError if any node on it was
  /// already consumed by an earlier backward pass.
  static Tape record(const Tensor<T>& root);

  /// Parents always precede their children.
  const std::vector<TensorImpl<T>*>& nodes() const { return nodes_; }

  /// Runs the reverse sweep, seeding the root gradient with one.
  void run();

 private:
  std::vector<TensorImpl<T>*> nodes_;
  std::vector<std::shared_ptr<TensorImpl<T>>> owners_;  // keeps nodes alive while their history is released
};

/// Populates grads of every requires_grad ancestor of a scalar loss. The
/// traversed history is released afterwards; a second call on the same graph
/// is a StateError and the forward pass must be recomputed.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace cpath::tg
