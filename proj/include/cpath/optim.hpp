#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpath/model.hpp"

namespace cpath::optim {

enum class OptimKind { adam, lars, lamb };

std::string to_string(OptimKind k);
OptimKind parse_optim_kind(const std::string& s);

/// Learning rates prescribed for large-batch contrastive pretraining:
/// LARS 0.3 * B / 256, LAMB 4 / (2^(3 - (log2(B) - 9) / 2) * 100), Adam 1e-4.
double lr_for(OptimKind kind, int batch_size);

struct OptimConfig {
  OptimKind kind = OptimKind::lars;
  double base_lr = 0.6;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;           // LARS
  double trust_coefficient = 5e-3; // LARS eta; bias tensors step with lr * eta
  std::optional<double> trust_clip;  // upper bound on the layer trust ratio

  void validate() const;
};

/// One tensor the optimizer updates. Bias tensors skip weight decay and the
/// norm-based trust ratio (LARS still scales them by trust_coefficient).
template <typename T>
struct Slot {
  tg::Tensor<T> value;
  bool is_bias = false;
};

template <typename T>
std::vector<Slot<T>> slots_of(const std::vector<model::Param<T>>& params);

template <typename T>
class Optimizer {
 public:
  Optimizer(OptimConfig config, std::vector<Slot<T>> slots);

  /// Applies one update from the gradients currently stored on the slots.
  /// A slot without a gradient is treated as having a zero gradient. Throws
  /// NumericError before touching any parameter if a gradient is not finite.
  void step();

  const OptimConfig& config() const { return config_; }
  std::int64_t steps_taken() const { return t_; }
  /// Trust ratio applied to each slot on the last step (1 for biases / Adam).
  const std::vector<double>& last_trust_ratios() const { return trust_; }

 private:
  OptimConfig config_;
  std::vector<Slot<T>> slots_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::vector<double> trust_;
  std::int64_t t_ = 0;
};

}  // namespace cpath::optim
