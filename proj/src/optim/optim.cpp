#include "cpath/optim.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "cpath/errors.hpp"

namespace cpath::optim {

namespace {

template <typename T>
double norm2(const std::vector<T>& v) {
  double s = 0.0;
  for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

template <typename T>
double norm2(std::span<const T> v) {
  double s = 0.0;
  for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

double trust_ratio(double weight_norm, double update_norm, double coefficient, const std::optional<double>& clip) {
  if (weight_norm <= 0.0 || update_norm <= 0.0) return 1.0;
  double r = coefficient * weight_norm / update_norm;
  if (clip) r = std::min(r, *clip);
  return r;
}

}  // namespace

std::string to_string(OptimKind k) {
  switch (k) {
    case OptimKind::adam: return "adam";
    case OptimKind::lars: return "lars";
    case OptimKind::lamb: return "lamb";
  }
  return "lars";
}

OptimKind parse_optim_kind(const std::string& s) {
  if (s == "adam") return OptimKind::adam;
  if (s == "lars") return OptimKind::lars;
  if (s == "lamb") return OptimKind::lamb;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam, lars or lamb)");
}

double lr_for(OptimKind kind, int batch_size) {
  if (batch_size <= 0) throw ContractError("batch size must be positive");
  switch (kind) {
    case OptimKind::lars:
      return 0.3 * batch_size / 256.0;
    case OptimKind::lamb: {
      if ((batch_size & (batch_size - 1)) != 0) {
        spdlog::warn("LAMB learning rate for non power-of-two batch size {} uses a fractional log2", batch_size);
      }
      const double lg = std::log2(static_cast<double>(batch_size));
      return 4.0 / (std::pow(2.0, 3.0 - (lg - 9.0) / 2.0) * 100.0);
    }
    case OptimKind::adam:
      return 1e-4;
  }
  return 0.0;
}

void OptimConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("optimizer base_lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("optimizer weight_decay must be non-negative");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("optimizer betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer eps must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer momentum must lie in [0, 1)");
  if (!(trust_coefficient > 0.0)) throw ConfigError("optimizer trust_coefficient must be positive");
  if (trust_clip && !(*trust_clip > 0.0)) throw ConfigError("optimizer trust_clip must be positive");
}

template <typename T>
std::vector<Slot<T>> slots_of(const std::vector<model::Param<T>>& params) {
  std::vector<Slot<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.value, p.is_bias});
  return out;
}

template <typename T>
Optimizer<T>::Optimizer(OptimConfig config, std::vector<Slot<T>> slots)
    : config_(config), slots_(std::move(slots)) {
  config_.validate();
  m_.resize(slots_.size());
  v_.resize(slots_.size());
  trust_.assign(slots_.size(), 1.0);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    m_[i].assign(slots_[i].value.numel(), T(0));
    if (config_.kind != OptimKind::lars) v_[i].assign(slots_[i].value.numel(), T(0));
  }
}

template <typename T>
void Optimizer<T>::step() {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    for (T g : slots_[i].value.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient in parameter slot " + std::to_string(i) + "; step aborted");
      }
    }
  }
  ++t_;
  const double lr = config_.base_lr;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));

  for (std::size_t i = 0; i < slots_.size(); ++i) {
    auto& slot = slots_[i];
    auto w = slot.value.mutable_data();
    const auto grad = slot.value.grad();
    const bool has_grad = !grad.empty();
    const double wd = slot.is_bias ? 0.0 : config_.weight_decay;
    const std::size_t n = w.size();
    auto& m = m_[i];
    trust_[i] = 1.0;

    // g + wd * w, the decayed gradient every rule starts from
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = (has_grad ? static_cast<double>(grad[k]) : 0.0) + wd * w[k];

    switch (config_.kind) {
      case OptimKind::adam: {
        auto& v = v_[i];
        for (std::size_t k = 0; k < n; ++k) {
          m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * d[k]);
          v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * d[k] * d[k]);
          const double mh = m[k] / bc1;
          const double vh = v[k] / bc2;
          w[k] = static_cast<T>(w[k] - lr * mh / (std::sqrt(vh) + config_.eps));
        }
        break;
      }
      case OptimKind::lars: {
        // biases skip the norm ratio but keep the coefficient
        double scale = config_.trust_coefficient;
        if (!slot.is_bias) {
          scale = trust_ratio(norm2(std::span<const T>(w.data(), n)), norm2(d), config_.trust_coefficient,
                              config_.trust_clip);
        }
        trust_[i] = scale;
        for (std::size_t k = 0; k < n; ++k) {
          m[k] = static_cast<T>(config_.momentum * m[k] + lr * scale * d[k]);
          w[k] = static_cast<T>(w[k] - m[k]);
        }
        break;
      }
      case OptimKind::lamb: {
        auto& v = v_[i];
        std::vector<double> r(n);
        for (std::size_t k = 0; k < n; ++k) {
          const double g = has_grad ? static_cast<double>(grad[k]) : 0.0;
          m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * g);
          v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * g * g);
          r[k] = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.eps) + wd * w[k];
        }
        double scale = 1.0;
        if (!slot.is_bias) scale = trust_ratio(norm2(std::span<const T>(w.data(), n)), norm2(r), 1.0, config_.trust_clip);
        trust_[i] = scale;
        for (std::size_t k = 0; k < n; ++k) w[k] = static_cast<T>(w[k] - lr * scale * r[k]);
        break;
      }
    }
  }
}

template std::vector<Slot<float>> slots_of<float>(const std::vector<model::Param<float>>&);
template std::vector<Slot<double>> slots_of<double>(const std::vector<model::Param<double>>&);
template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace cpath::optim
