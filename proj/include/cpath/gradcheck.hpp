#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cpath/tensor.hpp"

namespace cpath::tg {

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;
  bool passed = false;
  double max_rel_error() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor in |a - n| / max(|a|, |n|, floor); keeps near-zero
  /// gradient entries from amplifying central-difference round-off.
  double magnitude_floor = 1e-3;
};

/// Compares analytic gradients of a scalar function against central
/// differences. f must rebuild its graph on every call and be deterministic.
GradCheckReport grad_check(const std::function<Tensor64()>& f, std::vector<Tensor64> params,
                           double tolerance, const std::vector<std::string>& names = {},
                           GradCheckOptions options = {});

}  // namespace cpath::tg
