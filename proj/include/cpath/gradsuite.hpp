#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpath/gradcheck.hpp"

namespace cpath::tg {

struct SuiteCase {
  std::string name;
  GradCheckReport report;
};

struct SuiteResult {
  std::vector<SuiteCase> cases;
  bool passed() const;
};

/// Central-difference check of every differentiable op in f64 at `tolerance`.
/// With `corrupt` set, an extra relu whose backward leaks gradient through
/// negative inputs is checked too; it must fail.
SuiteResult check_ops(double tolerance = 1e-6, bool corrupt = false, std::uint64_t seed = 7);

/// encode -> project -> nt_xent on a small residual encoder, all parameters.
SuiteResult check_pipeline(double tolerance = 1e-5, std::uint64_t seed = 7);

}  // namespace cpath::tg
