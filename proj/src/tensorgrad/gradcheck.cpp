#include "cpath/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cpath::tg {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

GradCheckReport grad_check(const std::function<Tensor64()>& f, std::vector<Tensor64> params,
                           double tolerance, const std::vector<std::string>& names,
                           GradCheckOptions options) {
  for (auto& p : params) p.zero_grad();
  backward(f());

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());

    ParamCheck check;
    check.name = pi < names.size() ? names[pi] : "param" + std::to_string(pi);
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = original + options.step;
        plus = f().item();
        values[i] = original - options.step;
        minus = f().item();
      }
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.magnitude_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > check.max_rel_error || std::isnan(rel)) {
        check.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        check.worst_index = i;
      }
    }
    report.params.push_back(check);
  }
  report.passed = report.max_rel_error() <= tolerance;
  return report;
}

}  // namespace cpath::tg
