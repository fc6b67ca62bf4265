#pragma once

#include <functional>
#include <vector>

namespace hiker {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int worst_coord = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central finite differences against a supplied analytic gradient.
// Relative error per coordinate is |analytic - numeric| / max(1, |numeric|).
// Throws if any evaluation of f is non-finite.
GradCheckReport grad_check(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& point,
                           const std::vector<double>& analytic, double eps);

}  // namespace hiker
