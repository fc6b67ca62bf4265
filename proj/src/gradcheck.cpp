#include "hiker/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace hiker {

GradCheckReport grad_check(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& point,
                           const std::vector<double>& analytic, double eps) {
  if (point.size() != analytic.size())
    throw std::invalid_argument("grad_check: gradient length mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  GradCheckReport rep;
  std::vector<double> x = point;
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f(x);
    x[i] = orig - eps;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("grad_check: non-finite evaluation");
    const double numeric = (fp - fm) / (2.0 * eps);
    const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_coord = static_cast<int>(i);
      rep.analytic_at_worst = analytic[i];
      rep.numeric_at_worst = numeric;
    }
  }
  return rep;
}

}  // namespace hiker
