#include "planprobe/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace planprobe::nn {

GradCheckReport grad_check(const GradFragment& fragment, double tolerance) {
  const double eps = fragment.eps;
  GradCheckReport report;
  report.name = fragment.name;
  for (const Param* p : fragment.params) report.num_params += p->value.size();
  if (report.num_params == 0) return report;
  if (report.num_params > kMaxGradCheckParams)
    throw UsageError("grad_check: fragment " + fragment.name + " has " +
                     std::to_string(report.num_params) + " parameters (limit 10^4)");

  fragment.backward();
  for (Param* p : fragment.params) {
    const Matrix analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = saved + offset;
        return fragment.loss();
      };
      double numeric = 0.0;
      if (fragment.stencil == Stencil::Central) {
        numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      } else {
        const double d1 = at(eps) - at(-eps);
        const double d2 = at(2.0 * eps) - at(-2.0 * eps);
        numeric = (8.0 * d1 - d2) / (12.0 * eps);
      }
      p->value[i] = saved;
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeErrorFloor});
      const double rel = std::abs(a - numeric) / denom;
      if (!(rel <= report.max_relative_error)) {
        report.max_relative_error = std::isfinite(rel) ? rel : INFINITY;
        report.worst_param = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.pass = report.max_relative_error < tolerance;
  return report;
}

}  // namespace planprobe::nn
