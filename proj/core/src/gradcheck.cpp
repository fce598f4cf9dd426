#include "convemo/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace convemo {

GradCheckReport grad_check(
    const std::function<double(ParamStore&, bool accumulate)>& loss_fn,
    ParamStore& params, double eps) {
  params.zero_grad();
  const double base = loss_fn(params, true);
  if (!std::isfinite(base))
    throw std::runtime_error("grad_check: non-finite base loss");

  GradCheckReport report;
  for (auto& [name, entry] : params) {
    GradCheckReport::Item item;
    item.name = name;
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double saved = entry.value.data[i];
      entry.value.data[i] = saved + eps;
      const double up = loss_fn(params, false);
      entry.value.data[i] = saved - eps;
      const double dn = loss_fn(params, false);
      entry.value.data[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw std::runtime_error("grad_check: non-finite loss perturbing '" +
                                 name + "'");
      const double numeric = (up - dn) / (2.0 * eps);
      const double analytic = entry.grad.data[i];
      const double denom =
          std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
      item.max_rel_err =
          std::max(item.max_rel_err, std::fabs(numeric - analytic) / denom);
    }
    report.max_rel_err = std::max(report.max_rel_err, item.max_rel_err);
    report.items.push_back(std::move(item));
  }
  return report;
}

}  // namespace convemo
