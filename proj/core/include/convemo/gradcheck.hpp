#pragma once

#include <functional>
#include <string>
#include <vector>

#include "convemo/params.hpp"

namespace convemo {

struct GradCheckReport {
  struct Item {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<Item> items;
  double max_rel_err = 0.0;

  bool within(double tolerance) const { return max_rel_err < tolerance; }
  std::vector<std::string> offenders(double tolerance) const {
    std::vector<std::string> out;
    for (const auto& it : items)
      if (!(it.max_rel_err < tolerance)) out.push_back(it.name);
    return out;
  }
};

/// loss_fn(params, accumulate) returns the scalar loss; when accumulate is
/// true it must also add analytic gradients into the store. It has to be
/// deterministic (no live dropout) or the finite differences are meaningless.
GradCheckReport grad_check(
    const std::function<double(ParamStore&, bool accumulate)>& loss_fn,
    ParamStore& params, double eps = 1e-5);

}  // namespace convemo
