#include "adapterlab/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "adapterlab/error.hpp"

namespace adapterlab {

CheckReport grad_check(std::span<const NamedTensor> params, const std::function<Tensor()>& loss_fn,
                       double eps, double rel_tol) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InvalidArgument("grad_check: eps must be a positive finite step");
  }
  std::vector<bool> flags;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    flags.push_back(t.requires_grad());
    t.zero_grad();
    t.set_requires_grad(true);
  }
  Tensor loss = loss_fn();
  loss.backward();

  CheckReport report;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    ParamCheck check;
    check.name = p.name;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = loss_fn().item();
      data[i] = saved - eps;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (i == 0 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
        check.analytic = analytic[i];
        check.numeric = numeric;
      }
    }
    check.pass = check.max_rel_error < rel_tol;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.pass = report.pass && check.pass;
    report.params.push_back(std::move(check));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    t.zero_grad();
    t.set_requires_grad(flags[k]);
  }
  return report;
}

}  // namespace adapterlab
