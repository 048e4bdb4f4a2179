#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adapterlab/tensor.hpp"

namespace adapterlab {

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;   // at worst_index
  double numeric = 0.0;    // at worst_index
  bool pass = true;
};

struct CheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool pass = true;
};

/// Compares backprop gradients of `loss_fn` against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) for every coordinate of every parameter.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
///
/// loss_fn must rebuild the graph from the parameters' current values on every
/// call. Parameter values are restored bitwise afterwards.
CheckReport grad_check(std::span<const NamedTensor> params, const std::function<Tensor()>& loss_fn,
                       double eps = 1e-5, double rel_tol = 1e-4);

}  // namespace adapterlab
