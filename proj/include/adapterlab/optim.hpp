#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adapterlab/tensor.hpp"

namespace adapterlab {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

/// One bias-corrected Adam update in place:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options);

/// Adam over a fixed parameter list. Parameters without a grad buffer are
/// treated as having zero gradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void step();
  void zero_grad();
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> state_;
  AdamOptions options_;
};

}  // namespace adapterlab
