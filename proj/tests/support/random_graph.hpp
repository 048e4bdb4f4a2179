#pragma once

// Seeded random composite graphs over the full op suite, for gradient checks.

#include <functional>
#include <string>
#include <vector>

#include "adapterlab/ops.hpp"
#include "adapterlab/rng.hpp"
#include "adapterlab/tensor.hpp"

namespace adapterlab::testing {

struct RandomGraph {
  std::vector<NamedTensor> params;
  std::function<Tensor()> loss;
  std::string description;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double std = 1.0) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.normal(0.0, std);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

/// Every graph uses matmul (shared and batched), add, sub or mul, one of
/// gelu/relu/sigmoid, layer_norm, embedding, concat, transpose, reshape,
/// softmax, log, mean, select, scale, cross_entropy and bce_with_logits.
/// Dimensions stay <= 8; the normalized axis has at least 3.
inline RandomGraph make_random_graph(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t b = 1 + rng.uniform_int(3);
  const std::size_t m = 2 + rng.uniform_int(4);
  const std::size_t k = 1 + rng.uniform_int(8);
  const std::size_t n = 3 + rng.uniform_int(6);  // layer_norm over 2 features is flat: every row maps to +-1
  const std::size_t n2 = 1 + rng.uniform_int(4);
  const std::size_t vocab = 3 + rng.uniform_int(6);
  const int activation = static_cast<int>(rng.uniform_int(3));
  const bool multiply = rng.bernoulli(0.5);
  const int mean_axis = static_cast<int>(rng.uniform_int(3));

  RandomGraph g;
  Tensor x = random_tensor({b, m, k}, rng);
  Tensor w = random_tensor({k, n}, rng, 0.7);
  Tensor bias = random_tensor({n}, rng, 0.5);
  Tensor gamma = random_tensor({n}, rng, 0.5);
  Tensor beta = random_tensor({n}, rng, 0.5);
  Tensor table = random_tensor({vocab, n}, rng);
  Tensor other = random_tensor({b, m, n2}, rng);
  Tensor head = random_tensor({n, 3}, rng, 0.7);
  g.params = {{"x", x},         {"w", w},         {"bias", bias},   {"gamma", gamma},
              {"beta", beta},   {"table", table}, {"other", other}, {"head", head}};

  std::vector<int> ids(b * m);
  for (int& id : ids) id = static_cast<int>(rng.uniform_int(vocab));
  std::vector<int> classes(b * m);
  for (int& c : classes) c = static_cast<int>(rng.uniform_int(n));
  std::vector<double> labels(b * 3);
  for (double& y : labels) y = rng.bernoulli(0.5) ? 1.0 : 0.0;

  g.description = "b=" + std::to_string(b) + " m=" + std::to_string(m) + " k=" + std::to_string(k) +
                  " n=" + std::to_string(n) + " act=" + std::to_string(activation) + (multiply ? " mul" : " sub");

  g.loss = [=]() {
    Tensor h = add(matmul(x, w), bias);
    h = activation == 0 ? gelu(h) : activation == 1 ? relu(h) : sigmoid(h);
    Tensor e = embedding(table, ids, {b, m});
    // Plain mul would leave rows with one nonzero entry after relu, which
    // layer_norm maps to a constant.
    h = multiply ? add(mul(h, e), e) : sub(h, e);
    h = layer_norm(h, gamma, beta);

    const Tensor parts[] = {h, other};
    Tensor c = concat(parts, -1);                      // [b, m, n + n2]
    Tensor scores = scale(matmul(c, transpose(c, 1, 2)), 0.3);  // [b, m, m]
    Tensor attn = matmul(softmax(scores), c);          // [b, m, n + n2]
    Tensor logp = log(softmax(transpose(attn, 1, 2)));  // [b, n + n2, m]
    Tensor pooled = mean(logp, mean_axis);

    Tensor ce = cross_entropy(reshape(h, {b * m, n}), classes);
    Tensor bce = bce_with_logits(matmul(select(h, 1, 0), head), labels);
    return add(add(scale(mean_all(pooled), 0.5), ce), bce);
  };
  return g;
}

}  // namespace adapterlab::testing
