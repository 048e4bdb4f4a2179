#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adapterlab/rng.hpp"
#include "adapterlab/tensor.hpp"

// Differentiable operations. Every op validates shapes (ShapeError naming the
// op and the offending shapes) and rejects non-finite inputs (InvalidArgument).
namespace adapterlab {

inline constexpr double kLayerNormEps = 1e-5;

/// Matrix product over the last two axes.
/// a: [..., m, k] with b: [k, n] (b shared across the leading axes), or
/// a: [..., m, k] with b: [..., k, n] (identical leading axes).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise with numpy-style broadcasting (trailing-aligned, size-1 axes
/// stretch). The common case is b's shape being a suffix of a's.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// tanh approximation:
///   gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Natural log; inputs must be strictly positive.
Tensor log(const Tensor& x);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);
/// Normalizes the last axis, then applies gamma/beta (each [last_dim]).
/// Variance is the biased estimator; eps keeps the zero-variance case finite.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

/// Row lookup: table [V, d], ids with shape ids_shape -> ids_shape + [d].
Tensor embedding(const Tensor& table, std::span<const int> ids,
                 const Shape& ids_shape);

/// Mean over one axis (removed from the result).
Tensor mean(const Tensor& x, int axis);
/// Sum / mean of all elements, as a scalar of shape [].
Tensor sum(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor reshape(const Tensor& x, Shape shape);
/// Swaps two axes.
Tensor transpose(const Tensor& x, int axis0, int axis1);
/// Picks one index along an axis, removing the axis.
Tensor select(const Tensor& x, int axis, std::size_t index);
/// Gathers rows of a [n, d] tensor.
Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Inverted dropout. Identity (same tensor) when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

/// Mean token cross-entropy of logits [n, V] against class ids.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Mean over all cells of the per-label binary cross-entropy of sigmoid
/// logits, in the overflow-safe form max(z,0) - z*y + log(1 + exp(-|z|)).
/// targets has the logits' shape and holds only 0 or 1.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets);

}  // namespace adapterlab
