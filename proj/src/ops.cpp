#include "adapterlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adapterlab/error.hpp"

namespace adapterlab {
namespace {

using detail::Node;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b,
                             const std::string& why) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b) + " (" + why + ")");
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": bad shape " + shape_str(a) + " (" + why + ")");
}

void check_defined(const char* op, const Tensor& t) {
  if (!t.defined()) throw InvalidArgument(std::string(op) + ": undefined input tensor");
}

void check_finite(const char* op, const Tensor& t) {
  check_defined(op, t);
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw InvalidArgument(std::string(op) + ": non-finite value in input of shape " +
                            shape_str(t.shape()));
    }
  }
}

std::size_t norm_axis(const char* op, int axis, std::size_t rank, const Shape& shape) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    shape_fail(op, shape, "axis " + std::to_string(axis) + " out of range");
  }
  return static_cast<std::size_t>(a);
}

// outer * dim * inner split around one axis
struct AxisSplit {
  std::size_t outer = 1, dim = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.dim = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(const char* op, Shape shape, std::vector<double> data,
                     std::span<const Tensor> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Index maps from output element to each operand element under broadcasting.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_idx, b_idx;
  bool same = false;
};

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<long>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<long>(rank - b.size()));
  p.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      p.out[i] = pa[i];
    } else if (pa[i] == 1) {
      p.out[i] = pb[i];
    } else {
      shape_fail(op, a, b, "axis " + std::to_string(i) + " cannot broadcast");
    }
  }
  auto strides = [&](const Shape& s) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = rank; i-- > 0;) {
      st[i] = s[i] == 1 ? 0 : acc;
      acc *= s[i];
    }
    return st;
  };
  const auto sa = strides(pa), sb = strides(pb);
  const std::size_t n = shape_numel(p.out);
  p.a_idx.resize(n);
  p.b_idx.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t e = 0; e < n; ++e) {
    p.a_idx[e] = ia;
    p.b_idx[e] = ib;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < p.out[d]) break;
      ia -= sa[d] * idx[d];
      ib -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return p;
}

enum class BinOp { kAdd, kSub, kMul };

Tensor binary(const char* op, BinOp kind, const Tensor& a, const Tensor& b) {
  check_finite(op, a);
  check_finite(op, b);
  auto plan = std::make_shared<Broadcast>(plan_broadcast(op, a.shape(), b.shape()));
  const std::size_t n = shape_numel(plan->out);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t e = 0; e < n; ++e) {
    const double x = ad[plan->same ? e : plan->a_idx[e]];
    const double y = bd[plan->same ? e : plan->b_idx[e]];
    out[e] = kind == BinOp::kAdd ? x + y : kind == BinOp::kSub ? x - y : x * y;
  }
  Shape out_shape = plan->out;
  return make_result(op, std::move(out_shape), std::move(out), {a, b}, [plan, kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.grad.size();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t e = 0; e < n; ++e) {
        const std::size_t ib = plan->same ? e : plan->b_idx[e];
        const double g = kind == BinOp::kMul ? self.grad[e] * pb.data[ib] : self.grad[e];
        ga[plan->same ? e : plan->a_idx[e]] += g;
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t e = 0; e < n; ++e) {
        const std::size_t ia = plan->same ? e : plan->a_idx[e];
        double g = self.grad[e];
        if (kind == BinOp::kSub) g = -g;
        if (kind == BinOp::kMul) g *= pa.data[ia];
        gb[plan->same ? e : plan->b_idx[e]] += g;
      }
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  check_finite(op, x);
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

// Output data for a permutation of axes.
std::vector<double> permute_data(std::span<const double> in, const Shape& shape,
                                 const std::vector<std::size_t>& perm, Shape& out_shape) {
  const std::size_t rank = shape.size();
  out_shape.resize(rank);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * shape[i];
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = shape[perm[i]];
    step[i] = in_strides[perm[i]];
  }
  std::vector<double> out(in.size());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e] = in[src];
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += step[d];
      if (idx[d] < out_shape[d]) break;
      src -= step[d] * idx[d];
      idx[d] = 0;
    }
  }
  return out;
}

// C[m,n] += A[m,k] B[k,n], all row-major and contiguous. 4x4 output tiles
// are accumulated in locals so they stay in registers.
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* __restrict A,
              const double* __restrict B, double* __restrict C) {
  constexpr std::size_t R = 4, S = 4;
  std::size_t i = 0;
  for (; i + R <= m; i += R) {
    std::size_t j = 0;
    for (; j + S <= n; j += S) {
      double acc[R][S] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* b = B + p * n + j;
        for (std::size_t r = 0; r < R; ++r) {
          const double a = A[(i + r) * k + p];
          for (std::size_t c = 0; c < S; ++c) acc[r][c] += a * b[c];
        }
      }
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < S; ++c) C[(i + r) * n + j + c] += acc[r][c];
      }
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < R; ++r) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += A[(i + r) * k + p] * B[p * n + j];
        C[(i + r) * n + j] += acc;
      }
    }
  }
  for (; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += a * B[p * n + j];
    }
  }
}

void transpose_into(std::size_t rows, std::size_t cols, const double* in, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
  }
}

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  constexpr const char* op = "matmul";
  check_finite(op, a);
  check_finite(op, b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) shape_fail(op, as, bs, "operands need rank >= 2");
  const std::size_t m = as[as.size() - 2], k = as.back();
  const bool shared_b = bs.size() == 2;
  if (!shared_b) {
    if (bs.size() != as.size() || !std::equal(as.begin(), as.end() - 2, bs.begin())) {
      shape_fail(op, as, bs, "leading axes differ");
    }
  }
  const std::size_t k2 = bs[bs.size() - 2], n = bs.back();
  if (k != k2) shape_fail(op, as, bs, "inner dimensions differ");
  std::size_t batch = 1;
  for (std::size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];

  Shape out_shape(as.begin(), as.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t t = 0; t < batch; ++t) {
    gemm_acc(m, n, k, ad + t * m * k, bd + (shared_b ? 0 : t * k * n), out.data() + t * m * n);
  }
  return make_result(op, std::move(out_shape), std::move(out), {a, b},
                     [batch, m, k, n, shared_b](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      // dA = G B^T
      std::vector<double> bt(k * n);
      for (std::size_t t = 0; t < batch; ++t) {
        if (t == 0 || !shared_b) transpose_into(k, n, pb.data.data() + (shared_b ? 0 : t * k * n), bt.data());
        gemm_acc(m, k, n, G + t * m * n, bt.data(), ga.data() + t * m * k);
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      // dB = A^T G
      std::vector<double> at(m * k);
      for (std::size_t t = 0; t < batch; ++t) {
        transpose_into(m, k, pa.data.data() + t * m * k, at.data());
        gemm_acc(k, n, m, at.data(), G + t * m * n, gb.data() + (shared_b ? 0 : t * k * n));
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinOp::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinOp::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinOp::kMul, a, b); }

Tensor scale(const Tensor& x, double factor) {
  if (!std::isfinite(factor)) throw InvalidArgument("scale: non-finite factor");
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double a = 0.044715;
  return unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + a * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(c * (v + a * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * a * v * v);
      });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x, [](double v) { return sigmoid_scalar(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  check_finite("log", x);
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw InvalidArgument("log: non-positive input in tensor of shape " + shape_str(x.shape()));
    }
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x) {
  constexpr const char* op = "softmax";
  check_finite(op, x);
  if (x.rank() == 0) shape_fail(op, x.shape(), "needs rank >= 1");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (y[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return make_result(op, x.shape(), std::move(out), {x}, [rows, n](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * n;
      const double* gy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  constexpr const char* op = "layer_norm";
  check_finite(op, x);
  check_finite(op, gamma);
  check_finite(op, beta);
  if (x.rank() == 0) shape_fail(op, x.shape(), "needs rank >= 1");
  const std::size_t n = x.shape().back();
  if (gamma.shape() != Shape{n}) shape_fail(op, x.shape(), gamma.shape(), "gamma must be [last_dim]");
  if (beta.shape() != Shape{n}) shape_fail(op, x.shape(), beta.shape(), "beta must be [last_dim]");
  if (!(eps > 0.0)) throw InvalidArgument("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / n;
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();

  auto xhat = std::make_shared<std::vector<double>>(xd.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (in[j] - mu) * is;
      (*xhat)[r * n + j] = h;
      out[r * n + j] = h * gd[j] + bd[j];
    }
  }
  return make_result(op, x.shape(), std::move(out), {x, gamma, beta},
                     [rows, n, xhat, inv_std](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    const double* G = self.grad.data();
    if (pg.requires_grad) {
      auto& gg = pg.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gg[j] += G[r * n + j] * (*xhat)[r * n + j];
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += G[r * n + j];
      }
    }
    if (px.requires_grad) {
      auto& gx = px.ensure_grad();
      const double nn = static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = G[r * n + j] * pg.data[j];
          s1 += dh;
          s2 += dh * (*xhat)[r * n + j];
        }
        const double is = (*inv_std)[r];
        for (std::size_t j = 0; j < n; ++j) {
          const double dh = G[r * n + j] * pg.data[j];
          gx[r * n + j] += is / nn * (nn * dh - s1 - (*xhat)[r * n + j] * s2);
        }
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& ids_shape) {
  constexpr const char* op = "embedding";
  check_finite(op, table);
  if (table.rank() != 2) shape_fail(op, table.shape(), "table must be [vocab, dim]");
  if (shape_numel(ids_shape) != ids.size()) {
    throw ShapeError("embedding: ids shape " + shape_str(ids_shape) + " does not match " +
                     std::to_string(ids.size()) + " ids");
  }
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw InvalidArgument("embedding: id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab));
    }
  }
  std::vector<double> out(ids.size() * d);
  const auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(td.begin() + static_cast<long>(static_cast<std::size_t>(ids[i]) * d), d,
                out.begin() + static_cast<long>(i * d));
  }
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  auto saved = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  return make_result(op, std::move(out_shape), std::move(out), {table}, [saved, d](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < saved->size(); ++i) {
      const std::size_t row = static_cast<std::size_t>((*saved)[i]) * d;
      for (std::size_t j = 0; j < d; ++j) g[row + j] += self.grad[i * d + j];
    }
  });
}

Tensor mean(const Tensor& x, int axis) {
  constexpr const char* op = "mean";
  check_finite(op, x);
  const std::size_t ax = norm_axis(op, axis, x.rank(), x.shape());
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(ax));
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto xd = x.data();
  const double inv = 1.0 / static_cast<double>(s.dim);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += xd[(o * s.dim + d) * s.inner + i];
    }
  }
  for (double& v : out) v *= inv;
  return make_result(op, std::move(out_shape), std::move(out), {x}, [s, inv](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t d = 0; d < s.dim; ++d) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          g[(o * s.dim + d) * s.inner + i] += self.grad[o * s.inner + i] * inv;
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  check_finite("sum", x);
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result("sum", {}, {acc}, {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  check_finite("mean_all", x);
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(x.numel());
  return make_result("mean_all", {}, {acc * inv}, {x}, [inv](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0] * inv;
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  constexpr const char* op = "concat";
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  for (const auto& p : parts) check_finite(op, p);
  const Shape& first = parts[0].shape();
  const std::size_t ax = norm_axis(op, axis, first.size(), first);
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_fail(op, first, s, "ranks differ");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != ax && s[i] != first[i]) shape_fail(op, first, s, "non-concat axes differ");
    }
    total += s[ax];
  }
  Shape out_shape = first;
  out_shape[ax] = total;
  const AxisSplit os = split_at(out_shape, ax);
  std::vector<double> out(shape_numel(out_shape));
  auto offsets = std::make_shared<std::vector<std::size_t>>();
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets->push_back(off);
    const std::size_t d = p.shape()[ax];
    const auto pd = p.data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pd.begin() + static_cast<long>(o * d * os.inner), d * os.inner,
                  out.begin() + static_cast<long>((o * total + off) * os.inner));
    }
    off += d;
  }
  std::vector<std::size_t> dims;
  for (const auto& p : parts) dims.push_back(p.shape()[ax]);
  return make_result_n(op, std::move(out_shape), std::move(out), parts,
                       [os, total, offsets, dims](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      const std::size_t d = dims[k];
      for (std::size_t o = 0; o < os.outer; ++o) {
        const double* src = self.grad.data() + (o * total + (*offsets)[k]) * os.inner;
        double* dst = g.data() + o * d * os.inner;
        for (std::size_t i = 0; i < d * os.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_finite("reshape", x);
  if (shape_numel(shape) != x.numel()) shape_fail("reshape", x.shape(), shape, "element counts differ");
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  constexpr const char* op = "transpose";
  check_finite(op, x);
  const std::size_t a0 = norm_axis(op, axis0, x.rank(), x.shape());
  const std::size_t a1 = norm_axis(op, axis1, x.rank(), x.shape());
  std::vector<std::size_t> perm(x.rank());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::swap(perm[a0], perm[a1]);
  Shape out_shape;
  auto out = permute_data(x.data(), x.shape(), perm, out_shape);
  return make_result(op, out_shape, std::move(out), {x}, [perm](Node& self) {
    Node& p = *self.parents[0];
    Shape back_shape;
    // A swap is its own inverse.
    auto back = permute_data(self.grad, self.shape, perm, back_shape);
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
  });
}

Tensor select(const Tensor& x, int axis, std::size_t index) {
  constexpr const char* op = "select";
  check_finite(op, x);
  const std::size_t ax = norm_axis(op, axis, x.rank(), x.shape());
  const AxisSplit s = split_at(x.shape(), ax);
  if (index >= s.dim) shape_fail(op, x.shape(), "index " + std::to_string(index) + " out of range");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(ax));
  std::vector<double> out(s.outer * s.inner);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] = xd[(o * s.dim + index) * s.inner + i];
  }
  return make_result(op, std::move(out_shape), std::move(out), {x}, [s, index](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        g[(o * s.dim + index) * s.inner + i] += self.grad[o * s.inner + i];
      }
    }
  });
}

Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows) {
  constexpr const char* op = "index_rows";
  check_finite(op, x);
  if (x.rank() != 2) shape_fail(op, x.shape(), "input must be [n, d]");
  if (rows.empty()) throw InvalidArgument("index_rows: no rows requested");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  for (auto r : rows) {
    if (r >= n) shape_fail(op, x.shape(), "row " + std::to_string(r) + " out of range");
  }
  std::vector<double> out(rows.size() * d);
  const auto xd = x.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(xd.begin() + static_cast<long>(rows[i] * d), d, out.begin() + static_cast<long>(i * d));
  }
  auto saved = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  return make_result(op, {rows.size(), d}, std::move(out), {x}, [saved, d](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < saved->size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) g[(*saved)[i] * d + j] += self.grad[i * d + j];
    }
  });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  check_finite("dropout", x);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  for (double& m : *mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * (*mask)[i];
  return make_result("dropout", x.shape(), std::move(out), {x}, [mask](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  constexpr const char* op = "cross_entropy";
  check_finite(op, logits);
  if (logits.rank() != 2) shape_fail(op, logits.shape(), "logits must be [n, classes]");
  const std::size_t n = logits.shape()[0], v = logits.shape()[1];
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_str(logits.shape()));
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw InvalidArgument("cross_entropy: target " + std::to_string(t) + " out of range");
    }
  }
  const auto z = logits.data();
  auto probs = std::make_shared<std::vector<double>>(z.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.data() + r * v;
    const double mx = *std::max_element(row, row + v);
    double s = 0.0;
    for (std::size_t j = 0; j < v; ++j) s += ((*probs)[r * v + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < v; ++j) (*probs)[r * v + j] /= s;
    loss += mx + std::log(s) - row[static_cast<std::size_t>(targets[r])];
  }
  loss /= static_cast<double>(n);
  auto saved = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  return make_result(op, {}, {loss}, {logits}, [probs, saved, n, v](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const double scale = self.grad[0] / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < v; ++j) {
        double d = (*probs)[r * v + j];
        if (static_cast<int>(j) == (*saved)[r]) d -= 1.0;
        g[r * v + j] += scale * d;
      }
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets) {
  constexpr const char* op = "bce_with_logits";
  check_finite(op, logits);
  if (targets.size() != logits.numel()) {
    throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_str(logits.shape()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != 0.0 && targets[i] != 1.0) {
      throw InvalidArgument("bce_with_logits: target at index " + std::to_string(i) +
                            " is not 0 or 1");
    }
  }
  const auto z = logits.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    loss += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double inv = 1.0 / static_cast<double>(z.size());
  auto saved = std::make_shared<std::vector<double>>(targets.begin(), targets.end());
  return make_result(op, {}, {loss * inv}, {logits}, [saved, inv](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    const double scale = self.grad[0] * inv;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * (sigmoid_scalar(p.data[i]) - (*saved)[i]);
  });
}

}  // namespace adapterlab
