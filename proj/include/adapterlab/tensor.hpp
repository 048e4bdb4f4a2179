#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adapterlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  // Empty until a gradient is first accumulated.
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major float64 tensor taking part in a reverse-mode autodiff graph.
///
/// Tensor is a handle: copies share storage and graph position. Use clone()
/// for an independent leaf with the same values.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Size of one axis; negative axes count from the end.
  std::size_t dim(int axis) const;

  std::span<const double> data() const;
  /// In-place access for optimizers and checkpoint loading. Never mutate a
  /// tensor that an unfinished graph still depends on.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  const char* op_name() const;

  bool has_grad() const;
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Drops the gradient buffer.
  void zero_grad();

  /// Deep copy as a fresh leaf (requires_grad preserved, no grad buffer).
  Tensor clone() const;
  /// Same values, cut from the graph, requires_grad off.
  Tensor detach() const;

  /// Reverse pass from this scalar. Seeds d(self)/d(self) = 1 and accumulates
  /// into every reachable tensor that requires grad. Returns the number of
  /// graph nodes visited.
  std::size_t backward() const;

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

}  // namespace adapterlab
