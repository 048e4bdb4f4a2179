#include "adapterlab/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "adapterlab/error.hpp"

namespace adapterlab {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor: zero-sized axis in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape()));
  }
  return shape()[static_cast<std::size_t>(a)];
}

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::is_leaf() const { return node_->parents.empty() && !node_->backward; }
const char* Tensor::op_name() const { return node_->op; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  return from_data(node_->shape, node_->data, node_->requires_grad);
}

Tensor Tensor::detach() const { return from_data(node_->shape, node_->data, false); }

std::size_t Tensor::backward() const {
  if (!defined()) throw InvalidArgument("backward: undefined tensor");
  if (numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw InvalidArgument("backward: loss does not depend on any tensor requiring grad");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  return order.size();
}

}  // namespace adapterlab
