#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gradflip {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// Receives d(loss)/d(output) and accumulates into d(loss)/d(input_k).
// `input_grads[k]` is empty when input k is not tracked.
using BackwardFn = std::function<void(std::span<const double> out_grad,
                                      std::span<std::vector<double>> input_grads)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  bool tracked = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

// Dense row-major tensor of doubles. Copies share the underlying node; the
// values of a tensor never change after construction except for parameters
// updated through sgd_step.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double fill);
  static Tensor scalar(double v);
  static Tensor from(Shape shape, std::vector<double> values);
  // A grad-tracked leaf.
  static Tensor parameter(Shape shape, std::vector<double> values);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }
  std::span<const double> data() const { return node_->value; }
  bool tracked() const { return node_->tracked; }

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;

  // Same values, no graph history.
  Tensor detach() const;
  std::vector<double> to_vector() const { return node_->value; }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Engine internals.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  std::vector<double>& mutable_values() { return node_->value; }
  static Tensor make_result(std::string op, Shape shape, std::vector<double> value,
                            std::vector<Tensor> inputs, detail::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace gradflip
