#include "gradflip/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "gradflip/error.hpp"

namespace gradflip {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ",")); }

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> values, bool tracked) {
  if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; })) {
    throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
  }
  if (numel(shape) != values.size()) {
    throw ShapeError(fmt::format("tensor: shape {} needs {} values, got {}", shape_str(shape),
                                 numel(shape), values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->tracked = tracked;
  node->op = "leaf";
  return node;
}

}  // namespace

Tensor::Tensor() : node_(make_node({}, {0.0}, false)) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double fill) {
  const std::size_t n = gradflip::numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, fill), false));
}

Tensor Tensor::scalar(double v) { return Tensor(make_node({}, {v}, false)); }

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(make_node(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_node(std::move(shape), std::move(values), true));
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) {
    throw ShapeError(fmt::format("size: axis {} out of range for {}", axis, shape_str(shape())));
  }
  return shape()[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

double Tensor::at(std::size_t i) const { return node_->value.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
  if (dim() != 2) throw ShapeError("at(i,j): tensor of shape " + shape_str(shape()) + " is not 2-D");
  return node_->value.at(i * shape()[1] + j);
}

Tensor Tensor::detach() const { return Tensor(make_node(shape(), node_->value, false)); }

Tensor Tensor::make_result(std::string op, Shape shape, std::vector<double> value,
                           std::vector<Tensor> inputs, detail::BackwardFn backward) {
  const bool inputs_finite = std::all_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
  });
  if (inputs_finite &&
      !std::all_of(value.begin(), value.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError(op + ": non-finite output from finite inputs");
  }
  auto node = make_node(std::move(shape), std::move(value), false);
  node->op = std::move(op);
  const bool tracked =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.tracked(); });
  if (tracked) {
    node->tracked = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace gradflip
