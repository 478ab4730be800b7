#pragma once

#include <cstddef>
#include <vector>

#include "gradflip/tensor.hpp"

// Differentiable primitives. Binary elementwise ops accept a right operand
// whose shape equals the left shape or is a trailing suffix of it (a bias
// row, or a scalar), broadcast over the leading axes.
namespace gradflip::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double c);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

// Reductions remove `axis`. Max ties resolve to the lowest index.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor max(const Tensor& a, std::size_t axis);
Tensor logsumexp(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);

// Half-open [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

}  // namespace gradflip::ops
