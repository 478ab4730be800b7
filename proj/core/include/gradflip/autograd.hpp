#pragma once

#include <memory>
#include <unordered_map>
#include <vector>

#include "gradflip/tensor.hpp"

namespace gradflip {

// Gradients of a scalar loss with respect to every tracked tensor reached
// from it. Tensors the loss does not depend on get zeros.
class Gradients {
 public:
  Tensor of(const Tensor& t) const;
  bool reached(const Tensor& t) const;

 private:
  friend Gradients backward(const Tensor& loss);
  std::unordered_map<const detail::Node*, std::vector<double>> grads_;
  // Keeps the keys alive while this object exists.
  std::vector<std::shared_ptr<detail::Node>> keep_;
};

// Reverse-mode sweep over the graph recorded behind `loss`. The graph is not
// modified, so the same loss can be differentiated again.
Gradients backward(const Tensor& loss);

}  // namespace gradflip
