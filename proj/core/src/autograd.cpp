#include "gradflip/autograd.hpp"

#include <unordered_set>

#include "gradflip/error.hpp"

namespace gradflip {

Tensor Gradients::of(const Tensor& t) const {
  auto it = grads_.find(t.node().get());
  if (it == grads_.end()) return Tensor::zeros(t.shape());
  return Tensor::from(t.shape(), it->second);
}

bool Gradients::reached(const Tensor& t) const { return grads_.count(t.node().get()) != 0; }

Gradients backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  Gradients result;
  if (!loss.tracked()) return result;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->tracked && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto& grads = result.grads_;
  grads[loss.node().get()] = {1.0};
  std::vector<std::vector<double>> scratch;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->backward) continue;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    // Inputs may repeat (e.g. mul(w, w)); give each slot its own buffer and
    // fold them in afterwards.
    scratch.assign(node->inputs.size(), {});
    for (std::size_t k = 0; k < node->inputs.size(); ++k) {
      if (node->inputs[k]->tracked) scratch[k].assign(node->inputs[k]->value.size(), 0.0);
    }
    node->backward(found->second, scratch);
    for (std::size_t k = 0; k < node->inputs.size(); ++k) {
      if (scratch[k].empty()) continue;
      auto& dst = grads[node->inputs[k].get()];
      if (dst.empty()) {
        dst = std::move(scratch[k]);
      } else {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scratch[k][i];
      }
    }
  }
  result.keep_.reserve(order.size());
  for (detail::Node* n : order) {
    for (auto& in : n->inputs) result.keep_.push_back(in);
  }
  return result;
}

}  // namespace gradflip
