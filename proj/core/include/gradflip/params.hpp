#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gradflip/autograd.hpp"
#include "gradflip/tensor.hpp"

namespace gradflip {

// `main` covers the encoder, transcription decoder and ASG transitions;
// `speaker` is the speaker branch.
enum class ParamGroup { main, speaker };

std::string_view to_string(ParamGroup g);
ParamGroup parse_param_group(std::string_view s);

struct ParamEntry {
  Tensor value;
  ParamGroup group;
};

// Named trainable tensors. Iteration is lexicographic by name.
class ParamStore {
 public:
  Tensor add(const std::string& name, Shape shape, std::vector<double> init, ParamGroup group);

  const Tensor& get(const std::string& name) const;
  ParamGroup group(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;
  std::size_t total_values(ParamGroup g) const;
  std::vector<std::string> names() const;
  std::vector<std::string> names(ParamGroup g) const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Overwrites values in place; shape must match.
  void assign(const std::string& name, const std::vector<double>& values);
  // Value snapshot used to compare parameter states.
  std::map<std::string, std::vector<double>> snapshot() const;

 private:
  std::map<std::string, ParamEntry> entries_;
};

using GradMap = std::map<std::string, Tensor>;

// Gradient for every parameter in `params`; untouched ones are zero.
GradMap backward(const Tensor& loss, const ParamStore& params);
GradMap collect(const Gradients& grads, const ParamStore& params);

struct LearningRates {
  double main = 1.4;
  double speaker = 0.1;
};

struct GroupMask {
  bool main = true;
  bool speaker = true;
};

// Plain SGD: w <- w - lr(group) * g, in name order. Groups switched off in
// `update` keep their values bit-identical.
void sgd_step(ParamStore& params, const GradMap& grads, LearningRates lr, GroupMask update = {});

}  // namespace gradflip
