#include "gradflip/params.hpp"

#include "gradflip/error.hpp"

namespace gradflip {

std::string_view to_string(ParamGroup g) { return g == ParamGroup::main ? "main" : "speaker"; }

ParamGroup parse_param_group(std::string_view s) {
  if (s == "main") return ParamGroup::main;
  if (s == "speaker") return ParamGroup::speaker;
  throw ValueError("unknown parameter group '" + std::string(s) + "'");
}

Tensor ParamStore::add(const std::string& name, Shape shape, std::vector<double> init,
                       ParamGroup group) {
  if (entries_.count(name)) throw ValueError("parameter '" + name + "' already exists");
  Tensor t = Tensor::parameter(std::move(shape), std::move(init));
  entries_.emplace(name, ParamEntry{t, group});
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second.value;
}

ParamGroup ParamStore::group(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValueError("unknown parameter '" + name + "'");
  return it->second.group;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.numel();
  return n;
}

std::size_t ParamStore::total_values(ParamGroup g) const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_)
    if (e.group == g) n += e.value.numel();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamStore::names(ParamGroup g) const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_)
    if (e.group == g) out.push_back(name);
  return out;
}

void ParamStore::assign(const std::string& name, const std::vector<double>& values) {
  Tensor t = get(name);
  if (values.size() != t.numel()) {
    throw ShapeError("assign: '" + name + "' expects " + std::to_string(t.numel()) + " values, got " +
                     std::to_string(values.size()));
  }
  t.mutable_values() = values;
}

std::map<std::string, std::vector<double>> ParamStore::snapshot() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, e] : entries_) out.emplace(name, e.value.to_vector());
  return out;
}

GradMap collect(const Gradients& grads, const ParamStore& params) {
  GradMap out;
  for (const auto& [name, e] : params) out.emplace(name, grads.of(e.value));
  return out;
}

GradMap backward(const Tensor& loss, const ParamStore& params) {
  return collect(backward(loss), params);
}

void sgd_step(ParamStore& params, const GradMap& grads, LearningRates lr, GroupMask update) {
  for (const auto& [name, e] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ValueError("sgd_step: missing gradient for '" + name + "'");
    if (it->second.numel() != e.value.numel()) {
      throw ShapeError("sgd_step: gradient for '" + name + "' has shape " +
                       shape_str(it->second.shape()) + ", parameter has " +
                       shape_str(e.value.shape()));
    }
  }
  for (const auto& [name, e] : params) {
    const bool on = e.group == ParamGroup::main ? update.main : update.speaker;
    if (!on) continue;
    const double rate = e.group == ParamGroup::main ? lr.main : lr.speaker;
    auto g = grads.at(name).data();
    Tensor w = e.value;
    auto& v = w.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= rate * g[i];
  }
}

}  // namespace gradflip
