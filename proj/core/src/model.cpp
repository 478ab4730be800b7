#include "gradflip/model.hpp"

#include <fmt/format.h>

#include "gradflip/error.hpp"
#include "gradflip/rng.hpp"

namespace gradflip {

std::string_view to_string(ForkPoint f) {
  switch (f) {
    case ForkPoint::in: return "in";
    case ForkPoint::mid: return "mid";
    case ForkPoint::out: return "out";
  }
  return "?";
}

ForkPoint parse_fork_point(std::string_view s) {
  if (s == "in") return ForkPoint::in;
  if (s == "mid") return ForkPoint::mid;
  if (s == "out") return ForkPoint::out;
  throw ValueError("unknown fork '" + std::string(s) + "' (expected in, mid or out)");
}

std::size_t ForkPresets::at(ForkPoint f) const {
  switch (f) {
    case ForkPoint::in: return in;
    case ForkPoint::mid: return mid;
    case ForkPoint::out: return out;
  }
  return in;
}

void ModelConfig::validate() const {
  if (input_dim == 0 || channels == 0 || branch_channels == 0) {
    throw ValueError("model: dimensions must be positive");
  }
  if (n_layers < 2) throw ValueError("model: need at least 2 gated conv layers");
  auto check_fork = [&](std::size_t f, const char* what) {
    if (f < 1 || f >= n_layers) {
      throw ValueError(fmt::format("model: {} {} outside [1, {}]", what, f, n_layers - 1));
    }
  };
  check_fork(fork_layer, "fork_layer");
  check_fork(forks.in, "fork preset in");
  check_fork(forks.mid, "fork preset mid");
  check_fork(forks.out, "fork preset out");
  if (kernel_width % 2 == 0 || branch_kernel % 2 == 0) throw ValueError("model: kernel widths must be odd");
  if (vocab_size < 2) throw ValueError("model: vocabulary needs letters plus the word separator");
  if (n_speakers < 1) throw ValueError("model: need at least one speaker");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValueError("model: dropout outside [0,1)");
  if (pooling.kind == PoolKind::logsumexp && !(pooling.tau > 0.0)) {
    throw ValueError("model: pooling tau must be positive");
  }
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.input_dim = 40;
  c.n_layers = 17;
  c.channels = 128;
  c.kernel_width = 5;
  c.forks = {2, 8, 15};
  c.fork_layer = 8;
  c.vocab_size = 28;
  c.n_speakers = 283;
  c.branch_channels = 200;
  c.branch_kernel = 5;
  return c;
}

std::size_t expected_param_count(const ModelConfig& c) {
  auto gated = [](std::size_t in, std::size_t out, std::size_t k) { return 2 * out * in * k + 4 * out; };
  auto lin = [](std::size_t in, std::size_t out) { return out * in + 2 * out; };
  std::size_t n = gated(c.input_dim, c.channels, c.kernel_width);
  n += (c.n_layers - 1) * gated(c.channels, c.channels, c.kernel_width);
  n += lin(c.channels, c.vocab_size);
  n += c.vocab_size * c.vocab_size;
  n += gated(c.channels, c.branch_channels, c.branch_kernel);
  n += lin(c.branch_channels, c.n_speakers);
  return n;
}

SpeakerHead::SpeakerHead(ParamStore& store, const std::string& prefix, std::size_t in_channels,
                         std::size_t channels, std::size_t kernel_width, std::size_t n_classes,
                         double dropout_rate, PoolingConfig pooling, ParamGroup group,
                         std::uint64_t seed)
    : conv_(store, prefix + ".conv",
            LayerSpec{LayerKind::gated_conv, in_channels, channels, kernel_width, dropout_rate}, group,
            seed),
      pooling_(pooling),
      out_(store, prefix + ".out", LayerSpec{LayerKind::linear, channels, n_classes, 1, 0.0}, group,
           seed) {}

Tensor SpeakerHead::forward(const Tensor& rep, Mode mode, const RngStream* dropout_rng) const {
  return out_.forward(layers::pool(conv_.forward(rep, mode, dropout_rng), pooling_));
}

namespace {

std::string layer_name(std::size_t i) { return fmt::format("layer{:02d}", i); }

std::vector<GatedConvLayer> make_layers(ParamStore& store, const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::vector<GatedConvLayer> out;
  out.reserve(c.n_layers);
  for (std::size_t i = 1; i <= c.n_layers; ++i) {
    LayerSpec spec{LayerKind::gated_conv, i == 1 ? c.input_dim : c.channels, c.channels,
                   c.kernel_width, c.dropout_rate};
    out.emplace_back(store, layer_name(i), spec, ParamGroup::main, seed);
  }
  return out;
}

}  // namespace

ModelGraph::ModelGraph(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      layers_(make_layers(params_, cfg, seed)),
      projection_(params_, "output",
                  LayerSpec{LayerKind::linear, cfg.channels, cfg.vocab_size, 1, 0.0}, ParamGroup::main,
                  seed),
      transitions_(params_.add("asg.transitions", {cfg.vocab_size, cfg.vocab_size},
                               std::vector<double>(cfg.vocab_size * cfg.vocab_size, 0.0),
                               ParamGroup::main)),
      branch_(params_, "speaker", cfg.channels, cfg.branch_channels, cfg.branch_kernel,
              cfg.n_speakers, cfg.dropout_rate, cfg.pooling, ParamGroup::speaker, seed) {}

void ModelGraph::check_input(const Tensor& x) const {
  if (x.dim() != 2 || x.shape()[1] != cfg_.input_dim) {
    throw ShapeError(fmt::format("model: input {} does not match [T, {}]", shape_str(x.shape()),
                                 cfg_.input_dim));
  }
}

Tensor ModelGraph::encode(const Tensor& x, std::size_t upto, Mode mode,
                          const RngStream* dropout_rng) const {
  Tensor h = x;
  for (std::size_t i = 0; i < upto; ++i) h = layers_[i].forward(h, mode, dropout_rng);
  return h;
}

Tensor ModelGraph::decode_from_fork(const Tensor& fork_rep, Mode mode,
                                    const RngStream* dropout_rng) const {
  Tensor h = fork_rep;
  for (std::size_t i = cfg_.fork_layer; i < cfg_.n_layers; ++i) h = layers_[i].forward(h, mode, dropout_rng);
  return projection_.forward(h);
}

Tensor ModelGraph::speaker_logits(const Tensor& fork_rep, double factor, Mode mode,
                                  const RngStream* dropout_rng) const {
  return branch_.forward(layers::grad_scale(fork_rep, factor), mode, dropout_rng);
}

Tensor ModelGraph::forward_acoustic(const Tensor& x, Mode mode, const RngStream* dropout_rng) const {
  check_input(x);
  return decode_from_fork(encode(x, cfg_.fork_layer, mode, dropout_rng), mode, dropout_rng);
}

Tensor ModelGraph::forward_speaker(const Tensor& x, double factor, Mode mode,
                                   const RngStream* dropout_rng) const {
  check_input(x);
  return speaker_logits(encode(x, cfg_.fork_layer, mode, dropout_rng), factor, mode, dropout_rng);
}

JointOutput ModelGraph::forward_joint(const Tensor& x, double factor, Mode mode,
                                      const RngStream* dropout_rng) const {
  check_input(x);
  Tensor rep = encode(x, cfg_.fork_layer, mode, dropout_rng);
  JointOutput out;
  out.emissions = decode_from_fork(rep, mode, dropout_rng);
  out.speaker_logits = speaker_logits(rep, factor, mode, dropout_rng);
  out.representation = rep;
  return out;
}

Tensor ModelGraph::extract_representation(const Tensor& x, std::size_t layer) const {
  check_input(x);
  if (layer > cfg_.n_layers) {
    throw ValueError(fmt::format("extract_representation: layer {} outside [0, {}]", layer, cfg_.n_layers));
  }
  return encode(x.detach(), layer, Mode::eval, nullptr).detach();
}

ModelGraph build_model(const ModelConfig& cfg, std::uint64_t seed) { return ModelGraph(cfg, seed); }

}  // namespace gradflip
