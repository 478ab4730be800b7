#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "gradflip/params.hpp"
#include "gradflip/rng.hpp"
#include "gradflip/tensor.hpp"

namespace gradflip {

enum class Mode { train, eval };

enum class PoolKind { sum, max, logsumexp };

std::string_view to_string(PoolKind k);
PoolKind parse_pool_kind(std::string_view s);

struct PoolingConfig {
  PoolKind kind = PoolKind::logsumexp;
  double tau = 1.0;
};

enum class LayerKind { gated_conv, linear };

struct LayerSpec {
  LayerKind kind = LayerKind::gated_conv;
  std::size_t in_channels = 1;
  // For gated_conv this is the channel count after the GLU; the convolution
  // itself produces twice as many.
  std::size_t out_channels = 1;
  std::size_t kernel_width = 5;
  double dropout_rate = 0.0;

  void validate() const;
};

namespace layers {

// x: [T, C_in], weight: [C_out, C_in, K] with K odd, bias: [C_out].
// Stride 1, (K-1)/2 zeros on each side, output [T, C_out].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x: [T, 2C] -> A * sigmoid(B) with A the first C channels.
Tensor glu(const Tensor& x);

// w = g * v / ||v||, norm taken per output unit (axis 0) over all other axes.
Tensor weight_norm(const Tensor& v, const Tensor& g);

// Inverted dropout. Identity in eval mode or when rate == 0.
Tensor dropout(const Tensor& x, double rate, Mode mode, RngStream& rng);

// r: [L, C] -> [C].
Tensor pool(const Tensor& r, const PoolingConfig& cfg);

// Identity forward; backward multiplies the incoming gradient by `factor`.
Tensor grad_scale(const Tensor& x, double factor);

// x: [..., C_in], weight: [C_out, C_in], bias: [C_out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor log_softmax(const Tensor& logits);
// -log softmax(logits)[label] for 1-D logits.
Tensor nll(const Tensor& logits, std::size_t label);

}  // namespace layers

// Direction v, gain g and bias b registered under `<name>.v`, `<name>.g`,
// `<name>.b`.
struct WeightNormParams {
  Tensor v, g, b;

  static WeightNormParams create(ParamStore& store, const std::string& name, Shape v_shape,
                                 std::size_t fan_in, std::size_t kernel_width, ParamGroup group,
                                 std::uint64_t seed);
  Tensor weight() const { return layers::weight_norm(v, g); }
};

// conv1d -> GLU -> dropout, all weights normalized.
class GatedConvLayer {
 public:
  GatedConvLayer(ParamStore& store, std::string name, const LayerSpec& spec, ParamGroup group,
                 std::uint64_t seed);

  // `dropout_rng` is forked by layer name; it may be null in eval mode.
  Tensor forward(const Tensor& x, Mode mode, const RngStream* dropout_rng) const;

  const std::string& name() const { return name_; }
  const LayerSpec& spec() const { return spec_; }
  std::size_t param_count() const;

 private:
  std::string name_;
  LayerSpec spec_;
  WeightNormParams p_;
};

class LinearLayer {
 public:
  LinearLayer(ParamStore& store, std::string name, const LayerSpec& spec, ParamGroup group,
              std::uint64_t seed);

  Tensor forward(const Tensor& x) const;

  const std::string& name() const { return name_; }
  const LayerSpec& spec() const { return spec_; }
  std::size_t param_count() const;

 private:
  std::string name_;
  LayerSpec spec_;
  WeightNormParams p_;
};

}  // namespace gradflip
