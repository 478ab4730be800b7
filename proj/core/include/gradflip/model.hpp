#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradflip/layers.hpp"
#include "gradflip/params.hpp"
#include "gradflip/tensor.hpp"

namespace gradflip {

enum class ForkPoint { in, mid, out };

std::string_view to_string(ForkPoint f);
ForkPoint parse_fork_point(std::string_view s);

// Layer indices (1-based, counted in gated-conv blocks) for the IN/MID/OUT
// fork positions.
struct ForkPresets {
  std::size_t in = 1;
  std::size_t mid = 3;
  std::size_t out = 4;

  std::size_t at(ForkPoint f) const;
};

struct ModelConfig {
  std::size_t input_dim = 16;
  std::size_t n_layers = 5;
  std::size_t channels = 16;
  std::size_t kernel_width = 5;
  std::size_t fork_layer = 3;
  ForkPresets forks;
  // Letters plus the word separator.
  std::size_t vocab_size = 7;
  std::size_t n_speakers = 12;
  double dropout_rate = 0.25;
  PoolingConfig pooling;
  std::size_t branch_channels = 32;
  std::size_t branch_kernel = 5;

  void validate() const;

  // 5 gated conv layers of 16 channels, forks {1, 3, 4}.
  static ModelConfig toy();
  // 17 layers, forks {2, 8, 15}, branch of width 5 with 200 feature maps.
  static ModelConfig paper();
};

// Trainable values implied by the layer shapes alone.
std::size_t expected_param_count(const ModelConfig& cfg);

// Speaker classifier over a [L, C] representation:
// gated conv -> temporal pooling -> linear to one logit per class.
class SpeakerHead {
 public:
  SpeakerHead(ParamStore& store, const std::string& prefix, std::size_t in_channels,
              std::size_t channels, std::size_t kernel_width, std::size_t n_classes,
              double dropout_rate, PoolingConfig pooling, ParamGroup group, std::uint64_t seed);

  Tensor forward(const Tensor& rep, Mode mode, const RngStream* dropout_rng) const;

 private:
  GatedConvLayer conv_;
  PoolingConfig pooling_;
  LinearLayer out_;
};

struct JointOutput {
  Tensor emissions;
  Tensor representation;
  Tensor speaker_logits;
};

// Encoder (layers 1..fork_layer), transcription decoder (layers above the
// fork plus a per-frame projection to the vocabulary), ASG transitions, and a
// speaker branch that reads the fork output through a gradient-scaling
// junction. Everything but the branch is in group `main`.
class ModelGraph {
 public:
  ModelGraph(const ModelConfig& cfg, std::uint64_t seed);

  ModelGraph(const ModelGraph&) = delete;
  ModelGraph& operator=(const ModelGraph&) = delete;
  ModelGraph(ModelGraph&&) = default;
  ModelGraph& operator=(ModelGraph&&) = default;

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Tensor& transitions() const { return transitions_; }

  // [T, K] emission scores; the speaker branch is not evaluated.
  Tensor forward_acoustic(const Tensor& x, Mode mode, const RngStream* dropout_rng = nullptr) const;

  // Speaker logits; gradients reaching the encoder are multiplied by `factor`.
  Tensor forward_speaker(const Tensor& x, double factor, Mode mode,
                         const RngStream* dropout_rng = nullptr) const;

  // One encoder pass feeding both heads.
  JointOutput forward_joint(const Tensor& x, double factor, Mode mode,
                            const RngStream* dropout_rng = nullptr) const;

  // Eval-mode output of gated-conv block `layer` (1-based); layer 0 is the
  // input itself.
  Tensor extract_representation(const Tensor& x, std::size_t layer) const;

  // Logits of the branch applied to an already computed fork representation.
  Tensor speaker_logits(const Tensor& fork_rep, double factor, Mode mode,
                        const RngStream* dropout_rng) const;

  // Emission scores from an already computed fork representation.
  Tensor decode_from_fork(const Tensor& fork_rep, Mode mode, const RngStream* dropout_rng) const;

 private:
  void check_input(const Tensor& x) const;
  Tensor encode(const Tensor& x, std::size_t upto, Mode mode, const RngStream* dropout_rng) const;

  ModelConfig cfg_;
  std::uint64_t seed_;
  ParamStore params_;
  std::vector<GatedConvLayer> layers_;
  LinearLayer projection_;
  Tensor transitions_;
  SpeakerHead branch_;
};

ModelGraph build_model(const ModelConfig& cfg, std::uint64_t seed);

// Deterministic 64-bit digest of config and parameter bits, printed as hex.
std::string model_digest(const ModelGraph& m);

// Text checkpoint: format version, variant label, ModelConfig and every
// parameter with its group, shape and values. load(save(m)) reproduces m's
// outputs bit-exactly.
struct Checkpoint {
  std::string variant;
  ModelGraph model;
};

std::string checkpoint_to_string(const ModelGraph& m, const std::string& variant);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const ModelGraph& m, const std::string& variant, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gradflip
