#include "fixtures.hpp"

#include <cmath>
#include <filesystem>

#include <fmt/format.h>

namespace gradflip::testing {

GenConfig clean_gen_config(std::size_t utterances, std::uint64_t seed) {
  GenConfig g;
  g.n_speakers = 1;
  g.utterances_per_speaker = utterances;
  g.noise_sigma = 0.0;
  g.offset_sigma = 0.0;
  g.gain_sigma = 0.0;
  g.seed = seed;
  return g;
}

void set_param(ModelGraph& m, const std::string& name, const std::vector<double>& values) {
  m.params().assign(name, values);
}

ModelGraph perfect_model(const GenConfig& gen, const Dataset& ds) {
  ModelConfig cfg = ModelConfig::toy();
  cfg.input_dim = ds.dim;
  cfg.channels = ds.dim;
  cfg.vocab_size = ds.vocab.size();
  cfg.n_speakers = ds.n_speakers();
  ModelGraph m(cfg, 1);

  const std::size_t C = cfg.channels, K = cfg.kernel_width, center = K / 2;
  for (std::size_t l = 1; l <= cfg.n_layers; ++l) {
    const std::string name = fmt::format("layer{:02d}", l);
    std::vector<double> v(2 * C * C * K, 0.0), g(2 * C, 0.0), b(2 * C, 0.0);
    for (std::size_t o = 0; o < C; ++o) {
      // A half: identity at the center tap.
      v[(o * C + o) * K + center] = 1.0;
      g[o] = 1.0;
      // B half: zero weights (g = 0 over a unit direction), saturated gate.
      v[((C + o) * C + 0) * K + center] = 1.0;
      b[C + o] = 50.0;
    }
    set_param(m, name + ".v", v);
    set_param(m, name + ".g", g);
    set_param(m, name + ".b", b);
  }

  const auto protos = token_prototypes(gen);
  const double s2 = gen.prototype_scale * gen.prototype_scale;
  std::vector<double> v, g;
  for (const auto& p : protos) {
    double sq = 0.0;
    for (double e : p) {
      v.push_back(100.0 * e / s2);
      sq += (100.0 * e / s2) * (100.0 * e / s2);
    }
    g.push_back(std::sqrt(sq));
  }
  set_param(m, "output.v", v);
  set_param(m, "output.g", g);
  set_param(m, "output.b", std::vector<double>(protos.size(), 0.0));
  return m;
}

GenConfig tiny_gen_config(std::size_t speakers, std::size_t utterances, std::uint64_t seed) {
  GenConfig g;
  g.n_speakers = speakers;
  g.utterances_per_speaker = utterances;
  g.alphabet_size = 3;
  g.dim = 4;
  g.words_min = 1;
  g.words_max = 2;
  g.letters_min = 1;
  g.letters_max = 2;
  g.seed = seed;
  return g;
}

ModelConfig tiny_model_config(const Dataset& ds) {
  ModelConfig c;
  c.input_dim = ds.dim;
  c.n_layers = 3;
  c.channels = 4;
  c.kernel_width = 3;
  c.fork_layer = 2;
  c.forks = {1, 2, 2};
  c.vocab_size = ds.vocab.size();
  c.n_speakers = ds.n_speakers();
  c.branch_channels = 4;
  c.branch_kernel = 3;
  return c;
}

std::string scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt::format("gradflip-test-{}-{}", tag, ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace gradflip::testing
