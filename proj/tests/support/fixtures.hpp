#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradflip/data.hpp"
#include "gradflip/model.hpp"

namespace gradflip::testing {

// One speaker, no noise, unit gain, zero offset: every frame is exactly the
// prototype of its token.
GenConfig clean_gen_config(std::size_t utterances = 12, std::uint64_t seed = 7);

// A model whose blocks pass their input through unchanged and whose output
// layer scores each prototype at 100 and everything else at 0. Viterbi
// decoding of clean data then reproduces every transcript.
ModelGraph perfect_model(const GenConfig& gen, const Dataset& ds);

// A few short utterances from a handful of speakers.
GenConfig tiny_gen_config(std::size_t speakers = 3, std::size_t utterances = 4, std::uint64_t seed = 11);
ModelConfig tiny_model_config(const Dataset& ds);

void set_param(ModelGraph& m, const std::string& name, const std::vector<double>& values);

// Fresh scratch directory under the system temp directory.
std::string scratch_dir(const std::string& tag);

}  // namespace gradflip::testing
