#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradflip/asg.hpp"
#include "gradflip/tensor.hpp"

namespace gradflip {

struct Utterance {
  std::string id;
  std::size_t speaker = 0;
  // Absent for speaker-only (semi-supervised) utterances.
  std::optional<asg::TokenSeq> transcript;
  // [T, d]
  Tensor features;

  std::size_t frames() const { return features.shape()[0]; }
};

bool operator==(const Utterance& a, const Utterance& b);

struct Dataset {
  std::vector<Utterance> utterances;
  // Letters followed by the word separator.
  std::vector<std::string> vocab;
  std::size_t separator = 0;
  std::vector<std::string> speakers;
  std::size_t dim = 0;

  std::size_t size() const { return utterances.size(); }
  std::size_t n_speakers() const { return speakers.size(); }
  // Throws ValueError if labels, shapes or transcripts are inconsistent.
  void validate() const;
};

bool operator==(const Dataset& a, const Dataset& b);

struct GenConfig {
  std::size_t n_speakers = 12;
  std::size_t utterances_per_speaker = 63;
  std::size_t alphabet_size = 6;
  std::size_t dim = 16;
  std::size_t frames_min = 2;
  std::size_t frames_max = 4;
  std::size_t words_min = 2;
  std::size_t words_max = 3;
  std::size_t letters_min = 2;
  std::size_t letters_max = 4;
  double prototype_scale = 2.0;
  double noise_sigma = 0.2;
  double offset_sigma = 0.5;
  double gain_sigma = 0.6;
  // Extra speakers whose utterances carry no transcript.
  std::size_t semi_speakers = 0;
  std::size_t semi_utterances_per_speaker = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SpeakerProfile {
  std::vector<double> offset;
  std::vector<double> gain;
};

// Orthonormal (scaled) prototype per token, separator last. Throws if the
// vocabulary does not fit in `dim` dimensions.
std::vector<std::vector<double>> token_prototypes(const GenConfig& cfg);
std::vector<SpeakerProfile> speaker_profiles(const GenConfig& cfg);

// Frame = prototype(token) * gain(speaker) + offset(speaker) + noise.
// Transcribed speakers come first, then the semi speakers.
Dataset generate(const GenConfig& cfg);

struct Splits {
  Dataset train, dev, test;
};

// Stratified by speaker: per speaker floor(train_frac*n) train,
// floor(dev_frac*n) dev, the rest test. All splits keep the speaker table.
Splits split(const Dataset& ds, double train_frac, double dev_frac, std::uint64_t seed);

// First `n_speakers` speakers, first `utts_per_speaker` utterances of each,
// labels re-densified.
Dataset select_subset(const Dataset& ds, std::size_t n_speakers, std::size_t utts_per_speaker);

struct SemiPartition {
  Dataset transcribed;
  Dataset untranscribed;
};

// Separates utterances with and without transcripts; both halves get dense
// speaker labels.
SemiPartition partition_semi(const Dataset& ds);

std::string dataset_to_string(const Dataset& ds);
Dataset dataset_from_string(const std::string& text);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace gradflip
