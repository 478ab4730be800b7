#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradflip/asg.hpp"
#include "gradflip/data.hpp"
#include "gradflip/model.hpp"

namespace gradflip {

// Levenshtein distance with unit insert, delete and substitute costs.
std::size_t edit_distance(std::span<const int> a, std::span<const int> b);

// Splits at `separator`, dropping empty words.
std::vector<asg::TokenSeq> split_words(std::span<const int> tokens, int separator);

struct ErrorRate {
  double value = 0.0;
  std::size_t errors = 0;
  std::size_t reference_length = 0;
  std::size_t n_utts = 0;
  // Utterances without a transcript.
  std::size_t skipped = 0;
};

// Sum of edit distances over sum of reference lengths.
ErrorRate letter_error_rate(const std::vector<asg::TokenSeq>& hyps, const std::vector<asg::TokenSeq>& refs);
ErrorRate word_error_rate(const std::vector<asg::TokenSeq>& hyps, const std::vector<asg::TokenSeq>& refs,
                          int separator);

// collapse(viterbi(emissions)) from an eval-mode forward pass.
asg::TokenSeq transcribe(const ModelGraph& m, const Tensor& features);

struct TranscriptionScores {
  ErrorRate ler;
  ErrorRate wer;
};

TranscriptionScores evaluate_transcription(const ModelGraph& m, const Dataset& ds);
ErrorRate evaluate_ler(const ModelGraph& m, const Dataset& ds);
ErrorRate evaluate_wer(const ModelGraph& m, const Dataset& ds);

// Top-1 accuracy of the model's own speaker branch; labels are shifted by
// `label_offset` before comparison.
double speaker_accuracy(const ModelGraph& m, const Dataset& ds, std::size_t label_offset = 0);

struct RepItem {
  std::string id;
  Tensor rep;
  std::size_t speaker = 0;
};

struct RepDump {
  std::size_t layer = 0;
  std::vector<RepItem> items;
  std::size_t n_speakers = 0;
  std::string source;
};

// Eval-mode representations after block `layer` (0 = raw features).
RepDump dump_reps(const ModelGraph& m, const Dataset& ds, std::size_t layer);

struct ProbeConfig {
  std::size_t epochs = 10;
  double lr = 0.1;
  std::size_t batch_size = 1;
  std::size_t channels = 32;
  std::size_t kernel_width = 5;
  PoolingConfig pooling;
  double dropout_rate = 0.0;
  double train_frac = 0.8;
  // Z-score every channel with statistics of the probe's training share, so
  // accuracy reflects what is encoded rather than the activation scale.
  bool standardize = false;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
};

// Trains a fresh speaker classifier (gated conv, pooling, linear, NLL) on a
// stratified share of the dump and scores it on the rest.
ProbeResult train_probe(const RepDump& reps, const ProbeConfig& cfg);

struct ProbeCell {
  std::string variant;
  // Null when the checkpoint is missing; the cell is reported as absent.
  const ModelGraph* model = nullptr;
  std::size_t layer = 0;
  // Printed in the layer column; the index is used when empty.
  std::string label;
  std::string error;
};

struct ProbeRow {
  std::string variant;
  std::string layer;
  std::optional<double> accuracy;
  double chance = 0.0;
  std::size_t n_eval = 0;
  std::uint64_t seed = 0;
};

struct ProbeReport {
  std::vector<ProbeRow> rows;
};

// One probe per cell plus a final chance row (1/S). Each probe copies the
// branch shape (channels, kernel, pooling) of the cell's model.
ProbeReport figure2_report(const std::vector<ProbeCell>& cells, const Dataset& ds, const ProbeConfig& cfg);

std::string probe_report_csv(const ProbeReport& report);

struct EvalRow {
  std::string split;
  std::string metric;
  double value = 0.0;
  std::size_t n_utts = 0;
};

std::string eval_report_csv(const std::vector<EvalRow>& rows);

}  // namespace gradflip
