#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradflip/data.hpp"
#include "gradflip/model.hpp"
#include "gradflip/params.hpp"

namespace gradflip {

enum class TrainMode { baseline, mt, al, semi };

std::string_view to_string(TrainMode m);
TrainMode parse_train_mode(std::string_view s);

enum class LambdaKind { constant, ramp };

struct LambdaSchedule {
  LambdaKind kind = LambdaKind::constant;
  double value = 0.5;
  double lambda_max = 0.2;
  double gamma = 10.0;

  static LambdaSchedule constant_at(double v) { return {LambdaKind::constant, v, 0.2, 10.0}; }
  static LambdaSchedule ramp_to(double max, double gamma = 10.0) { return {LambdaKind::ramp, 0.0, max, gamma}; }
  // 0.5 static for MT, 0 -> 0.2 ramp for AL and semi.
  static LambdaSchedule for_mode(TrainMode m);
};

// constant: value. ramp: lambda_max * (2 / (1 + exp(-p)) - 1) with
// p = gamma * epoch / total_epochs.
double lambda_at(const LambdaSchedule& s, std::size_t epoch, std::size_t total_epochs);

// Sign of the speaker-gradient factor at the fork: +1 for MT, -1 for AL and
// semi, 0 for baseline.
double fork_sign(TrainMode m);

enum class Phase { a, b, c };

// Scaling of each utterance's objective (acoustic plus speaker term) before
// it enters the batch mean. `frames` divides by the frame count so the step
// size does not grow with utterance length. Reported losses stay unscaled.
enum class LossNorm { none, frames };
std::string_view to_string(LossNorm n);
LossNorm parse_loss_norm(std::string_view s);
std::string_view to_string(Phase p);

struct MetricsRow {
  std::size_t epoch = 0;
  Phase phase = Phase::a;
  double train_acoustic_loss = 0.0;
  double train_speaker_loss = 0.0;
  double dev_ler = 0.0;
  double dev_speaker_accuracy = 0.0;
  double lambda = 0.0;
  double wall_clock_seconds = 0.0;
};

struct TrainConfig {
  TrainMode mode = TrainMode::baseline;
  LearningRates lr{1.4, 0.1};
  std::size_t batch_size = 4;
  std::size_t epochs_a = 5;
  std::size_t epochs_b = 2;
  std::size_t epochs_c = 15;
  LambdaSchedule lambda = LambdaSchedule::for_mode(TrainMode::baseline);
  // Transcribed batches per speaker-only batch in semi mode; unset derives
  // it from the dataset sizes.
  std::optional<std::size_t> semi_mix_ratio;
  LossNorm loss_norm = LossNorm::frames;
  std::uint64_t seed = 1;
  bool record_time = false;
  double divergence_threshold = 1e6;
  // Called after each epoch's metrics row is complete.
  std::function<void(const MetricsRow&)> on_epoch;

  std::size_t total_epochs() const { return epochs_a + epochs_b + epochs_c; }
  void validate() const;
};

struct BatchItem {
  const Utterance* utt = nullptr;
  // Label in the model's speaker space.
  std::size_t speaker = 0;
};

struct Batch {
  std::vector<BatchItem> items;
  // No transcripts: only the speaker loss is optimized.
  bool speaker_only = false;
};

struct TermMask {
  bool acoustic = true;
  bool speaker = true;
  LossNorm norm = LossNorm::frames;
};

struct BatchGradients {
  GradMap grads;
  double acoustic_loss = 0.0;
  double speaker_loss = 0.0;
};

// Mean over the batch of d(L_acoustic + L_speaker) where the speaker loss
// reaches the encoder scaled by `factor`. Baseline callers switch the
// speaker term off through `terms`.
BatchGradients batch_gradients(const ModelGraph& m, const Batch& batch, double factor,
                               const RngStream* dropout_rng, TermMask terms = {});

struct StepResult {
  double acoustic_loss = 0.0;
  double speaker_loss = 0.0;
};

struct StepOptions {
  LearningRates lr{1.4, 0.1};
  GroupMask update{};
  const RngStream* dropout_rng = nullptr;
  // Overrides the factor derived from mode and lambda (Phase A uses 0).
  std::optional<double> factor;
  LossNorm loss_norm = LossNorm::frames;
};

// One SGD update. MT routes the speaker loss with +lambda, AL and semi with
// -lambda, baseline drops it. A speaker-only batch is only legal in semi mode.
StepResult step(ModelGraph& m, const Batch& batch, TrainMode mode, double lambda, const StepOptions& opt);

// Speaker labels of `semi` are shifted past the `train` speaker table.
// After every `ratio` transcribed batches one speaker-only batch follows.
std::vector<Batch> make_semi_batches(const Dataset& train, const Dataset& semi, std::size_t ratio,
                                     std::size_t batch_size, std::uint64_t seed, std::size_t epoch);
std::size_t default_semi_ratio(const Dataset& train, const Dataset& semi);

std::vector<Batch> make_batches(const Dataset& train, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch);

std::string metrics_csv(const std::vector<MetricsRow>& rows);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch, Phase phase)
      : std::runtime_error(what), epoch_(epoch), phase_(phase) {}
  std::size_t epoch() const { return epoch_; }
  Phase phase() const { return phase_; }

 private:
  std::size_t epoch_;
  Phase phase_;
};

struct TrainData {
  const Dataset* train = nullptr;
  const Dataset* dev = nullptr;
  const Dataset* semi = nullptr;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::map<std::string, std::vector<double>> best_params;
  std::size_t best_epoch = 0;
  double best_dev_ler = 0.0;
};

// Phase A (lambda forced to 0), Phase B (speaker group only), Phase C (joint,
// lambda scheduled over Phase C epochs). Baseline applies Phase A's rule
// throughout and never trains the speaker term. Throws DivergenceError when
// the acoustic loss exceeds the threshold or turns non-finite.
TrainResult train(ModelGraph& m, const TrainData& data, const TrainConfig& cfg);

}  // namespace gradflip
