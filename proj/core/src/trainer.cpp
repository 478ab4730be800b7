#include "gradflip/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "gradflip/analysis.hpp"
#include "gradflip/error.hpp"
#include "gradflip/layers.hpp"
#include "gradflip/ops.hpp"
#include "gradflip/rng.hpp"

namespace gradflip {

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::mt: return "mt";
    case TrainMode::al: return "al";
    case TrainMode::semi: return "semi";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view s) {
  if (s == "baseline") return TrainMode::baseline;
  if (s == "mt") return TrainMode::mt;
  if (s == "al") return TrainMode::al;
  if (s == "semi") return TrainMode::semi;
  throw ValueError("unknown mode '" + std::string(s) + "' (expected baseline, mt, al or semi)");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::a: return "A";
    case Phase::b: return "B";
    case Phase::c: return "C";
  }
  return "?";
}

std::string_view to_string(LossNorm n) { return n == LossNorm::frames ? "frames" : "none"; }

LossNorm parse_loss_norm(std::string_view s) {
  if (s == "frames") return LossNorm::frames;
  if (s == "none") return LossNorm::none;
  throw ValueError("unknown loss norm '" + std::string(s) + "' (expected frames or none)");
}

LambdaSchedule LambdaSchedule::for_mode(TrainMode m) {
  switch (m) {
    case TrainMode::mt: return constant_at(0.5);
    case TrainMode::al:
    case TrainMode::semi: return ramp_to(0.2);
    case TrainMode::baseline: break;
  }
  return constant_at(0.0);
}

double lambda_at(const LambdaSchedule& s, std::size_t epoch, std::size_t total_epochs) {
  if (epoch > total_epochs) {
    throw ValueError(fmt::format("lambda_at: epoch {} beyond total {}", epoch, total_epochs));
  }
  if (s.kind == LambdaKind::constant) return s.value;
  if (epoch == 0) return 0.0;
  const double p = s.gamma * static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return s.lambda_max * (2.0 / (1.0 + std::exp(-p)) - 1.0);
}

double fork_sign(TrainMode m) {
  switch (m) {
    case TrainMode::mt: return 1.0;
    case TrainMode::al:
    case TrainMode::semi: return -1.0;
    case TrainMode::baseline: break;
  }
  return 0.0;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ValueError("train.batch_size must be positive");
  if (!(lr.main >= 0.0) || !(lr.speaker >= 0.0)) throw ValueError("learning rates must be non-negative");
  if (total_epochs() == 0) throw ValueError("train: no epochs configured");
  if (semi_mix_ratio && *semi_mix_ratio == 0) {
    throw ValueError("train.semi_mix_ratio must be positive: semi mode needs speaker-only batches");
  }
  if (lambda.kind == LambdaKind::ramp && !(lambda.lambda_max >= 0.0 && lambda.gamma > 0.0)) {
    throw ValueError("train: ramp needs lambda_max >= 0 and gamma > 0");
  }
  if (!(divergence_threshold > 0.0)) throw ValueError("train.divergence_threshold must be positive");
}

namespace {

using Accumulator = std::map<std::string, std::vector<double>>;

void accumulate(Accumulator& acc, const GradMap& g) {
  for (const auto& [name, t] : g) {
    auto& dst = acc[name];
    auto src = t.data();
    if (dst.empty()) {
      dst.assign(src.begin(), src.end());
    } else {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<Batch> chunk(const Dataset& ds, const std::vector<std::size_t>& order, std::size_t batch_size,
                         std::size_t label_offset, bool speaker_only) {
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    b.speaker_only = speaker_only;
    for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
      const Utterance& u = ds.utterances[order[k]];
      b.items.push_back({&u, u.speaker + label_offset});
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

BatchGradients batch_gradients(const ModelGraph& m, const Batch& batch, double factor,
                               const RngStream* dropout_rng, TermMask terms) {
  if (batch.items.empty()) throw ValueError("batch_gradients: empty batch");
  if (batch.speaker_only) terms.acoustic = false;
  Accumulator acc;
  BatchGradients out;
  const Mode mode = dropout_rng ? Mode::train : Mode::eval;
  for (std::size_t k = 0; k < batch.items.size(); ++k) {
    const BatchItem& item = batch.items[k];
    const Utterance& u = *item.utt;
    std::optional<RngStream> rng;
    if (dropout_rng) rng = dropout_rng->fork(std::to_string(k));
    const RngStream* r = rng ? &*rng : nullptr;

    const double norm = terms.norm == LossNorm::frames ? 1.0 / static_cast<double>(u.frames()) : 1.0;
    Tensor total;
    if (terms.acoustic) {
      if (!u.transcript) throw ValueError("batch_gradients: utterance " + u.id + " has no transcript");
      if (terms.speaker) {
        JointOutput j = m.forward_joint(u.features, factor, mode, r);
        const Tensor ac = asg::asg_loss(j.emissions, m.transitions(), *u.transcript);
        const Tensor spk = layers::nll(j.speaker_logits, item.speaker);
        out.acoustic_loss += ac.item();
        out.speaker_loss += spk.item();
        total = ops::add(ac, spk);
      } else {
        total = asg::asg_loss(m.forward_acoustic(u.features, mode, r), m.transitions(), *u.transcript);
        out.acoustic_loss += total.item();
      }
    } else if (terms.speaker) {
      total = layers::nll(m.forward_speaker(u.features, factor, mode, r), item.speaker);
      out.speaker_loss += total.item();
    } else {
      throw ValueError("batch_gradients: both loss terms disabled");
    }
    if (norm != 1.0) total = ops::scale(total, norm);
    accumulate(acc, backward(total, m.params()));
  }
  const double inv = 1.0 / static_cast<double>(batch.items.size());
  for (auto& [name, v] : acc) {
    for (double& e : v) e *= inv;
    out.grads.emplace(name, Tensor::from(m.params().get(name).shape(), std::move(v)));
  }
  out.acoustic_loss *= inv;
  out.speaker_loss *= inv;
  return out;
}

StepResult step(ModelGraph& m, const Batch& batch, TrainMode mode, double lambda, const StepOptions& opt) {
  if (batch.speaker_only && mode != TrainMode::semi) {
    throw ValueError("step: speaker-only batch outside semi mode");
  }
  TermMask terms;
  if (mode == TrainMode::baseline) terms.speaker = false;
  terms.norm = opt.loss_norm;
  const double factor = opt.factor.value_or(fork_sign(mode) * lambda);
  BatchGradients g = batch_gradients(m, batch, factor, opt.dropout_rng, terms);
  sgd_step(m.params(), g.grads, opt.lr, opt.update);
  return {g.acoustic_loss, g.speaker_loss};
}

std::vector<Batch> make_batches(const Dataset& train, std::size_t batch_size, std::uint64_t seed,
                                std::size_t epoch) {
  if (batch_size == 0) throw ValueError("make_batches: batch size must be positive");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng(seed, fmt::format("shuffle/train/{}", epoch));
  shuffle_indices(order, rng);
  return chunk(train, order, batch_size, 0, false);
}

std::size_t default_semi_ratio(const Dataset& train, const Dataset& semi) {
  if (semi.size() == 0) throw ValueError("semi mode needs a non-empty semi set");
  const double r = static_cast<double>(train.size()) / static_cast<double>(semi.size());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(r)));
}

std::vector<Batch> make_semi_batches(const Dataset& train, const Dataset& semi, std::size_t ratio,
                                     std::size_t batch_size, std::uint64_t seed, std::size_t epoch) {
  if (semi.size() == 0) throw ValueError("make_semi_batches: empty semi set");
  if (ratio == 0) throw ValueError("make_semi_batches: ratio must be positive in semi mode");
  for (const auto& u : semi.utterances) {
    if (u.transcript) throw ValueError("make_semi_batches: semi utterance " + u.id + " carries a transcript");
  }
  const std::vector<Batch> transcribed = make_batches(train, batch_size, seed, epoch);

  std::vector<std::size_t> order(semi.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng(seed, fmt::format("shuffle/semi/{}", epoch));
  shuffle_indices(order, rng);
  const std::vector<Batch> speaker_only = chunk(semi, order, batch_size, train.n_speakers(), true);

  std::vector<Batch> out;
  std::size_t next_semi = 0;
  for (std::size_t i = 0; i < transcribed.size(); ++i) {
    out.push_back(transcribed[i]);
    if ((i + 1) % ratio == 0) {
      out.push_back(speaker_only[next_semi % speaker_only.size()]);
      ++next_semi;
    }
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "epoch,phase,train_acoustic_loss,train_speaker_loss,dev_ler,dev_speaker_accuracy,lambda,"
      "wall_clock_seconds\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.3f}\n", r.epoch, to_string(r.phase),
                       r.train_acoustic_loss, r.train_speaker_loss, r.dev_ler, r.dev_speaker_accuracy,
                       r.lambda, r.wall_clock_seconds);
  }
  return out;
}

TrainResult train(ModelGraph& m, const TrainData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train == nullptr || data.dev == nullptr) throw ValueError("train: train and dev splits are required");
  const bool semi = cfg.mode == TrainMode::semi;
  const bool baseline = cfg.mode == TrainMode::baseline;
  std::size_t ratio = 0;
  if (semi) {
    if (data.semi == nullptr || data.semi->size() == 0) throw ValueError("train: semi mode needs a semi set");
    ratio = cfg.semi_mix_ratio.value_or(default_semi_ratio(*data.train, *data.semi));
    const std::size_t union_size = data.train->n_speakers() + data.semi->n_speakers();
    if (m.config().n_speakers != union_size) {
      throw ValueError(fmt::format("train: semi mode needs {} speaker outputs (train + semi), model has {}",
                                   union_size, m.config().n_speakers));
    }
  } else if (m.config().n_speakers < data.train->n_speakers()) {
    throw ValueError("train: model has fewer speaker outputs than the training set");
  }

  TrainResult result;
  result.best_dev_ler = std::numeric_limits<double>::infinity();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t total = cfg.total_epochs();
  for (std::size_t epoch = 0; epoch < total; ++epoch) {
    Phase phase = Phase::a;
    if (!baseline && epoch >= cfg.epochs_a) phase = epoch < cfg.epochs_a + cfg.epochs_b ? Phase::b : Phase::c;

    // Ramp progress spans Phase C only; its last epoch sits at p = gamma.
    double lambda = 0.0;
    if (phase == Phase::c) {
      lambda = lambda_at(cfg.lambda, epoch - cfg.epochs_a - cfg.epochs_b + 1, cfg.epochs_c);
    }

    const std::vector<Batch> batches =
        semi ? make_semi_batches(*data.train, *data.semi, ratio, cfg.batch_size, cfg.seed, epoch)
             : make_batches(*data.train, cfg.batch_size, cfg.seed, epoch);

    StepOptions opt;
    opt.lr = cfg.lr;
    opt.loss_norm = cfg.loss_norm;
    if (phase == Phase::b) opt.update = GroupMask{false, true};
    if (phase != Phase::c) opt.factor = 0.0;

    double acoustic_sum = 0.0, speaker_sum = 0.0;
    std::size_t acoustic_n = 0, speaker_n = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const RngStream drop(cfg.seed, fmt::format("dropout/{}/{}", epoch, bi));
      opt.dropout_rng = &drop;
      StepResult r;
      try {
        r = step(m, batches[bi], cfg.mode, lambda, opt);
      } catch (const NumericError& e) {
        throw DivergenceError(fmt::format("diverged in epoch {} phase {}: {}", epoch, to_string(phase), e.what()),
                              epoch, phase);
      }
      const bool has_acoustic = !batches[bi].speaker_only;
      if (has_acoustic) {
        if (!std::isfinite(r.acoustic_loss) || r.acoustic_loss > cfg.divergence_threshold) {
          throw DivergenceError(fmt::format("diverged in epoch {} phase {}: acoustic loss {}", epoch,
                                            to_string(phase), r.acoustic_loss),
                                epoch, phase);
        }
        acoustic_sum += r.acoustic_loss * static_cast<double>(batches[bi].items.size());
        acoustic_n += batches[bi].items.size();
      }
      if (!baseline) {
        speaker_sum += r.speaker_loss * static_cast<double>(batches[bi].items.size());
        speaker_n += batches[bi].items.size();
      }
    }

    MetricsRow row;
    row.epoch = epoch;
    row.phase = phase;
    row.train_acoustic_loss = acoustic_n ? acoustic_sum / static_cast<double>(acoustic_n) : 0.0;
    row.train_speaker_loss = speaker_n ? speaker_sum / static_cast<double>(speaker_n) : 0.0;
    row.dev_ler = evaluate_ler(m, *data.dev).value;
    row.dev_speaker_accuracy = speaker_accuracy(m, *data.dev);
    row.lambda = lambda;
    if (cfg.record_time) {
      row.wall_clock_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.metrics.push_back(row);
    if (cfg.on_epoch) cfg.on_epoch(row);
    if (row.dev_ler < result.best_dev_ler) {
      result.best_dev_ler = row.dev_ler;
      result.best_epoch = epoch;
      result.best_params = m.params().snapshot();
    }
  }
  return result;
}

}  // namespace gradflip
