#include "gradflip/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "gradflip/error.hpp"
#include "gradflip/layers.hpp"
#include "gradflip/rng.hpp"
#include "gradflip/text_io.hpp"

namespace gradflip {
namespace {

template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

ErrorRate finish(std::size_t errors, std::size_t ref_len, std::size_t n) {
  ErrorRate r;
  r.errors = errors;
  r.reference_length = ref_len;
  r.n_utts = n;
  r.value = static_cast<double>(errors) / static_cast<double>(std::max<std::size_t>(ref_len, 1));
  return r;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

std::size_t edit_distance(std::span<const int> a, std::span<const int> b) { return levenshtein(a, b); }

std::vector<asg::TokenSeq> split_words(std::span<const int> tokens, int separator) {
  std::vector<asg::TokenSeq> words;
  asg::TokenSeq cur;
  for (int t : tokens) {
    if (t == separator) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(t);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

ErrorRate letter_error_rate(const std::vector<asg::TokenSeq>& hyps, const std::vector<asg::TokenSeq>& refs) {
  if (hyps.size() != refs.size()) throw ValueError("letter_error_rate: hypothesis/reference count mismatch");
  std::size_t errors = 0, ref_len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    errors += edit_distance(hyps[i], refs[i]);
    ref_len += refs[i].size();
  }
  return finish(errors, ref_len, refs.size());
}

ErrorRate word_error_rate(const std::vector<asg::TokenSeq>& hyps, const std::vector<asg::TokenSeq>& refs,
                          int separator) {
  if (hyps.size() != refs.size()) throw ValueError("word_error_rate: hypothesis/reference count mismatch");
  std::size_t errors = 0, ref_len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto h = split_words(hyps[i], separator);
    const auto r = split_words(refs[i], separator);
    errors += levenshtein(h, r);
    ref_len += r.size();
  }
  return finish(errors, ref_len, refs.size());
}

asg::TokenSeq transcribe(const ModelGraph& m, const Tensor& features) {
  const Tensor em = m.forward_acoustic(features.detach(), Mode::eval);
  return asg::collapse(asg::viterbi_decode(em, m.transitions()));
}

TranscriptionScores evaluate_transcription(const ModelGraph& m, const Dataset& ds) {
  std::vector<asg::TokenSeq> hyps, refs;
  std::size_t skipped = 0;
  for (const auto& u : ds.utterances) {
    if (!u.transcript) {
      ++skipped;
      continue;
    }
    hyps.push_back(transcribe(m, u.features));
    refs.push_back(*u.transcript);
  }
  TranscriptionScores s{letter_error_rate(hyps, refs),
                        word_error_rate(hyps, refs, static_cast<int>(ds.separator))};
  s.ler.skipped = s.wer.skipped = skipped;
  return s;
}

ErrorRate evaluate_ler(const ModelGraph& m, const Dataset& ds) { return evaluate_transcription(m, ds).ler; }

ErrorRate evaluate_wer(const ModelGraph& m, const Dataset& ds) { return evaluate_transcription(m, ds).wer; }

double speaker_accuracy(const ModelGraph& m, const Dataset& ds, std::size_t label_offset) {
  if (ds.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (const auto& u : ds.utterances) {
    const Tensor logits = m.forward_speaker(u.features.detach(), 0.0, Mode::eval);
    if (argmax(logits.data()) == u.speaker + label_offset) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

RepDump dump_reps(const ModelGraph& m, const Dataset& ds, std::size_t layer) {
  if (ds.dim != m.config().input_dim) {
    throw ValueError(fmt::format("dump_reps: dataset dim {} does not match model input {}", ds.dim,
                                 m.config().input_dim));
  }
  if (layer > m.config().n_layers) {
    throw ValueError(fmt::format("dump_reps: layer {} outside [0, {}]", layer, m.config().n_layers));
  }
  RepDump dump;
  dump.layer = layer;
  dump.n_speakers = ds.n_speakers();
  dump.source = model_digest(m);
  dump.items.reserve(ds.size());
  for (const auto& u : ds.utterances) {
    dump.items.push_back({u.id, m.extract_representation(u.features, layer), u.speaker});
  }
  return dump;
}

ProbeResult train_probe(const RepDump& reps, const ProbeConfig& cfg) {
  if (reps.n_speakers < 2) throw ValueError("train_probe: need at least two speakers");
  if (reps.items.empty()) throw ValueError("train_probe: empty dump");
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0)) throw ValueError("train_probe: train_frac outside (0,1)");
  const std::size_t channels = reps.items.front().rep.shape().at(1);

  // Stratified split of the dump.
  std::vector<std::vector<std::size_t>> by_speaker(reps.n_speakers);
  for (std::size_t i = 0; i < reps.items.size(); ++i) {
    const auto& it = reps.items[i];
    if (it.speaker >= reps.n_speakers) throw ValueError("train_probe: speaker label out of range");
    if (it.rep.dim() != 2 || it.rep.shape()[1] != channels) {
      throw ShapeError("train_probe: representations have inconsistent shapes");
    }
    by_speaker[it.speaker].push_back(i);
  }
  RngStream split_rng(cfg.seed, "probe/split");
  std::vector<std::size_t> train_idx, eval_idx;
  for (auto& idx : by_speaker) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(split_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(idx[i - 1], idx[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_frac * static_cast<double>(idx.size()) + 1e-9));
    for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? train_idx : eval_idx).push_back(idx[k]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(eval_idx.begin(), eval_idx.end());
  if (eval_idx.empty() || train_idx.empty()) throw ValueError("train_probe: dump too small to split");

  std::vector<Tensor> inputs;
  inputs.reserve(reps.items.size());
  for (const auto& it : reps.items) inputs.push_back(it.rep.detach());
  if (cfg.standardize) {
    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    std::size_t frames = 0;
    for (std::size_t i : train_idx) {
      auto d = inputs[i].data();
      for (std::size_t k = 0; k < d.size(); ++k) mean[k % channels] += d[k];
      frames += inputs[i].shape()[0];
    }
    for (double& v : mean) v /= static_cast<double>(frames);
    for (std::size_t i : train_idx) {
      auto d = inputs[i].data();
      for (std::size_t k = 0; k < d.size(); ++k) {
        const double c = d[k] - mean[k % channels];
        var[k % channels] += c * c;
      }
    }
    for (Tensor& t : inputs) {
      std::vector<double> v = t.to_vector();
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double sd = std::sqrt(var[k % channels] / static_cast<double>(frames));
        v[k] = sd > 0.0 ? (v[k] - mean[k % channels]) / sd : 0.0;
      }
      t = Tensor::from(t.shape(), std::move(v));
    }
  }

  ParamStore store;
  SpeakerHead head(store, "probe", channels, cfg.channels, cfg.kernel_width, reps.n_speakers,
                   cfg.dropout_rate, cfg.pooling, ParamGroup::speaker, cfg.seed);
  const LearningRates lr{0.0, cfg.lr};
  const std::size_t batch = std::max<std::size_t>(cfg.batch_size, 1);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    RngStream shuffle(cfg.seed, fmt::format("probe/shuffle/{}", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::map<std::string, std::vector<double>> acc;
      for (std::size_t k = start; k < end; ++k) {
        const auto& item = reps.items[order[k]];
        const RngStream drop(cfg.seed, fmt::format("probe/dropout/{}/{}", epoch, k));
        const Tensor loss = layers::nll(head.forward(inputs[order[k]], Mode::train, &drop), item.speaker);
        const GradMap g = backward(loss, store);
        for (const auto& [name, t] : g) {
          auto& dst = acc[name];
          if (dst.empty()) dst.assign(t.numel(), 0.0);
          auto src = t.data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      }
      GradMap mean;
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, v] : acc) {
        for (double& e : v) e *= inv;
        mean.emplace(name, Tensor::from(store.get(name).shape(), std::move(v)));
      }
      sgd_step(store, mean, lr);
    }
  }

  std::size_t correct = 0;
  for (std::size_t i : eval_idx) {
    const Tensor logits = head.forward(inputs[i], Mode::eval, nullptr);
    if (argmax(logits.data()) == reps.items[i].speaker) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(eval_idx.size()), train_idx.size(),
          eval_idx.size()};
}

ProbeReport figure2_report(const std::vector<ProbeCell>& cells, const Dataset& ds, const ProbeConfig& cfg) {
  ProbeReport report;
  const double chance = 1.0 / static_cast<double>(std::max<std::size_t>(ds.n_speakers(), 1));
  std::size_t n_eval = 0;
  for (const auto& cell : cells) {
    ProbeRow row{cell.variant, cell.label.empty() ? std::to_string(cell.layer) : cell.label, std::nullopt,
                 chance, 0, cfg.seed};
    if (cell.model != nullptr && cell.error.empty()) {
      ProbeConfig c = cfg;
      c.channels = cell.model->config().branch_channels;
      c.kernel_width = cell.model->config().branch_kernel;
      c.pooling = cell.model->config().pooling;
      try {
        const ProbeResult r = train_probe(dump_reps(*cell.model, ds, cell.layer), c);
        row.accuracy = r.accuracy;
        row.n_eval = r.n_eval;
        n_eval = r.n_eval;
      } catch (const std::invalid_argument&) {
        row.accuracy.reset();
      }
    }
    report.rows.push_back(std::move(row));
  }
  report.rows.push_back({"chance", "all", chance, chance, n_eval, cfg.seed});
  return report;
}

std::string probe_report_csv(const ProbeReport& report) {
  std::string out = "variant,layer,accuracy,chance,n_eval,seed\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.variant, r.layer, r.accuracy ? format_real(*r.accuracy) : "",
                       format_real(r.chance), r.n_eval, r.seed);
  }
  return out;
}

std::string eval_report_csv(const std::vector<EvalRow>& rows) {
  std::string out = "split,metric,value,n_utts\n";
  for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", r.split, r.metric, format_real(r.value), r.n_utts);
  return out;
}

}  // namespace gradflip
