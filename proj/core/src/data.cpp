#include "gradflip/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "gradflip/error.hpp"
#include "gradflip/rng.hpp"
#include "gradflip/text_io.hpp"

namespace gradflip {

bool operator==(const Utterance& a, const Utterance& b) {
  return a.id == b.id && a.speaker == b.speaker && a.transcript == b.transcript &&
         a.features.shape() == b.features.shape() &&
         std::equal(a.features.data().begin(), a.features.data().end(), b.features.data().begin());
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.vocab == b.vocab && a.separator == b.separator && a.speakers == b.speakers &&
         a.dim == b.dim && a.utterances == b.utterances;
}

void Dataset::validate() const {
  if (separator >= vocab.size()) throw ValueError("dataset: separator index outside vocabulary");
  for (const auto& u : utterances) {
    if (u.speaker >= speakers.size()) {
      throw ValueError(fmt::format("dataset: utterance {} has speaker {} of {}", u.id, u.speaker,
                                   speakers.size()));
    }
    if (u.features.dim() != 2 || u.features.shape()[1] != dim) {
      throw ValueError(fmt::format("dataset: utterance {} features {} are not [T, {}]", u.id,
                                   shape_str(u.features.shape()), dim));
    }
    if (u.transcript) asg::validate_target(*u.transcript, u.frames(), vocab.size());
  }
}

void GenConfig::validate() const {
  if (n_speakers == 0) throw ValueError("gen.n_speakers must be positive");
  if (utterances_per_speaker == 0) throw ValueError("gen.utterances_per_speaker must be positive");
  if (alphabet_size < 2) throw ValueError("gen.alphabet_size must be at least 2");
  if (dim == 0) throw ValueError("gen.dim must be positive");
  if (frames_min == 0 || frames_max < frames_min) throw ValueError("gen.frames range is invalid");
  if (words_min == 0 || words_max < words_min) throw ValueError("gen.words range is invalid");
  if (letters_min == 0 || letters_max < letters_min) throw ValueError("gen.letters range is invalid");
  if (!(noise_sigma >= 0.0)) throw ValueError("gen.noise_sigma must be >= 0");
  if (!(offset_sigma >= 0.0) || !(gain_sigma >= 0.0)) throw ValueError("gen speaker spreads must be >= 0");
  if (!(prototype_scale > 0.0)) throw ValueError("gen.prototype_scale must be positive");
  if (semi_speakers > 0 && semi_utterances_per_speaker == 0) {
    throw ValueError("gen.semi_utterances_per_speaker must be positive when semi speakers are requested");
  }
}

std::vector<std::vector<double>> token_prototypes(const GenConfig& cfg) {
  const std::size_t K = cfg.alphabet_size + 1;
  if (K > cfg.dim) {
    throw ValueError(fmt::format("gen: {} tokens need at least {} dimensions for distinct prototypes, got {}",
                                 K, K, cfg.dim));
  }
  RngStream rng(cfg.seed, "gen/prototypes");
  std::vector<std::vector<double>> protos;
  while (protos.size() < K) {
    std::vector<double> v(cfg.dim);
    for (double& e : v) e = rng.normal();
    // Gram-Schmidt against the accepted prototypes.
    for (const auto& p : protos) {
      double dot = 0.0;
      for (std::size_t i = 0; i < cfg.dim; ++i) dot += v[i] * p[i];
      for (std::size_t i = 0; i < cfg.dim; ++i) v[i] -= dot * p[i];
    }
    double norm = 0.0;
    for (double e : v) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& e : v) e /= norm;
    protos.push_back(std::move(v));
  }
  for (auto& p : protos)
    for (double& e : p) e *= cfg.prototype_scale;
  return protos;
}

std::vector<SpeakerProfile> speaker_profiles(const GenConfig& cfg) {
  const std::size_t total = cfg.n_speakers + cfg.semi_speakers;
  std::vector<SpeakerProfile> out;
  out.reserve(total);
  for (std::size_t s = 0; s < total; ++s) {
    RngStream rng(cfg.seed, fmt::format("gen/speaker/{}", s));
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100) throw ValueError("gen: cannot draw distinct speaker offsets (offset_sigma too small)");
      SpeakerProfile p{std::vector<double>(cfg.dim), std::vector<double>(cfg.dim)};
      for (double& e : p.offset) e = cfg.offset_sigma * rng.normal();
      for (double& e : p.gain) e = std::exp(cfg.gain_sigma * rng.normal());
      const bool collides = std::any_of(out.begin(), out.end(), [&](const SpeakerProfile& q) {
        return q.offset == p.offset;
      });
      if (!collides) {
        out.push_back(std::move(p));
        break;
      }
    }
  }
  return out;
}

namespace {

asg::TokenSeq draw_transcript(const GenConfig& cfg, RngStream& rng) {
  const int sep = static_cast<int>(cfg.alphabet_size);
  const auto words = rng.uniform_int(static_cast<std::int64_t>(cfg.words_min),
                                     static_cast<std::int64_t>(cfg.words_max));
  asg::TokenSeq out;
  for (std::int64_t w = 0; w < words; ++w) {
    if (w > 0) out.push_back(sep);
    const auto letters = rng.uniform_int(static_cast<std::int64_t>(cfg.letters_min),
                                         static_cast<std::int64_t>(cfg.letters_max));
    for (std::int64_t l = 0; l < letters; ++l) {
      int tok;
      do {
        tok = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.alphabet_size) - 1));
      } while (!out.empty() && out.back() == tok);
      out.push_back(tok);
    }
  }
  return out;
}

Utterance draw_utterance(const GenConfig& cfg, const std::vector<std::vector<double>>& protos,
                         const SpeakerProfile& spk, std::size_t speaker, std::size_t index,
                         bool transcribed) {
  Utterance u;
  u.id = fmt::format("s{:03d}u{:04d}", speaker, index);
  u.speaker = speaker;
  RngStream rng(cfg.seed, "gen/utt/" + u.id);
  asg::TokenSeq tokens = draw_transcript(cfg, rng);
  std::vector<double> frames;
  for (int tok : tokens) {
    const auto reps = rng.uniform_int(static_cast<std::int64_t>(cfg.frames_min),
                                      static_cast<std::int64_t>(cfg.frames_max));
    const auto& proto = protos[static_cast<std::size_t>(tok)];
    for (std::int64_t r = 0; r < reps; ++r)
      for (std::size_t i = 0; i < cfg.dim; ++i)
        frames.push_back(proto[i] * spk.gain[i] + spk.offset[i] + cfg.noise_sigma * rng.normal());
  }
  const std::size_t T = frames.size() / cfg.dim;
  u.features = Tensor::from({T, cfg.dim}, std::move(frames));
  if (transcribed) u.transcript = std::move(tokens);
  return u;
}

std::vector<std::string> vocab_for(std::size_t alphabet) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < alphabet; ++i) {
    v.push_back(i < 26 ? std::string(1, static_cast<char>('a' + i)) : fmt::format("t{}", i));
  }
  v.push_back("|");
  return v;
}

// Keeps the speakers that occur, in label order, renumbered from zero.
Dataset relabel_dense(Dataset ds) {
  std::vector<bool> used(ds.speakers.size(), false);
  for (const auto& u : ds.utterances) used[u.speaker] = true;
  std::vector<std::size_t> remap(ds.speakers.size(), 0);
  std::vector<std::string> names;
  for (std::size_t s = 0; s < used.size(); ++s) {
    if (!used[s]) continue;
    remap[s] = names.size();
    names.push_back(ds.speakers[s]);
  }
  for (auto& u : ds.utterances) u.speaker = remap[u.speaker];
  ds.speakers = std::move(names);
  return ds;
}

Dataset with_utterances(const Dataset& like, std::vector<Utterance> utts) {
  Dataset out;
  out.vocab = like.vocab;
  out.separator = like.separator;
  out.speakers = like.speakers;
  out.dim = like.dim;
  out.utterances = std::move(utts);
  return out;
}

}  // namespace

Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  const auto protos = token_prototypes(cfg);
  const auto profiles = speaker_profiles(cfg);

  const std::size_t total = profiles.size();
  if (total >= 2) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < total; ++a)
      for (std::size_t b = a + 1; b < total; ++b) {
        double sq = 0.0;
        for (std::size_t i = 0; i < cfg.dim; ++i) {
          const double d = profiles[a].offset[i] - profiles[b].offset[i];
          sq += d * d;
        }
        sum += std::sqrt(sq);
        ++pairs;
      }
    const double mean = sum / static_cast<double>(pairs);
    if (!(mean > 4.0 * cfg.noise_sigma)) {
      throw ValueError(fmt::format(
          "gen: mean inter-speaker offset distance {:.4f} does not exceed 4x noise_sigma ({:.4f})", mean,
          4.0 * cfg.noise_sigma));
    }
  }

  Dataset ds;
  ds.vocab = vocab_for(cfg.alphabet_size);
  ds.separator = cfg.alphabet_size;
  ds.dim = cfg.dim;
  for (std::size_t s = 0; s < total; ++s) ds.speakers.push_back(fmt::format("spk{:03d}", s));
  for (std::size_t s = 0; s < total; ++s) {
    const bool transcribed = s < cfg.n_speakers;
    const std::size_t count = transcribed ? cfg.utterances_per_speaker : cfg.semi_utterances_per_speaker;
    for (std::size_t i = 0; i < count; ++i) {
      ds.utterances.push_back(draw_utterance(cfg, protos, profiles[s], s, i, transcribed));
    }
  }
  return ds;
}

Splits split(const Dataset& ds, double train_frac, double dev_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0 && dev_frac > 0.0 && dev_frac < 1.0 &&
        train_frac + dev_frac < 1.0)) {
    throw ValueError(fmt::format("split: fractions {} / {} must lie in (0,1) and sum below 1", train_frac,
                                 dev_frac));
  }
  std::vector<std::vector<std::size_t>> by_speaker(ds.n_speakers());
  for (std::size_t i = 0; i < ds.size(); ++i) by_speaker[ds.utterances[i].speaker].push_back(i);

  std::vector<int> assignment(ds.size(), 2);
  RngStream rng(seed, "split");
  for (auto& idx : by_speaker) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(idx[i - 1], idx[j]);
    }
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * n + 1e-9));
    const auto n_dev = static_cast<std::size_t>(std::floor(dev_frac * n + 1e-9));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      assignment[idx[k]] = k < n_train ? 0 : (k < n_train + n_dev ? 1 : 2);
    }
  }
  std::vector<Utterance> parts[3];
  for (std::size_t i = 0; i < ds.size(); ++i) parts[assignment[i]].push_back(ds.utterances[i]);
  for (int p = 0; p < 3; ++p) {
    if (parts[p].empty()) {
      static const char* names[] = {"train", "dev", "test"};
      throw ValueError(std::string("split: ") + names[p] + " split would be empty");
    }
  }
  return {with_utterances(ds, std::move(parts[0])), with_utterances(ds, std::move(parts[1])),
          with_utterances(ds, std::move(parts[2]))};
}

Dataset select_subset(const Dataset& ds, std::size_t n_speakers, std::size_t utts_per_speaker) {
  if (n_speakers == 0 || n_speakers > ds.n_speakers()) {
    throw ValueError(fmt::format("select_subset: {} speakers requested, dataset has {}", n_speakers,
                                 ds.n_speakers()));
  }
  std::vector<std::size_t> taken(n_speakers, 0);
  std::vector<Utterance> keep;
  for (const auto& u : ds.utterances) {
    if (u.speaker >= n_speakers || taken[u.speaker] >= utts_per_speaker) continue;
    ++taken[u.speaker];
    keep.push_back(u);
  }
  for (std::size_t s = 0; s < n_speakers; ++s) {
    if (taken[s] < utts_per_speaker) {
      throw ValueError(fmt::format("select_subset: speaker {} has {} utterances, {} requested", s, taken[s],
                                   utts_per_speaker));
    }
  }
  Dataset out = with_utterances(ds, std::move(keep));
  out.speakers.resize(n_speakers);
  return relabel_dense(std::move(out));
}

SemiPartition partition_semi(const Dataset& ds) {
  std::vector<Utterance> with, without;
  for (const auto& u : ds.utterances) (u.transcript ? with : without).push_back(u);
  return {relabel_dense(with_utterances(ds, std::move(with))),
          relabel_dense(with_utterances(ds, std::move(without)))};
}

namespace {

constexpr const char* kDatasetFormat = "gradflip-dataset";
constexpr int kDatasetVersion = 1;

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace

std::string dataset_to_string(const Dataset& ds) {
  std::string out;
  {
    nlohmann::json header{{"format", kDatasetFormat}, {"version", kDatasetVersion}, {"vocab", ds.vocab},
                          {"separator", ds.separator}, {"speakers", ds.speakers}, {"dim", ds.dim},
                          {"utterances", ds.size()}};
    out += header.dump();
    out += '\n';
  }
  for (const auto& u : ds.utterances) {
    out += "{\"id\":" + json_string(u.id) + ",\"speaker\":" + std::to_string(u.speaker) + ",\"transcript\":";
    if (u.transcript) {
      out += '[';
      for (std::size_t i = 0; i < u.transcript->size(); ++i) {
        if (i) out += ',';
        out += std::to_string((*u.transcript)[i]);
      }
      out += ']';
    } else {
      out += "null";
    }
    out += ",\"frames\":[";
    const std::size_t T = u.frames(), d = u.features.shape()[1];
    auto v = u.features.data();
    for (std::size_t t = 0; t < T; ++t) {
      if (t) out += ',';
      out += '[';
      for (std::size_t i = 0; i < d; ++i) {
        if (i) out += ',';
        out += format_real(v[t * d + i]);
      }
      out += ']';
    }
    out += "]}\n";
  }
  return out;
}

Dataset dataset_from_string(const std::string& text) {
  using nlohmann::json;
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError("dataset: missing header", 1);
  Dataset ds;
  std::size_t expected = 0;
  try {
    const json header = json::parse(lines[0]);
    if (header.at("format").get<std::string>() != kDatasetFormat) throw ParseError("dataset: bad format tag", 1);
    if (header.at("version").get<int>() != kDatasetVersion) throw ParseError("dataset: unsupported version", 1);
    ds.vocab = header.at("vocab").get<std::vector<std::string>>();
    ds.separator = header.at("separator").get<std::size_t>();
    ds.speakers = header.at("speakers").get<std::vector<std::string>>();
    ds.dim = header.at("dim").get<std::size_t>();
    expected = header.at("utterances").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset header: ") + e.what(), 1);
  }
  if (ds.dim == 0) throw ParseError("dataset: dim must be positive", 1);
  if (ds.separator >= ds.vocab.size()) throw ParseError("dataset: separator outside vocabulary", 1);

  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const std::size_t line_no = ln + 1;
    try {
      const json rec = json::parse(lines[ln]);
      Utterance u;
      u.id = rec.at("id").get<std::string>();
      u.speaker = rec.at("speaker").get<std::size_t>();
      if (u.speaker >= ds.speakers.size()) throw ParseError("speaker label out of range", line_no);
      const json& tr = rec.at("transcript");
      if (!tr.is_null()) u.transcript = tr.get<asg::TokenSeq>();
      const json& frames = rec.at("frames");
      if (!frames.is_array() || frames.empty()) throw ParseError("utterance has no frames", line_no);
      std::vector<double> values;
      values.reserve(frames.size() * ds.dim);
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const json& row = frames[t];
        if (!row.is_array() || row.size() != ds.dim) {
          throw ParseError(fmt::format("frame {} has arity {}, expected {}", t,
                                       row.is_array() ? row.size() : 0, ds.dim),
                           line_no);
        }
        for (const json& v : row) values.push_back(v.get<double>());
      }
      u.features = Tensor::from({frames.size(), ds.dim}, std::move(values));
      if (u.transcript) {
        try {
          asg::validate_target(*u.transcript, u.frames(), ds.vocab.size());
        } catch (const ValueError& e) {
          throw ParseError(e.what(), line_no);
        }
      }
      ds.utterances.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (ds.utterances.size() != expected) {
    throw ParseError(fmt::format("dataset: header announces {} utterances, found {}", expected,
                                 ds.utterances.size()));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) { write_text_file(path, dataset_to_string(ds)); }

Dataset load_dataset(const std::string& path) { return dataset_from_string(read_text_file(path)); }

}  // namespace gradflip
