#include "gradflip_cli/config.hpp"

#include <charconv>
#include <cstdlib>

#include <fmt/format.h>

#include "gradflip/error.hpp"
#include "gradflip/text_io.hpp"

namespace gradflip::cli {
namespace {

std::string num(double v) { return fmt::format("{}", v); }
std::string num(std::size_t v) { return std::to_string(v); }

const char* const kModelKeys[] = {
    "model.n_layers",     "model.channels",  "model.kernel_width", "model.fork_in",
    "model.fork_mid",     "model.fork_out",  "model.dropout_rate", "model.pooling",
    "model.tau",          "model.branch_channels", "model.branch_kernel",
};

std::map<std::string, std::string> preset_values(const std::string& preset) {
  ModelConfig m;
  if (preset == "toy") {
    m = ModelConfig::toy();
  } else if (preset == "paper") {
    m = ModelConfig::paper();
  } else {
    throw ValueError("model.preset: unknown preset '" + preset + "' (expected toy or paper)");
  }
  return {
      {"model.n_layers", num(m.n_layers)},
      {"model.channels", num(m.channels)},
      {"model.kernel_width", num(m.kernel_width)},
      {"model.fork_in", num(m.forks.in)},
      {"model.fork_mid", num(m.forks.mid)},
      {"model.fork_out", num(m.forks.out)},
      {"model.dropout_rate", num(m.dropout_rate)},
      {"model.pooling", std::string(to_string(m.pooling.kind))},
      {"model.tau", num(m.pooling.tau)},
      {"model.branch_channels", num(m.branch_channels)},
      {"model.branch_kernel", num(m.branch_kernel)},
  };
}

std::vector<KeySpec> build_keys() {
  const GenConfig g;
  const TrainConfig t;
  const ProbeConfig p;
  std::vector<KeySpec> keys = {
      {"seed", "1", "seed for generation, splits, initialization, training and probing"},
      {"out", "out", "output directory"},
      {"data.dir", "", "dataset directory (defaults to out)"},
      {"data.name", "toy", "dataset base name: <name>.train/.dev/.test/.semi"},
      {"data.train_frac", num(0.8), "share of each speaker's utterances used for training"},
      {"data.dev_frac", num(0.1), "share of each speaker's utterances used for dev"},
      {"gen.n_speakers", num(g.n_speakers), "transcribed speakers"},
      {"gen.utterances_per_speaker", num(g.utterances_per_speaker), "utterances per transcribed speaker"},
      {"gen.alphabet_size", num(g.alphabet_size), "letters, excluding the word separator"},
      {"gen.dim", num(g.dim), "feature dimension"},
      {"gen.frames_min", num(g.frames_min), "minimum frames per token"},
      {"gen.frames_max", num(g.frames_max), "maximum frames per token"},
      {"gen.words_min", num(g.words_min), "minimum words per utterance"},
      {"gen.words_max", num(g.words_max), "maximum words per utterance"},
      {"gen.letters_min", num(g.letters_min), "minimum letters per word"},
      {"gen.letters_max", num(g.letters_max), "maximum letters per word"},
      {"gen.prototype_scale", num(g.prototype_scale), "norm of each token prototype"},
      {"gen.noise_sigma", num(g.noise_sigma), "per-frame Gaussian noise"},
      {"gen.offset_sigma", num(g.offset_sigma), "spread of speaker offsets"},
      {"gen.gain_sigma", num(g.gain_sigma), "spread of log speaker gains"},
      {"gen.semi_speakers", num(g.semi_speakers), "extra speakers without transcripts"},
      {"gen.semi_utterances_per_speaker", num(g.semi_utterances_per_speaker), "utterances per semi speaker"},
      {"model.preset", "toy", "architecture preset: toy or paper"},
      {"train.mode", "baseline", "baseline, mt, al or semi"},
      {"train.fork", "", "in, mid or out (not for baseline)"},
      {"train.lr_main", num(t.lr.main), "learning rate of encoder, decoder and transitions"},
      {"train.lr_speaker", num(t.lr.speaker), "learning rate of the speaker branch"},
      {"train.batch_size", num(t.batch_size), "utterances per batch"},
      {"train.epochs_a", num(t.epochs_a), "epochs without speaker gradient into the encoder"},
      {"train.epochs_b", num(t.epochs_b), "epochs training only the speaker branch"},
      {"train.epochs_c", num(t.epochs_c), "joint epochs"},
      {"train.lambda_kind", "auto", "static, ramp, or auto (static for mt, ramp for al and semi)"},
      {"train.lambda_value", num(0.5), "static lambda"},
      {"train.lambda_max", num(t.lambda.lambda_max), "ramp ceiling"},
      {"train.gamma", num(t.lambda.gamma), "ramp steepness"},
      {"train.semi_mix_ratio", "auto", "transcribed batches per speaker-only batch, or auto"},
      {"train.loss_norm", std::string(to_string(t.loss_norm)), "frames or none"},
      {"train.record_time", "false", "fill the wall_clock_seconds column"},
      {"train.divergence_threshold", num(t.divergence_threshold), "abort above this acoustic loss"},
      {"probe.epochs", num(p.epochs), "probe training epochs"},
      {"probe.lr", num(p.lr), "probe learning rate"},
      {"probe.batch_size", num(p.batch_size), "probe batch size"},
      {"probe.dropout_rate", num(p.dropout_rate), "probe dropout"},
      {"probe.train_frac", num(p.train_frac), "share of the dump used to fit the probe"},
      {"probe.standardize", p.standardize ? "true" : "false", "z-score probe inputs per channel"},
      {"probe.split", "train", "dataset split dumped when --data is not given"},
  };
  for (const char* k : kModelKeys) keys.push_back({k, "", "architecture override (defaults to the preset)"});
  return keys;
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = build_keys();
  return keys;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  if (const char* env = std::getenv("GRADFLIP_SEED"); env != nullptr && *env != '\0') {
    values_["seed"] = env;
    get_u64("seed");
  }
  resolve();
}

void ExperimentConfig::merge_file(const std::string& path) { merge_text(read_text_file(path)); }

void ExperimentConfig::merge_text(const std::string& text) {
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("config: expected 'key = value'", i + 1);
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (values_.count(key) == 0) throw ParseError("config: unknown key '" + key + "'", i + 1);
    set(key, value);
  }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (values_.count(key) == 0) throw ValueError("config: unknown key '" + key + "'");
  values_[key] = value;
  explicit_.insert(key);
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValueError("config: unknown key '" + key + "'");
  return it->second;
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ValueError(fmt::format("config: {} = '{}' is not a non-negative integer", key, s));
  }
  return v;
}

std::size_t ExperimentConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

double ExperimentConfig::get_real(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ValueError(fmt::format("config: {} = '{}' is not a number", key, s));
  }
  return v;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ValueError(fmt::format("config: {} = '{}' is not a boolean", key, s));
}

void ExperimentConfig::resolve() {
  const auto preset = preset_values(get("model.preset"));
  for (const auto& [k, v] : preset) {
    if (!is_set(k)) values_[k] = v;
  }
  if (!is_set("data.dir")) values_["data.dir"] = get("out");
  if (!is_set("train.lambda_kind") || get("train.lambda_kind") == "auto") {
    const TrainMode mode = parse_train_mode(get("train.mode"));
    values_["train.lambda_kind"] =
        (mode == TrainMode::al || mode == TrainMode::semi) ? "ramp" : "static";
  }
}

std::string ExperimentConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

GenConfig gen_config(const ExperimentConfig& c) {
  GenConfig g;
  g.n_speakers = c.get_size("gen.n_speakers");
  g.utterances_per_speaker = c.get_size("gen.utterances_per_speaker");
  g.alphabet_size = c.get_size("gen.alphabet_size");
  g.dim = c.get_size("gen.dim");
  g.frames_min = c.get_size("gen.frames_min");
  g.frames_max = c.get_size("gen.frames_max");
  g.words_min = c.get_size("gen.words_min");
  g.words_max = c.get_size("gen.words_max");
  g.letters_min = c.get_size("gen.letters_min");
  g.letters_max = c.get_size("gen.letters_max");
  g.prototype_scale = c.get_real("gen.prototype_scale");
  g.noise_sigma = c.get_real("gen.noise_sigma");
  g.offset_sigma = c.get_real("gen.offset_sigma");
  g.gain_sigma = c.get_real("gen.gain_sigma");
  g.semi_speakers = c.get_size("gen.semi_speakers");
  g.semi_utterances_per_speaker = c.get_size("gen.semi_utterances_per_speaker");
  g.seed = c.get_u64("seed");
  g.validate();
  return g;
}

ModelConfig model_config(const ExperimentConfig& c) {
  ModelConfig m = c.get("model.preset") == "paper" ? ModelConfig::paper() : ModelConfig::toy();
  m.n_layers = c.get_size("model.n_layers");
  m.channels = c.get_size("model.channels");
  m.kernel_width = c.get_size("model.kernel_width");
  m.forks.in = c.get_size("model.fork_in");
  m.forks.mid = c.get_size("model.fork_mid");
  m.forks.out = c.get_size("model.fork_out");
  m.dropout_rate = c.get_real("model.dropout_rate");
  m.pooling.kind = parse_pool_kind(c.get("model.pooling"));
  m.pooling.tau = c.get_real("model.tau");
  m.branch_channels = c.get_size("model.branch_channels");
  m.branch_kernel = c.get_size("model.branch_kernel");
  return m;
}

TrainConfig train_config(const ExperimentConfig& c) {
  TrainConfig t;
  t.mode = parse_train_mode(c.get("train.mode"));
  t.lr.main = c.get_real("train.lr_main");
  t.lr.speaker = c.get_real("train.lr_speaker");
  t.batch_size = c.get_size("train.batch_size");
  t.epochs_a = c.get_size("train.epochs_a");
  t.epochs_b = c.get_size("train.epochs_b");
  t.epochs_c = c.get_size("train.epochs_c");
  const std::string& kind = c.get("train.lambda_kind");
  if (kind == "static") {
    t.lambda = LambdaSchedule::constant_at(c.get_real("train.lambda_value"));
  } else if (kind == "ramp") {
    t.lambda = LambdaSchedule::ramp_to(c.get_real("train.lambda_max"), c.get_real("train.gamma"));
  } else {
    throw ValueError("config: train.lambda_kind must be static, ramp or auto");
  }
  if (c.get("train.semi_mix_ratio") != "auto") t.semi_mix_ratio = c.get_size("train.semi_mix_ratio");
  t.loss_norm = parse_loss_norm(c.get("train.loss_norm"));
  t.record_time = c.get_bool("train.record_time");
  t.divergence_threshold = c.get_real("train.divergence_threshold");
  t.seed = c.get_u64("seed");
  t.validate();
  return t;
}

ProbeConfig probe_config(const ExperimentConfig& c) {
  ProbeConfig p;
  p.epochs = c.get_size("probe.epochs");
  p.lr = c.get_real("probe.lr");
  p.batch_size = c.get_size("probe.batch_size");
  p.dropout_rate = c.get_real("probe.dropout_rate");
  p.train_frac = c.get_real("probe.train_frac");
  p.standardize = c.get_bool("probe.standardize");
  p.seed = c.get_u64("seed");
  return p;
}

}  // namespace gradflip::cli
