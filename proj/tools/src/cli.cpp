#include "gradflip_cli/cli.hpp"

#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gradflip/analysis.hpp"
#include "gradflip/data.hpp"
#include "gradflip/error.hpp"
#include "gradflip/model.hpp"
#include "gradflip/text_io.hpp"
#include "gradflip/trainer.hpp"
#include "gradflip_cli/config.hpp"

namespace fs = std::filesystem;

namespace gradflip::cli {
namespace {

struct Options {
  std::string config_path;
  std::vector<std::pair<std::string, CLI::Option*>> keys;
};

void add_config_options(CLI::App& sub, Options& o, std::map<std::string, std::string>& store) {
  sub.add_option("--config", o.config_path, "flat 'key = value' configuration file");
  for (const auto& k : config_keys()) {
    std::string names = "--" + k.key;
    if (k.key == "train.mode") names = "--mode," + names;
    if (k.key == "train.fork") names = "--fork," + names;
    o.keys.emplace_back(k.key, sub.add_option(names, store[k.key], k.help));
  }
}

ExperimentConfig build_config(const Options& o, const std::map<std::string, std::string>& store) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) throw ValueError("config file '" + o.config_path + "' does not exist");
    cfg.merge_file(o.config_path);
  }
  for (const auto& [key, opt] : o.keys) {
    if (opt->count() > 0) cfg.set(key, store.at(key));
  }
  cfg.resolve();
  return cfg;
}

void echo_config(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_text_file((dir / "config.resolved").string(), cfg.to_string());
}

Dataset load_required(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw ValueError(fmt::format("{} '{}' does not exist", what, path.string()));
  return load_dataset(path.string());
}

fs::path data_path(const ExperimentConfig& cfg, const std::string& split_name) {
  return fs::path(cfg.get("data.dir")) / (cfg.get("data.name") + "." + split_name);
}

int cmd_gen_data(const ExperimentConfig& cfg, bool force) {
  const GenConfig g = gen_config(cfg);
  const double train_frac = cfg.get_real("data.train_frac");
  const double dev_frac = cfg.get_real("data.dev_frac");
  const char* const names[] = {"train", "dev", "test", "semi", "manifest"};
  if (!force) {
    for (const char* n : names) {
      if (fs::exists(data_path(cfg, n))) {
        throw ValueError(fmt::format("'{}' exists; pass --force to overwrite", data_path(cfg, n).string()));
      }
    }
  }
  echo_config(cfg, cfg.get("out"));
  fs::create_directories(cfg.get("data.dir"));

  const SemiPartition parts = partition_semi(generate(g));
  const Splits s = split(parts.transcribed, train_frac, dev_frac, g.seed);
  save_dataset(s.train, data_path(cfg, "train").string());
  save_dataset(s.dev, data_path(cfg, "dev").string());
  save_dataset(s.test, data_path(cfg, "test").string());
  save_dataset(parts.untranscribed, data_path(cfg, "semi").string());

  std::string vocab;
  for (const auto& v : s.train.vocab) vocab += (vocab.empty() ? "" : " ") + v;
  const std::string manifest = fmt::format(
      "name = {}\nseed = {}\nspeakers = {}\nsemi_speakers = {}\ntrain = {}\ndev = {}\ntest = {}\nsemi = {}\n"
      "dim = {}\nvocab = {}\n",
      cfg.get("data.name"), g.seed, s.train.n_speakers(), parts.untranscribed.n_speakers(), s.train.size(),
      s.dev.size(), s.test.size(), parts.untranscribed.size(), s.train.dim, vocab);
  write_text_file(data_path(cfg, "manifest").string(), manifest);
  std::cout << fmt::format("wrote {}.{{train,dev,test,semi,manifest}} to {} ({} / {} / {} / {} utterances)\n",
                           cfg.get("data.name"), cfg.get("data.dir"), s.train.size(), s.dev.size(),
                           s.test.size(), parts.untranscribed.size());
  return kExitOk;
}

void require_compatible(const Dataset& a, const Dataset& b, const std::string& what) {
  if (a.dim != b.dim || a.vocab != b.vocab) {
    throw ValueError(what + " does not share the training set's feature dimension and vocabulary");
  }
}

int cmd_train(const ExperimentConfig& cfg) {
  const TrainMode mode = parse_train_mode(cfg.get("train.mode"));
  const std::string& fork_name = cfg.get("train.fork");
  const bool baseline = mode == TrainMode::baseline;
  if (baseline && !fork_name.empty()) throw ValueError("train: baseline mode takes no --fork");
  if (!baseline && fork_name.empty()) {
    throw ValueError(fmt::format("train: mode {} needs --fork in, mid or out", to_string(mode)));
  }
  // The branch of a baseline model is never trained; any legal fork works.
  const ForkPoint fork = baseline ? ForkPoint::mid : parse_fork_point(fork_name);
  TrainConfig tc = train_config(cfg);
  ModelConfig mc = model_config(cfg);

  const std::string cell = baseline ? "baseline" : fmt::format("{}-{}", to_string(mode), fork_name);
  const fs::path dir = fs::path(cfg.get("out")) / cell;
  echo_config(cfg, dir);

  const Dataset train = load_required(data_path(cfg, "train"), "training set");
  const Dataset dev = load_required(data_path(cfg, "dev"), "dev set");
  require_compatible(train, dev, "dev set");
  std::optional<Dataset> semi;
  if (mode == TrainMode::semi) {
    semi = load_required(data_path(cfg, "semi"), "semi set");
    if (semi->size() == 0) throw ValueError("train: semi mode needs a non-empty semi set (set gen.semi_speakers)");
    require_compatible(train, *semi, "semi set");
  }

  mc.input_dim = train.dim;
  mc.vocab_size = train.vocab.size();
  mc.n_speakers = train.n_speakers() + (semi ? semi->n_speakers() : 0);
  mc.fork_layer = mc.forks.at(fork);
  mc.validate();
  ModelGraph model(mc, cfg.get_u64("seed"));

  std::vector<MetricsRow> rows;
  tc.on_epoch = [&rows](const MetricsRow& r) {
    rows.push_back(r);
    std::cerr << fmt::format("epoch {:>3} {}  acoustic {:.4f}  speaker {:.4f}  dev LER {:.4f}  lambda {:.4f}\n",
                             r.epoch, to_string(r.phase), r.train_acoustic_loss, r.train_speaker_loss,
                             r.dev_ler, r.lambda);
  };
  TrainResult result;
  try {
    result = gradflip::train(model, TrainData{&train, &dev, semi ? &*semi : nullptr}, tc);
  } catch (const DivergenceError& e) {
    write_text_file((dir / "metrics.csv").string(), metrics_csv(rows));
    throw;
  }
  write_text_file((dir / "metrics.csv").string(), metrics_csv(result.metrics));
  save_checkpoint(model, cell, (dir / "final.ckpt").string());
  ModelGraph best(mc, cfg.get_u64("seed"));
  for (const auto& [name, values] : result.best_params) best.params().assign(name, values);
  save_checkpoint(best, cell, (dir / "best.ckpt").string());
  std::cout << fmt::format("{}: best dev LER {:.4f} at epoch {}; outputs in {}\n", cell, result.best_dev_ler,
                           result.best_epoch, dir.string());
  return kExitOk;
}

std::size_t resolve_layer(const std::string& label, const ModelConfig& mc) {
  if (label == "in" || label == "mid" || label == "out") return mc.forks.at(parse_fork_point(label));
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
  if (ec != std::errc() || p != label.data() + label.size() || label.empty()) {
    throw ValueError("probe: layer '" + label + "' is neither in/mid/out nor an index");
  }
  return v;
}

int cmd_probe(const ExperimentConfig& cfg, const std::vector<std::string>& checkpoints,
              const std::vector<std::string>& layers, const std::string& data) {
  for (const auto& path : checkpoints) {
    if (!fs::exists(path)) throw ValueError("probe: checkpoint '" + path + "' does not exist");
  }
  for (const auto& l : layers) {
    if (l != "in" && l != "mid" && l != "out") resolve_layer(l, ModelConfig::toy());
  }
  const ProbeConfig pc = probe_config(cfg);
  echo_config(cfg, cfg.get("out"));

  const fs::path data_file = data.empty() ? data_path(cfg, cfg.get("probe.split")) : fs::path(data);
  const Dataset ds = load_required(data_file, "probe dataset");
  std::vector<Checkpoint> loaded;
  loaded.reserve(checkpoints.size());
  for (const auto& path : checkpoints) loaded.push_back(load_checkpoint(path));

  std::vector<ProbeCell> cells;
  for (const auto& ck : loaded) {
    for (const auto& label : layers) {
      ProbeCell cell{ck.variant, &ck.model, 0, label, ""};
      cell.layer = resolve_layer(label, ck.model.config());
      if (cell.layer > ck.model.config().n_layers) {
        cell.error = fmt::format("layer {} outside [0, {}]", cell.layer, ck.model.config().n_layers);
        std::cerr << fmt::format("probe: {} layer {}: {}\n", ck.variant, label, cell.error);
      } else if (ck.model.config().input_dim != ds.dim) {
        cell.error = "dataset dimension does not match the checkpoint";
        std::cerr << fmt::format("probe: {}: {}\n", ck.variant, cell.error);
      }
      cells.push_back(std::move(cell));
    }
  }
  const ProbeReport report = figure2_report(cells, ds, pc);
  const fs::path out = fs::path(cfg.get("out")) / "probe.csv";
  write_text_file(out.string(), probe_report_csv(report));
  std::cout << probe_report_csv(report);
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, std::vector<std::string> data) {
  if (!fs::exists(checkpoint)) throw ValueError("eval: checkpoint '" + checkpoint + "' does not exist");
  echo_config(cfg, cfg.get("out"));
  if (data.empty()) data = {data_path(cfg, "dev").string(), data_path(cfg, "test").string()};
  const Checkpoint ck = load_checkpoint(checkpoint);
  std::vector<EvalRow> rows;
  for (const auto& path : data) {
    const Dataset ds = load_required(path, "evaluation set");
    if (ds.dim != ck.model.config().input_dim || ds.vocab.size() != ck.model.config().vocab_size) {
      throw ValueError("eval: '" + path + "' does not match the checkpoint's input dimension or vocabulary");
    }
    const std::string ext = fs::path(path).extension().string();
    const std::string split_name = ext.size() > 1 ? ext.substr(1) : fs::path(path).filename().string();
    const TranscriptionScores s = evaluate_transcription(ck.model, ds);
    rows.push_back({split_name, "ler", s.ler.value, s.ler.n_utts});
    rows.push_back({split_name, "wer", s.wer.value, s.wer.n_utts});
    if (s.ler.skipped > 0) {
      std::cerr << fmt::format("eval: {}: skipped {} untranscribed utterances\n", path, s.ler.skipped);
    }
  }
  const std::string csv = eval_report_csv(rows);
  write_text_file((fs::path(cfg.get("out")) / "eval.csv").string(), csv);
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Speaker-aware ASG training: data generation, training, probing and evaluation"};
  app.name("gradflip");
  app.require_subcommand(1);

  std::map<std::string, std::string> gen_store, train_store, probe_store, eval_store;
  Options gen_o, train_o, probe_o, eval_o;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic speaker-conditioned dataset");
  add_config_options(*gen, gen_o, gen_store);
  bool force = false;
  gen->add_flag("--force", force, "overwrite existing dataset files");

  auto* tr = app.add_subcommand("train", "train one experiment cell (mode x fork)");
  add_config_options(*tr, train_o, train_store);

  auto* pr = app.add_subcommand("probe", "speaker probes on frozen representations");
  add_config_options(*pr, probe_o, probe_store);
  std::vector<std::string> checkpoints, layers{"in", "mid", "out"};
  std::string probe_data;
  pr->add_option("--checkpoints", checkpoints, "checkpoint files")->required()->delimiter(',');
  pr->add_option("--layers", layers, "in, mid, out or block indices (0 = input)")->delimiter(',');
  pr->add_option("--data", probe_data, "dataset file to dump (default <data.dir>/<data.name>.<probe.split>)");

  auto* ev = app.add_subcommand("eval", "letter and word error rates of a checkpoint");
  add_config_options(*ev, eval_o, eval_store);
  std::string checkpoint;
  std::vector<std::string> eval_data;
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--data", eval_data, "dataset files (default dev and test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(build_config(gen_o, gen_store), force);
    if (tr->parsed()) return cmd_train(build_config(train_o, train_store));
    if (pr->parsed()) return cmd_probe(build_config(probe_o, probe_store), checkpoints, layers, probe_data);
    if (ev->parsed()) return cmd_eval(build_config(eval_o, eval_store), checkpoint, eval_data);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"gradflip"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace gradflip::cli
