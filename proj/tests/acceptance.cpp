// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "asg_oracle.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "gradflip/analysis.hpp"
#include "gradflip/asg.hpp"
#include "gradflip/data.hpp"
#include "gradflip/layers.hpp"
#include "gradflip/model.hpp"
#include "gradflip/ops.hpp"
#include "gradflip/text_io.hpp"
#include "gradflip/trainer.hpp"
#include "gradflip_cli/cli.hpp"
#include "model_check.hpp"

namespace fs = std::filesystem;
using namespace gradflip;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Fixed seed for every stochastic component of the learning criteria.
constexpr std::uint64_t kSeed = 1;

// ---------------------------------------------------------------- 1

Outcome asg_oracle_equivalence() {
  const auto t0 = Clock::now();
  RngStream rng(kSeed, "acceptance/asg");
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t T = 1; T <= 4; ++T)
    for (std::size_t K = 2; K <= 3; ++K)
      for (std::size_t N = 1; N <= T; ++N)
        for (int draw = 0; draw < 20; ++draw) {
          const auto s = testing::random_scores(rng, T, K);
          const auto target = testing::random_target(rng, N, K);
          const double dp = asg::asg_loss(Tensor::from({T, K}, s.emissions), Tensor::from({K, K}, s.transitions), target)
                                .item();
          worst = std::max(worst, std::abs(dp - testing::brute_loss(s, target)));
          ++cases;
        }
  const double zero = asg::asg_loss(Tensor::zeros({3, 4}), Tensor::zeros({4, 4}), asg::TokenSeq{1, 2}).item();
  const double zero_err = std::abs(zero - std::log(32.0));
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && zero_err <= 1e-9 && secs < 5.0,
          fmt::format("{} cases, max |DP - enumeration| {:.2e}, zero-score case err {:.2e}, {:.2f}s", cases, worst,
                      zero_err, secs)};
}

// ---------------------------------------------------------------- 2

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  RngStream rng(kSeed, "acceptance/grad");
  auto R = [&](const Shape& s) {
    const auto in = testing::random_input(rng, s);
    return Tensor::from(in.shape, in.values);
  };
  auto in = [&](const Shape& s, double lo = -1.0, double hi = 1.0) { return testing::random_input(rng, s, lo, hi); };
  using Fn = std::function<Tensor(const std::vector<Tensor>&)>;
  struct Case {
    std::string name;
    Fn f;
    std::vector<testing::Input> inputs;
  };
  const Tensor r_conv = R({5, 2}), r_glu = R({4, 3}), r_wn = R({3, 2, 3}), r_drop = R({4, 3}), r_pool = R({3}),
               r_gs = R({2, 3}), r_lin = R({4, 2});
  std::vector<Case> cases{
      {"conv1d", [&](const auto& t) { return ops::sum_all(ops::mul(layers::conv1d(t[0], t[1], t[2]), r_conv)); },
       {in({5, 3}), in({2, 3, 3}), in({2})}},
      {"glu", [&](const auto& t) { return ops::sum_all(ops::mul(layers::glu(t[0]), r_glu)); }, {in({4, 6})}},
      {"weight_norm",
       [&](const auto& t) { return ops::sum_all(ops::mul(layers::weight_norm(t[0], t[1]), r_wn)); },
       {in({3, 2, 3}), in({3}, 0.5, 2.0)}},
      {"dropout",
       [&](const auto& t) {
         RngStream mask(kSeed, "acceptance/mask");
         return ops::sum_all(ops::mul(layers::dropout(t[0], 0.3, Mode::train, mask), r_drop));
       },
       {in({4, 3})}},
      {"pool_sum", [&](const auto& t) { return ops::sum_all(ops::mul(layers::pool(t[0], {PoolKind::sum, 1.0}), r_pool)); },
       {in({5, 3})}},
      {"pool_max", [&](const auto& t) { return ops::sum_all(ops::mul(layers::pool(t[0], {PoolKind::max, 1.0}), r_pool)); },
       {in({5, 3})}},
      {"pool_logsumexp",
       [&](const auto& t) { return ops::sum_all(ops::mul(layers::pool(t[0], {PoolKind::logsumexp, 2.0}), r_pool)); },
       {in({5, 3})}},
      {"grad_scale",
       [&](const auto& t) { return ops::sum_all(ops::mul(layers::grad_scale(ops::sigmoid(t[0]), 1.0), r_gs)); },
       {in({2, 3})}},
      {"linear", [&](const auto& t) { return ops::sum_all(ops::mul(layers::linear(t[0], t[1], t[2]), r_lin)); },
       {in({4, 3}), in({2, 3}), in({2})}},
      {"speaker_nll", [](const auto& t) { return layers::nll(t[0], 2); }, {in({5}, -3.0, 3.0)}},
      {"asg_loss", [](const auto& t) { return asg::asg_loss(t[0], t[1], asg::TokenSeq{0, 2, 1}); },
       {in({6, 4}, -2.0, 2.0), in({4, 4})}},
  };

  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    const double e = testing::grad_check(c.f, c.inputs).max_rel_err;
    if (e >= worst_op) {
      worst_op = e;
      worst_name = c.name;
    }
  }

  GenConfig g;
  g.seed = kSeed;
  g.utterances_per_speaker = 1;
  const Dataset ds = generate(g);
  ModelGraph m(ModelConfig::toy(), kSeed);
  const double model_err = testing::max_rel_err(testing::model_grad_check(m, ds.utterances[0], 30, kSeed));
  const double secs = seconds_since(t0);
  return {worst_op <= 1e-6 && model_err <= 1e-4 && secs < 60.0,
          fmt::format("{} ops, worst rel err {:.2e} ({}), toy model 30 params rel err {:.2e}, {:.1f}s", cases.size(),
                      worst_op, worst_name, model_err, secs)};
}

// ---------------------------------------------------------------- shared toy data

struct ToyData {
  Dataset all;
  Splits splits;
};

const ToyData& toy_data() {
  static const ToyData d = [] {
    GenConfig g;
    g.seed = kSeed;
    ToyData t;
    t.all = generate(g);
    t.splits = split(t.all, 0.8, 0.1, kSeed);
    return t;
  }();
  return d;
}

Batch batch_of(const Dataset& ds, std::size_t n) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) b.items.push_back({&ds.utterances[i], ds.utterances[i].speaker});
  return b;
}

enum class Part { encoder, decoder, branch };

Part part_of(const ModelGraph& m, const std::string& name) {
  if (m.params().group(name) == ParamGroup::speaker) return Part::branch;
  for (std::size_t l = 1; l <= m.config().fork_layer; ++l)
    if (name.rfind(fmt::format("layer{:02d}.", l), 0) == 0) return Part::encoder;
  return Part::decoder;
}

// ---------------------------------------------------------------- 3

Outcome mt_al_duality() {
  const Dataset& train = toy_data().splits.train;
  const Batch b = batch_of(train, 4);
  const double lambda = 0.5;

  // Speaker-term gradients at +lambda (MT) and -lambda (AL).
  ModelGraph m(ModelConfig::toy(), kSeed);
  const auto mt_spk = batch_gradients(m, b, +lambda, nullptr, TermMask{false, true});
  const auto al_spk = batch_gradients(m, b, -lambda, nullptr, TermMask{false, true});
  double enc_gap = 0.0;
  bool heads_equal = true;
  for (const auto& [name, g] : mt_spk.grads) {
    const auto a = g.to_vector(), c = al_spk.grads.at(name).to_vector();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (part_of(m, name) == Part::encoder) {
        enc_gap = std::max(enc_gap, std::abs(a[i] + c[i]));
      } else {
        heads_equal = heads_equal && a[i] == c[i];
      }
    }
  }

  // Paired steps from identical state: both heads end bit-identical.
  ModelGraph m_mt(ModelConfig::toy(), kSeed), m_al(ModelConfig::toy(), kSeed);
  const RngStream drop(kSeed, "acceptance/duality");
  StepOptions opt;
  opt.dropout_rng = &drop;
  step(m_mt, b, TrainMode::mt, lambda, opt);
  step(m_al, b, TrainMode::al, lambda, opt);
  const auto s_mt = m_mt.params().snapshot(), s_al = m_al.params().snapshot();
  bool step_heads_equal = true, encoders_differ = false;
  for (const auto& [name, v] : s_mt) {
    if (part_of(m, name) == Part::encoder) {
      encoders_differ = encoders_differ || v != s_al.at(name);
    } else {
      step_heads_equal = step_heads_equal && v == s_al.at(name);
    }
  }
  return {enc_gap <= 1e-12 && heads_equal && step_heads_equal && encoders_differ,
          fmt::format("max |g_MT + g_AL| on encoder {:.1e}; D_s/D_y gradients identical: {}; after paired steps "
                      "D_s/D_y identical: {}, encoders differ: {}",
                      enc_gap, heads_equal, step_heads_equal, encoders_differ)};
}

// ---------------------------------------------------------------- 4

Outcome phase_protocol() {
  const ToyData& d = toy_data();
  const Dataset subset = select_subset(d.splits.train, 12, 4);
  const Batch b = batch_of(subset, 4);

  // Zero junction factor: the speaker term sends nothing into `main`.
  ModelGraph m(ModelConfig::toy(), kSeed);
  const auto spk = batch_gradients(m, b, 0.0, nullptr, TermMask{false, true});
  bool zero_flow = true;
  for (const auto& name : m.params().names(ParamGroup::main))
    for (double e : spk.grads.at(name).to_vector()) zero_flow = zero_flow && e == 0.0;

  // A Phase A epoch in AL mode moves `main` exactly as a baseline epoch does.
  TrainConfig a_cfg;
  a_cfg.seed = kSeed;
  a_cfg.mode = TrainMode::al;
  a_cfg.lambda = LambdaSchedule::for_mode(TrainMode::al);
  a_cfg.epochs_a = 1;
  a_cfg.epochs_b = a_cfg.epochs_c = 0;
  TrainConfig base_cfg = a_cfg;
  base_cfg.mode = TrainMode::baseline;
  ModelGraph m_al(ModelConfig::toy(), kSeed), m_base(ModelConfig::toy(), kSeed);
  train(m_al, {&subset, &d.splits.dev, nullptr}, a_cfg);
  train(m_base, {&subset, &d.splits.dev, nullptr}, base_cfg);
  bool phase_a_matches = true;
  for (const auto& name : m_al.params().names(ParamGroup::main))
    phase_a_matches = phase_a_matches && m_al.params().get(name).to_vector() == m_base.params().get(name).to_vector();

  // Phase B trains only the speaker group.
  TrainConfig b_cfg = a_cfg;
  b_cfg.epochs_a = 0;
  b_cfg.epochs_b = 1;
  ModelGraph m_b(ModelConfig::toy(), kSeed);
  const auto before = m_b.params().snapshot();
  train(m_b, {&subset, &d.splits.dev, nullptr}, b_cfg);
  const auto after = m_b.params().snapshot();
  bool main_frozen = true, branch_moved = false;
  for (const auto& name : m_b.params().names(ParamGroup::main)) main_frozen = main_frozen && after.at(name) == before.at(name);
  for (const auto& name : m_b.params().names(ParamGroup::speaker)) branch_moved = branch_moved || after.at(name) != before.at(name);

  return {zero_flow && phase_a_matches && main_frozen && branch_moved,
          fmt::format("speaker gradient into main exactly zero: {}; Phase A main == baseline main: {}; Phase B main "
                      "bit-unchanged: {}, branch updated: {}",
                      zero_flow, phase_a_matches, main_frozen, branch_moved)};
}

// ---------------------------------------------------------------- 5

Outcome semi_contract() {
  GenConfig g;
  g.seed = kSeed;
  g.utterances_per_speaker = 4;
  g.semi_speakers = 3;
  g.semi_utterances_per_speaker = 4;
  const SemiPartition parts = partition_semi(generate(g));
  const Dataset& semi = parts.untranscribed;
  ModelConfig mc = ModelConfig::toy();
  mc.n_speakers = parts.transcribed.n_speakers() + semi.n_speakers();
  ModelGraph m(mc, kSeed);

  Batch b;
  b.speaker_only = true;
  for (const auto& u : semi.utterances) b.items.push_back({&u, u.speaker + parts.transcribed.n_speakers()});

  const auto grads = batch_gradients(m, b, -0.2, nullptr);
  bool decoder_zero = true, transitions_zero = true, encoder_moved = false;
  for (const auto& [name, t] : grads.grads) {
    for (double e : t.to_vector()) {
      if (name == "asg.transitions") transitions_zero = transitions_zero && e == 0.0;
      else if (part_of(m, name) == Part::decoder) decoder_zero = decoder_zero && e == 0.0;
      else if (part_of(m, name) == Part::encoder) encoder_moved = encoder_moved || e != 0.0;
    }
  }

  const auto before = m.params().snapshot();
  const RngStream drop(kSeed, "acceptance/semi");
  StepOptions opt;
  opt.dropout_rng = &drop;
  step(m, b, TrainMode::semi, 0.2, opt);
  const auto after = m.params().snapshot();
  bool decoder_unchanged = true;
  for (const auto& [name, v] : after)
    if (part_of(m, name) == Part::decoder) decoder_unchanged = decoder_unchanged && v == before.at(name);

  return {decoder_zero && transitions_zero && encoder_moved && decoder_unchanged,
          fmt::format("D_y gradient zero: {}; transition gradient zero: {}; encoder receives gradient: {}; D_y and "
                      "transitions unchanged after a semi step: {}",
                      decoder_zero, transitions_zero, encoder_moved, decoder_unchanged)};
}

// ---------------------------------------------------------------- 6 and 7

struct Trained {
  std::optional<ModelGraph> model;
  std::vector<MetricsRow> metrics;
  double seconds = 0.0;
  std::string error;
};

Trained train_toy(TrainMode mode, std::size_t fork_layer, std::size_t epochs_a, std::size_t epochs_b,
                  std::size_t epochs_c) {
  const ToyData& d = toy_data();
  ModelConfig mc = ModelConfig::toy();
  mc.fork_layer = fork_layer;
  TrainConfig tc;
  tc.mode = mode;
  tc.seed = kSeed;
  tc.lambda = LambdaSchedule::for_mode(mode);
  tc.epochs_a = epochs_a;
  tc.epochs_b = epochs_b;
  tc.epochs_c = epochs_c;
  Trained t;
  t.model.emplace(mc, kSeed);
  const auto t0 = Clock::now();
  try {
    t.metrics = train(*t.model, {&d.splits.train, &d.splits.dev, nullptr}, tc).metrics;
  } catch (const std::exception& e) {
    t.error = e.what();
  }
  t.seconds = seconds_since(t0);
  return t;
}

Trained& baseline_model() {
  static Trained t = train_toy(TrainMode::baseline, ModelConfig::toy().forks.mid, 22, 0, 0);
  return t;
}

Outcome desk_scale_learning() {
  const Trained& t = baseline_model();
  if (!t.error.empty()) return {false, "training failed: " + t.error};
  const ToyData& d = toy_data();
  const double ler = t.metrics.back().dev_ler;
  return {d.splits.train.size() == 600 && t.metrics.size() == 22 && ler <= 0.10 && t.seconds <= 600.0,
          fmt::format("{} train utterances, {} baseline epochs, final dev LER {:.4f} (limit 0.10), {:.1f}s", d.splits.train.size(),
                      t.metrics.size(), ler, t.seconds)};
}

Outcome probe_ordering() {
  const Trained& base = baseline_model();
  if (!base.error.empty()) return {false, "baseline training failed: " + base.error};
  const ModelConfig toy = ModelConfig::toy();
  const std::size_t fork = toy.forks.mid;
  const Trained mt = train_toy(TrainMode::mt, fork, 5, 2, 15);
  const Trained al = train_toy(TrainMode::al, fork, 5, 2, 15);
  if (!mt.error.empty()) return {false, "MT training failed: " + mt.error};
  if (!al.error.empty()) return {false, "AL training failed: " + al.error};

  ProbeConfig pc;
  pc.seed = kSeed;
  const std::vector<ProbeCell> cells{
      {"baseline", &*base.model, toy.forks.in, "in", ""},
      {"baseline", &*base.model, toy.forks.mid, "mid", ""},
      {"baseline", &*base.model, toy.forks.out, "out", ""},
      {"mt", &*mt.model, fork, "mid", ""},
      {"al", &*al.model, fork, "mid", ""},
  };
  const ProbeReport r = figure2_report(cells, toy_data().splits.train, pc);
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!r.rows[i].accuracy) return {false, "probe failed for " + cells[i].variant + " " + cells[i].label};
  const double in = *r.rows[0].accuracy, mid = *r.rows[1].accuracy, out = *r.rows[2].accuracy;
  const double acc_mt = *r.rows[3].accuracy, acc_al = *r.rows[4].accuracy;
  const bool a = in >= mid && mid >= out - 0.02;
  const bool b = in - out >= 0.10;
  const bool c = acc_mt >= mid + 0.05 && acc_al <= mid - 0.05;
  return {a && b && c,
          fmt::format("baseline IN {:.3f} MID {:.3f} OUT {:.3f} (chance {:.3f}); at MID fork MT {:.3f} AL {:.3f}; "
                      "(a) {} (b) {} (c) {}",
                      in, mid, out, r.rows.back().chance, acc_mt, acc_al, a ? "ok" : "fail", b ? "ok" : "fail",
                      c ? "ok" : "fail")};
}

// ---------------------------------------------------------------- 8

constexpr const char* kPipelineConfig = R"(gen.n_speakers = 4
gen.utterances_per_speaker = 10
gen.alphabet_size = 4
gen.dim = 8
model.n_layers = 3
model.channels = 6
model.kernel_width = 3
model.fork_in = 1
model.fork_mid = 1
model.fork_out = 2
model.branch_channels = 6
model.branch_kernel = 3
train.epochs_a = 2
train.epochs_b = 1
train.epochs_c = 2
probe.epochs = 3
)";

std::vector<std::string> run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "pipeline.cfg").string();
  write_text_file(cfg, kPipelineConfig);
  const std::string out = dir.string();
  auto cli_run = [&](std::vector<std::string> args) {
    args.insert(args.begin() + 1, {"--config", cfg, "--out", out});
    const int rc = cli::run(args);
    if (rc != cli::kExitOk) throw std::runtime_error(fmt::format("'{}' exited with {}", args[0], rc));
  };
  cli_run({"gen-data"});
  cli_run({"train", "--mode", "baseline"});
  cli_run({"train", "--mode", "al", "--fork", "mid"});
  const std::string base_ck = (dir / "baseline/final.ckpt").string(), al_ck = (dir / "al-mid/final.ckpt").string();
  cli_run({"probe", "--checkpoints", base_ck + "," + al_ck});
  cli_run({"eval", "--checkpoint", (dir / "al-mid/best.ckpt").string()});
  return {"toy.train", "toy.dev", "toy.test", "toy.semi", "toy.manifest", "baseline/metrics.csv",
          "baseline/final.ckpt", "baseline/best.ckpt", "al-mid/metrics.csv", "al-mid/final.ckpt",
          "al-mid/best.ckpt", "probe.csv", "eval.csv"};
}

Outcome pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / fmt::format("gradflip-acceptance-{}", ::getpid());
  const auto files = run_pipeline(root / "a");
  run_pipeline(root / "b");
  std::size_t same = 0;
  std::string mismatch;
  for (const auto& f : files) {
    if (read_text_file((root / "a" / f).string()) == read_text_file((root / "b" / f).string())) {
      ++same;
    } else if (mismatch.empty()) {
      mismatch = f;
    }
  }
  fs::remove_all(root);
  return {same == files.size(), fmt::format("{}/{} artifacts byte-identical{}", same, files.size(),
                                            mismatch.empty() ? "" : "; first mismatch " + mismatch)};
}

// ---------------------------------------------------------------- 9

Outcome metric_properties() {
  RngStream rng(kSeed, "acceptance/metrics");
  auto seq = [&] {
    std::vector<int> s(static_cast<std::size_t>(rng.uniform_int(0, 8)));
    for (int& e : s) e = static_cast<int>(rng.uniform_int(0, 3));
    return s;
  };
  std::size_t violations = 0;
  for (int i = 0; i < 200; ++i) {
    const auto a = seq(), b = seq(), c = seq();
    const std::size_t ab = edit_distance(a, b);
    if (edit_distance(a, a) != 0) ++violations;
    if ((ab == 0) != (a == b)) ++violations;
    if (ab != edit_distance(b, a)) ++violations;
    if (edit_distance(a, c) > ab + edit_distance(b, c)) ++violations;
  }

  std::size_t bound_violations = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t L = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const double tau = rng.uniform(0.1, 10.0);
    const auto in = testing::random_input(rng, {L, 1}, -5.0, 5.0);
    const double s = layers::pool(Tensor::from(in.shape, in.values), {PoolKind::logsumexp, tau}).item();
    const double mx = *std::max_element(in.values.begin(), in.values.end());
    if (s > mx + 1e-12 || s < mx - std::log(static_cast<double>(L)) / tau - 1e-12) ++bound_violations;
  }

  const auto ramp = LambdaSchedule::ramp_to(0.2, 10.0);
  const double start = lambda_at(ramp, 0, 15), end = lambda_at(ramp, 15, 15);
  const bool ramp_ok = start == 0.0 && std::abs(end - 0.19998) < 1e-5;
  return {violations == 0 && bound_violations == 0 && ramp_ok,
          fmt::format("edit distance axiom violations {} / 200 triples; LSE bound violations {} / 100; ramp {} -> {:.6f}",
                      violations, bound_violations, start, end)};
}

// ---------------------------------------------------------------- 10

Outcome viterbi_correctness() {
  RngStream rng(kSeed, "acceptance/viterbi");
  std::size_t checked = 0, wrong_score = 0, wrong_path = 0;
  for (std::size_t T = 1; T <= 4; ++T)
    for (std::size_t K = 1; K <= 3; ++K)
      for (int draw = 0; draw < 20; ++draw) {
        const auto s = draw % 2 == 0 ? testing::integer_scores(rng, T, K) : testing::random_scores(rng, T, K);
        const Tensor em = Tensor::from({T, K}, s.emissions), tr = Tensor::from({K, K}, s.transitions);
        const auto best = testing::brute_viterbi(s);
        const auto path = asg::viterbi_decode(em, tr);
        if (testing::brute_path_score(s, std::vector<int>(path.begin(), path.end())) != best.score) ++wrong_score;
        if (path != best.path) ++wrong_path;
        ++checked;
      }
  return {wrong_score == 0 && wrong_path == 0,
          fmt::format("{} cases (half with integer scores and ties): score mismatches {}, tie-break mismatches {}",
                      checked, wrong_score, wrong_path)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ASG oracle equivalence", asg_oracle_equivalence},
      {"gradient suite", gradient_suite},
      {"MT/AL gradient duality", mt_al_duality},
      {"phase protocol", phase_protocol},
      {"semi-supervised contract", semi_contract},
      {"desk-scale learning", desk_scale_learning},
      {"probe accuracy by depth and mode", probe_ordering},
      {"pipeline determinism", pipeline_determinism},
      {"metric properties", metric_properties},
      {"Viterbi correctness", viterbi_correctness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("criterion {:>2}: {} | {} | {}\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                             o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
