#include <bit>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "gradflip/error.hpp"
#include "gradflip/model.hpp"
#include "gradflip/rng.hpp"

namespace gradflip {
namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "gradflip-checkpoint";

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{
      {"input_dim", c.input_dim},
      {"n_layers", c.n_layers},
      {"channels", c.channels},
      {"kernel_width", c.kernel_width},
      {"fork_layer", c.fork_layer},
      {"fork_in", c.forks.in},
      {"fork_mid", c.forks.mid},
      {"fork_out", c.forks.out},
      {"vocab_size", c.vocab_size},
      {"n_speakers", c.n_speakers},
      {"dropout_rate", c.dropout_rate},
      {"pooling", std::string(to_string(c.pooling.kind))},
      {"tau", c.pooling.tau},
      {"branch_channels", c.branch_channels},
      {"branch_kernel", c.branch_kernel},
  };
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.kernel_width = j.at("kernel_width").get<std::size_t>();
  c.fork_layer = j.at("fork_layer").get<std::size_t>();
  c.forks.in = j.at("fork_in").get<std::size_t>();
  c.forks.mid = j.at("fork_mid").get<std::size_t>();
  c.forks.out = j.at("fork_out").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.n_speakers = j.at("n_speakers").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.pooling.kind = parse_pool_kind(j.at("pooling").get<std::string>());
  c.pooling.tau = j.at("tau").get<double>();
  c.branch_channels = j.at("branch_channels").get<std::size_t>();
  c.branch_kernel = j.at("branch_kernel").get<std::size_t>();
  return c;
}

}  // namespace

std::string model_digest(const ModelGraph& m) {
  std::uint64_t h = fnv1a64(config_to_json(m.config()).dump());
  for (const auto& [name, e] : m.params()) {
    h ^= fnv1a64(name);
    for (double v : e.value.data()) {
      h ^= std::bit_cast<std::uint64_t>(v);
      h *= 0x100000001b3ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

std::string checkpoint_to_string(const ModelGraph& m, const std::string& variant) {
  json params = json::object();
  for (const auto& [name, e] : m.params()) {
    params[name] = json{{"group", std::string(to_string(e.group))},
                        {"shape", e.value.shape()},
                        {"values", e.value.to_vector()}};
  }
  json doc{{"format", kCheckpointFormat},
           {"version", kCheckpointVersion},
           {"variant", variant},
           {"seed", m.seed()},
           {"config", config_to_json(m.config())},
           {"params", std::move(params)}};
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw ParseError("checkpoint: unrecognized format tag");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError(fmt::format("checkpoint: unsupported version {}", version));
    }
    ModelConfig cfg = config_from_json(doc.at("config"));
    Checkpoint ck{doc.at("variant").get<std::string>(),
                  ModelGraph(cfg, doc.at("seed").get<std::uint64_t>())};
    const json& params = doc.at("params");
    if (params.size() != ck.model.params().size()) {
      throw ParseError(fmt::format("checkpoint: {} parameters stored, model has {}", params.size(),
                                   ck.model.params().size()));
    }
    for (const auto& [name, entry] : params.items()) {
      if (!ck.model.params().contains(name)) throw ParseError("checkpoint: unexpected parameter '" + name + "'");
      const Tensor& t = ck.model.params().get(name);
      if (entry.at("shape").get<Shape>() != t.shape()) {
        throw ParseError("checkpoint: shape mismatch for '" + name + "'");
      }
      if (parse_param_group(entry.at("group").get<std::string>()) != ck.model.params().group(name)) {
        throw ParseError("checkpoint: group mismatch for '" + name + "'");
      }
      ck.model.params().assign(name, entry.at("values").get<std::vector<double>>());
    }
    return ck;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelGraph& m, const std::string& variant, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_string(m, variant);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace gradflip
