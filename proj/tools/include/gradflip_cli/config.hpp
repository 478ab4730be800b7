#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gradflip/analysis.hpp"
#include "gradflip/data.hpp"
#include "gradflip/model.hpp"
#include "gradflip/trainer.hpp"

namespace gradflip::cli {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

// Every recognized key with its default. `seed` takes its default from the
// GRADFLIP_SEED environment variable when that is set.
const std::vector<KeySpec>& config_keys();

// Flat `dotted.key = value` document. Blank lines and lines starting with
// '#' are ignored.
class ExperimentConfig {
 public:
  // All defaults applied.
  ExperimentConfig();

  void merge_file(const std::string& path);
  void merge_text(const std::string& text);
  // Throws ValueError for an unknown key.
  void set(const std::string& key, const std::string& value);

  bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Fills values that depend on other keys: model.* from model.preset,
  // data.dir from out, train.lambda_kind from train.mode. Idempotent.
  void resolve();

  // Every key in name order, one `key = value` per line.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

GenConfig gen_config(const ExperimentConfig& c);

// Architecture from the model.* keys; data-dependent sizes (input dim,
// vocabulary, speakers) are left at their defaults.
ModelConfig model_config(const ExperimentConfig& c);

TrainConfig train_config(const ExperimentConfig& c);
ProbeConfig probe_config(const ExperimentConfig& c);

}  // namespace gradflip::cli
