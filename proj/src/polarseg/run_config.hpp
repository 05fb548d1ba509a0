#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polarseg/detection.hpp"
#include "polarseg/evaluation.hpp"
#include "polarseg/network.hpp"
#include "polarseg/synthetic.hpp"
#include "polarseg/trainer.hpp"

namespace polarseg {

// Everything an experiment needs, read from an INI-style file with
// [model], [data], [train], [eval] and [run] sections of key = value lines.
struct RunConfig {
  ModelConfig model;
  SceneConfig data;
  std::size_t train_count = 500;
  std::size_t eval_count = 100;
  TrainConfig train;
  DecodeConfig decode;
  EvalConfig eval;
  std::uint64_t seed = 0;

  RunConfig();

  // `key` is "section.name". Unknown keys and malformed values fail with
  // ConfigInvalid.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void validate() const;
  std::string to_ini() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Ablation switches: no-fine, no-hbb, implicit-coarse, detach-coords,
// standard-conv.
void apply_ablation(RunConfig& config, const std::string& name);
const std::vector<std::string>& ablation_names();

}  // namespace polarseg
