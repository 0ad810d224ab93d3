#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tosa/agent.hpp"
#include "tosa/env.hpp"

namespace tosa {

enum class PolicyKind { kTosaTrained, kBitOriented, kOracle };
enum class TrainingMode { kPerK, kShared };

std::string_view to_string(PolicyKind p);
PolicyKind parse_policy(std::string_view name);

struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  NeuralConfig neural;
  std::uint64_t master_seed = 1;
  std::vector<std::size_t> k_list;
  std::size_t n_replicates = 20;
  std::size_t n_eval_episodes = 1;
  std::string output_dir = "out";
  std::vector<PolicyKind> policies;
  TrainingMode training_mode = TrainingMode::kPerK;
  std::size_t threads = 1;

  // The fully merged document the config was parsed from. Written verbatim
  // to run manifests and hashed for provenance.
  nlohmann::json source;

  bool has_policy(PolicyKind p) const;
};

// Every recognized key with its default value. Power and threshold
// quantities are expressed in dB/dBm here and converted on load.
nlohmann::json default_config_json();

// Merges overrides onto the defaults and parses the result. Unknown keys and
// invalid values throw std::invalid_argument.
ExperimentConfig load_config(const nlohmann::json& overrides);
ExperimentConfig load_config_file(const std::string& path);

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// 64-bit FNV-1a over the canonical dump, printed as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace tosa
