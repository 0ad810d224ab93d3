#include "tosa/config.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "tosa/channel.hpp"

namespace tosa {

using nlohmann::json;

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::kTosaTrained:
      return "tosa_trained";
    case PolicyKind::kBitOriented:
      return "bit_oriented";
    case PolicyKind::kOracle:
      return "oracle";
  }
  return "unknown";
}

PolicyKind parse_policy(std::string_view name) {
  if (name == "tosa_trained") return PolicyKind::kTosaTrained;
  if (name == "bit_oriented") return PolicyKind::kBitOriented;
  if (name == "oracle") return PolicyKind::kOracle;
  throw std::invalid_argument("unknown policy: " + std::string(name));
}

bool ExperimentConfig::has_policy(PolicyKind p) const {
  for (PolicyKind q : policies) {
    if (q == p) return true;
  }
  return false;
}

json default_config_json() {
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k <= 20; ++k) ks.push_back(k);
  return json{
      {"channel",
       {{"carrier_frequency_hz", 5e9},
        {"speed_of_light_m_s", 3e8},
        {"path_loss_exponent", -2.0},
        {"eta_los_db", -1.0},
        {"eta_nlos_db", -20.0},
        {"env_a", 11.95},
        {"env_b", 0.14},
        {"tx_power_dbm", 18.0},
        {"noise_power_dbm", -104.0},
        {"snr_threshold_db", 5.5},
        {"bandwidth_hz", 20e6},
        {"height_m", 100.0},
        {"ground_radius_m", 500.0},
        {"fixed_offset_m", nullptr}}},
      {"traffic",
       {{"n_effective", 200},
        {"payload_bits", 128},
        {"fixed_fields", {{"row", nullptr}, {"pitch", nullptr}, {"yaw", nullptr}, {"thrust", nullptr}}},
        {"explicit_values", json::array()}}},
      {"semantics",
       {{"weights", {1.0, 1.0, 1.0, 1.0}},
        {"ranges", {70.0, 70.0, 300.0, 10.0}},
        {"kappa", 100.0},
        {"zeta", 0.05},
        {"tti_seconds", 1e-3},
        {"similarity_reference", "last_delivered"}}},
      {"env", {{"link_override", "none"}}},
      {"neural",
       {{"hidden_size", 32},
        {"layers", 1},
        {"window", 8},
        {"learning_rate", 1e-5},
        {"rms_decay", 0.99},
        {"rms_epsilon", 1e-8}}},
      {"agent",
       {{"gamma", 0.1},
        {"epsilon_start", 1.0},
        {"epsilon_min", 0.01},
        {"epsilon_decay_fraction", 0.5},
        {"replay_capacity", 10000},
        {"batch_size", 32},
        {"target_update_k", 200},
        {"episodes", 1000},
        {"ttis_per_episode", 200},
        {"target_rule", "ddqn"}}},
      {"experiment",
       {{"master_seed", 1},
        {"k_list", ks},
        {"n_replicates", 20},
        {"n_eval_episodes", 1},
        {"output_dir", "out"},
        {"policies", {"tosa_trained", "bit_oriented"}},
        {"training_mode", "per_k"},
        {"threads", 1}}},
  };
}

namespace {

// Rejects keys in `doc` that the defaults do not define. Arrays and null
// defaults accept any value.
void check_known_keys(const json& defaults, const json& doc, const std::string& path) {
  if (!doc.is_object()) return;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.is_object() || !defaults.contains(it.key())) {
      throw std::invalid_argument("unknown config key: " + key);
    }
    const json& def = defaults.at(it.key());
    if (def.is_object()) check_known_keys(def, it.value(), key);
  }
}

template <typename T>
T get(const json& doc, const char* section, const char* key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config ") + section + "." + key + ": " + e.what());
  }
}

template <typename T, std::size_t N>
std::array<T, N> get_array(const json& doc, const char* section, const char* key) {
  auto v = get<std::vector<T>>(doc, section, key);
  if (v.size() != N) {
    throw std::invalid_argument(std::string("config ") + section + "." + key + ": expected " +
                                std::to_string(N) + " values");
  }
  std::array<T, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

ExperimentConfig load_config(const json& overrides) {
  json doc = default_config_json();
  check_known_keys(doc, overrides, "");
  doc.merge_patch(overrides);
  // merge_patch deletes keys patched with null; restore nullable defaults.
  const json defaults = default_config_json();
  if (!doc["channel"].contains("fixed_offset_m")) doc["channel"]["fixed_offset_m"] = nullptr;
  for (const auto& [field, value] : defaults["traffic"]["fixed_fields"].items()) {
    if (!doc["traffic"]["fixed_fields"].contains(field)) doc["traffic"]["fixed_fields"][field] = value;
  }

  ExperimentConfig cfg;
  cfg.source = doc;

  ChannelParams& ch = cfg.env.channel;
  ch.carrier_frequency_hz = get<double>(doc, "channel", "carrier_frequency_hz");
  ch.speed_of_light_m_s = get<double>(doc, "channel", "speed_of_light_m_s");
  ch.path_loss_exponent = get<double>(doc, "channel", "path_loss_exponent");
  ch.eta_los = db_to_linear(get<double>(doc, "channel", "eta_los_db"));
  ch.eta_nlos = db_to_linear(get<double>(doc, "channel", "eta_nlos_db"));
  ch.env_a = get<double>(doc, "channel", "env_a");
  ch.env_b = get<double>(doc, "channel", "env_b");
  ch.tx_power_w = dbm_to_watts(get<double>(doc, "channel", "tx_power_dbm"));
  ch.noise_power_w = dbm_to_watts(get<double>(doc, "channel", "noise_power_dbm"));
  ch.snr_threshold_linear = db_to_linear(get<double>(doc, "channel", "snr_threshold_db"));
  ch.bandwidth_hz = get<double>(doc, "channel", "bandwidth_hz");
  cfg.env.height_m = get<double>(doc, "channel", "height_m");
  cfg.env.ground_radius_m = get<double>(doc, "channel", "ground_radius_m");
  if (!doc["channel"]["fixed_offset_m"].is_null()) {
    cfg.env.fixed_offset_m = get<double>(doc, "channel", "fixed_offset_m");
  }

  DatasetConfig& tr = cfg.env.traffic;
  tr.n_effective = get<std::size_t>(doc, "traffic", "n_effective");
  tr.payload_bits = get<std::uint32_t>(doc, "traffic", "payload_bits");
  const char* field_names[kNumFields] = {"row", "pitch", "yaw", "thrust"};
  for (std::size_t i = 0; i < kNumFields; ++i) {
    const json& v = doc["traffic"]["fixed_fields"][field_names[i]];
    if (!v.is_null()) tr.fixed_fields[i] = v.get<double>();
  }
  for (const auto& row : doc["traffic"]["explicit_values"]) {
    auto v = row.get<std::vector<double>>();
    if (v.size() != kNumFields) {
      throw std::invalid_argument("config traffic.explicit_values: rows need 4 values");
    }
    tr.explicit_values.push_back({v[0], v[1], v[2], v[3]});
  }

  SimilarityConfig& sim = cfg.env.similarity;
  sim.weights = get_array<double, kNumFields>(doc, "semantics", "weights");
  sim.ranges = get_array<double, kNumFields>(doc, "semantics", "ranges");
  sim.kappa = get<double>(doc, "semantics", "kappa");
  sim.zeta = get<double>(doc, "semantics", "zeta");
  cfg.env.tti_seconds = get<double>(doc, "semantics", "tti_seconds");
  const auto reference = get<std::string>(doc, "semantics", "similarity_reference");
  if (reference == "last_delivered") {
    cfg.env.reference = SimilarityReference::kLastDelivered;
  } else if (reference == "previous_packet") {
    cfg.env.reference = SimilarityReference::kPreviousPacket;
  } else {
    throw std::invalid_argument("config semantics.similarity_reference: " + reference);
  }

  const auto link = get<std::string>(doc, "env", "link_override");
  if (link == "none") {
    cfg.env.link_override = LinkOverride::kNone;
  } else if (link == "always_success") {
    cfg.env.link_override = LinkOverride::kAlwaysSuccess;
  } else if (link == "always_fail") {
    cfg.env.link_override = LinkOverride::kAlwaysFail;
  } else {
    throw std::invalid_argument("config env.link_override: " + link);
  }

  NeuralConfig& nn = cfg.neural;
  nn.shape.n_in = kObservationSize;
  nn.shape.n_h = get<std::size_t>(doc, "neural", "hidden_size");
  nn.shape.n_l = get<std::size_t>(doc, "neural", "layers");
  nn.window = get<std::size_t>(doc, "neural", "window");
  nn.rmsprop.learning_rate = get<double>(doc, "neural", "learning_rate");
  nn.rmsprop.decay = get<double>(doc, "neural", "rms_decay");
  nn.rmsprop.epsilon = get<double>(doc, "neural", "rms_epsilon");

  AgentConfig& ag = cfg.agent;
  ag.gamma = get<double>(doc, "agent", "gamma");
  ag.epsilon_start = get<double>(doc, "agent", "epsilon_start");
  ag.epsilon_min = get<double>(doc, "agent", "epsilon_min");
  ag.epsilon_decay_fraction = get<double>(doc, "agent", "epsilon_decay_fraction");
  ag.replay_capacity = get<std::size_t>(doc, "agent", "replay_capacity");
  ag.batch_size = get<std::size_t>(doc, "agent", "batch_size");
  ag.target_update_k = get<std::size_t>(doc, "agent", "target_update_k");
  ag.episodes = get<std::size_t>(doc, "agent", "episodes");
  ag.ttis_per_episode = get<std::size_t>(doc, "agent", "ttis_per_episode");
  const auto rule = get<std::string>(doc, "agent", "target_rule");
  if (rule == "ddqn") {
    ag.target_rule = TargetRule::kDdqn;
  } else if (rule == "dqn") {
    ag.target_rule = TargetRule::kDqn;
  } else {
    throw std::invalid_argument("config agent.target_rule: " + rule);
  }

  cfg.master_seed = get<std::uint64_t>(doc, "experiment", "master_seed");
  cfg.k_list = get<std::vector<std::size_t>>(doc, "experiment", "k_list");
  cfg.n_replicates = get<std::size_t>(doc, "experiment", "n_replicates");
  cfg.n_eval_episodes = get<std::size_t>(doc, "experiment", "n_eval_episodes");
  cfg.output_dir = get<std::string>(doc, "experiment", "output_dir");
  for (const auto& p : get<std::vector<std::string>>(doc, "experiment", "policies")) {
    cfg.policies.push_back(parse_policy(p));
  }
  const auto mode = get<std::string>(doc, "experiment", "training_mode");
  if (mode == "per_k") {
    cfg.training_mode = TrainingMode::kPerK;
  } else if (mode == "shared") {
    cfg.training_mode = TrainingMode::kShared;
  } else {
    throw std::invalid_argument("config experiment.training_mode: " + mode);
  }
  cfg.threads = get<std::size_t>(doc, "experiment", "threads");

  if (cfg.k_list.empty()) throw std::invalid_argument("config experiment.k_list must not be empty");
  for (std::size_t k : cfg.k_list) {
    if (k < 1) throw std::invalid_argument("config experiment.k_list entries must be >= 1");
  }
  if (cfg.policies.empty()) throw std::invalid_argument("config experiment.policies is empty");
  if (cfg.n_replicates < 1 || cfg.n_eval_episodes < 1) {
    throw std::invalid_argument("config: n_replicates and n_eval_episodes must be >= 1");
  }
  if (cfg.threads < 1) throw std::invalid_argument("config experiment.threads must be >= 1");

  cfg.env.traffic.repeat_k = cfg.k_list.front();
  validate(cfg.env);
  validate(cfg.agent);
  validate(cfg.neural);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  return load_config(doc);
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("override must look like key=value: " + std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw std::invalid_argument("override has an empty key segment: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tosa
