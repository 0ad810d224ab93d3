// Command-line runner for UAV C&C scheduling experiments.
//
//   tosa_sim campaign --config cfg.json --out results
//   tosa_sim train    --k 3 --out results
//   tosa_sim eval     --k 3 --policy tosa_trained --checkpoint results/train_k03_r00.qnet
//   tosa_sim timeline --k 3 --policy oracle --out results
//   tosa_sim stream   --k 4 --set traffic.n_effective=3 --out results
//
// Any config key can be overridden with --set section.key=value.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tosa/config.hpp"
#include "tosa/harness.hpp"
#include "tosa/neural.hpp"
#include "tosa/traffic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> ks;
  std::vector<std::string> policies;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.sets, "Override a config key: section.key=value");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--k", o.ks, "Repeat count(s) k");
  cmd->add_option("--policy", o.policies, "tosa_trained | bit_oriented | oracle");
  cmd->add_option("--out", o.out, "Output directory");
}

tosa::ExperimentConfig build_config(const CommonOptions& o) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw std::invalid_argument("cannot open config file: " + o.config_path);
    doc = json::parse(in);
  }
  for (const auto& s : o.sets) tosa::apply_override(doc, s);
  if (o.seed) doc["experiment"]["master_seed"] = *o.seed;
  if (!o.ks.empty()) doc["experiment"]["k_list"] = o.ks;
  if (!o.policies.empty()) doc["experiment"]["policies"] = o.policies;
  if (!o.out.empty()) doc["experiment"]["output_dir"] = o.out;
  return tosa::load_config(doc);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

tosa::QNetworkParams read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return tosa::load_checkpoint(in);
}

std::string stem(const char* prefix, std::size_t k, std::size_t rep) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_k%02zu_r%02zu", prefix, k, rep);
  return buf;
}

int run_campaign_cmd(const CommonOptions& o) {
  const auto cfg = build_config(o);
  const auto result = tosa::run_campaign(cfg);
  std::ostringstream summary;
  tosa::write_summary_csv(summary, result.summary, tosa::provenance_line(cfg));
  std::cout << summary.str();
  for (const auto& f : result.failures) {
    std::cerr << "cell k=" << f.k << " replicate=" << f.replicate << " failed: " << f.message
              << '\n';
  }
  return result.complete() ? 0 : 1;
}

int run_train_cmd(const CommonOptions& o, std::size_t replicate) {
  const auto cfg = build_config(o);
  const bool shared = cfg.training_mode == tosa::TrainingMode::kShared;
  const std::vector<std::size_t> ks = shared ? cfg.k_list : std::vector<std::size_t>{cfg.k_list.front()};
  const std::size_t key_k = shared ? 0 : ks.front();
  const auto trained =
      tosa::train_agent(cfg, ks, tosa::training_seed(cfg.master_seed, key_k, replicate));
  const fs::path root(cfg.output_dir);
  const std::string name = shared ? stem("train_shared", 0, replicate) : stem("train", key_k, replicate);
  std::ostringstream curve, ckpt;
  curve << tosa::provenance_line(cfg) << '\n';
  tosa::write_training_curve(curve, trained.curve);
  tosa::save_checkpoint(ckpt, trained.params);
  write_text(root / (name + ".csv"), curve.str());
  write_text(root / (name + ".qnet"), ckpt.str());
  std::cout << "wrote " << (root / (name + ".qnet")).string() << '\n';
  return 0;
}

int run_eval_cmd(const CommonOptions& o, const std::string& checkpoint) {
  const auto cfg = build_config(o);
  std::optional<tosa::QNetworkParams> params;
  if (cfg.has_policy(tosa::PolicyKind::kTosaTrained)) {
    if (checkpoint.empty()) throw std::invalid_argument("eval: tosa_trained needs --checkpoint");
    params = read_checkpoint(checkpoint);
  }
  const std::string hash = tosa::config_hash(cfg.source);
  std::vector<tosa::EpisodeRecord> records;
  for (std::size_t k : cfg.k_list) {
    for (std::size_t rep = 0; rep < cfg.n_replicates; ++rep) {
      for (std::size_t ep = 0; ep < cfg.n_eval_episodes; ++ep) {
        const auto seeds = tosa::eval_seeds(cfg.master_seed, k, rep, ep);
        for (auto policy : cfg.policies) {
          const auto outcome = tosa::run_episode(cfg, k, seeds, policy, params ? &*params : nullptr);
          records.push_back({k, rep, ep, policy, outcome.metrics, outcome.oracle_agreement,
                             outcome.success_probability, hash});
        }
      }
    }
  }
  const auto rows = tosa::aggregate(records);
  const std::string prov = tosa::provenance_line(cfg);
  std::ostringstream episodes, summary;
  tosa::write_episodes_csv(episodes, records, prov);
  tosa::write_summary_csv(summary, rows, prov);
  const fs::path root(cfg.output_dir);
  write_text(root / "eval_episodes.csv", episodes.str());
  write_text(root / "eval_summary.csv", summary.str());
  std::cout << summary.str();
  return 0;
}

int run_timeline_cmd(const CommonOptions& o, const std::string& checkpoint,
                     const std::string& stream_path, std::size_t replicate, std::size_t episode) {
  const auto cfg = build_config(o);
  const std::size_t k = cfg.k_list.front();
  const tosa::PolicyKind policy = cfg.policies.front();
  std::optional<tosa::QNetworkParams> params;
  if (policy == tosa::PolicyKind::kTosaTrained) {
    if (checkpoint.empty()) throw std::invalid_argument("timeline: tosa_trained needs --checkpoint");
    params = read_checkpoint(checkpoint);
  }
  tosa::Environment env(tosa::env_for(cfg, k, cfg.env.traffic.n_effective));
  const auto seeds = tosa::eval_seeds(cfg.master_seed, k, replicate, episode);
  tosa::Observation initial;
  if (!stream_path.empty()) {
    std::ifstream in(stream_path);
    if (!in) throw std::runtime_error("cannot open stream " + stream_path);
    initial = env.reset(tosa::read_stream(in, cfg.env.traffic.payload_bits), seeds);
  } else {
    initial = env.reset(seeds);
  }
  const auto outcome =
      tosa::run_episode(env, initial, policy, params ? &*params : nullptr, cfg.neural.window);
  const std::string prov = tosa::provenance_line(cfg);
  std::ostringstream timeline, log;
  tosa::write_timeline(timeline, tosa::emit_timeline(outcome.log), prov);
  tosa::write_episode_log(log, outcome.log, prov);
  const fs::path root(cfg.output_dir);
  const std::string name = "timeline_k" + std::to_string(k) + "_" + std::string(tosa::to_string(policy));
  write_text(root / (name + ".csv"), timeline.str());
  write_text(root / (name + "_log.csv"), log.str());
  std::cout << timeline.str();
  return 0;
}

int run_stream_cmd(const CommonOptions& o, std::size_t replicate, std::size_t episode) {
  const auto cfg = build_config(o);
  const std::size_t k = cfg.k_list.front();
  const auto env_cfg = tosa::env_for(cfg, k, cfg.env.traffic.n_effective);
  tosa::Rng rng(tosa::eval_seeds(cfg.master_seed, k, replicate, episode).traffic);
  const auto stream = tosa::build_stream(env_cfg.traffic, env_cfg.tti_seconds, rng);
  std::ostringstream text;
  tosa::write_stream(text, stream);
  const fs::path path = fs::path(cfg.output_dir) / ("stream_k" + std::to_string(k) + ".tsv");
  write_text(path, text.str());
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV C&C downlink scheduling simulator"};
  app.require_subcommand(1);

  CommonOptions campaign_opts, train_opts, eval_opts, timeline_opts, stream_opts, config_opts;
  std::string eval_checkpoint, timeline_checkpoint, timeline_stream;
  std::size_t train_rep = 0, timeline_rep = 0, timeline_ep = 0, stream_rep = 0, stream_ep = 0;

  auto* campaign = app.add_subcommand("campaign", "Train and evaluate over the k grid");
  add_common(campaign, campaign_opts);

  auto* train = app.add_subcommand("train", "Train one agent and write its checkpoint");
  add_common(train, train_opts);
  train->add_option("--replicate", train_rep, "Replicate index used for seeding");

  auto* eval = app.add_subcommand("eval", "Evaluate policies on held-out episodes");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_checkpoint, "Trained Q-network checkpoint");

  auto* timeline = app.add_subcommand("timeline", "Per-TTI decision table for one episode");
  add_common(timeline, timeline_opts);
  timeline->add_option("--checkpoint", timeline_checkpoint, "Trained Q-network checkpoint");
  timeline->add_option("--stream", timeline_stream, "Replay an exported packet stream");
  timeline->add_option("--replicate", timeline_rep, "Replicate index used for seeding");
  timeline->add_option("--episode", timeline_ep, "Episode index used for seeding");

  auto* stream = app.add_subcommand("stream", "Export a packet stream as a flat table");
  add_common(stream, stream_opts);
  stream->add_option("--replicate", stream_rep, "Replicate index used for seeding");
  stream->add_option("--episode", stream_ep, "Episode index used for seeding");

  auto* config = app.add_subcommand("config", "Print the effective configuration");
  add_common(config, config_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*campaign) return run_campaign_cmd(campaign_opts);
    if (*train) return run_train_cmd(train_opts, train_rep);
    if (*eval) return run_eval_cmd(eval_opts, eval_checkpoint);
    if (*timeline) {
      return run_timeline_cmd(timeline_opts, timeline_checkpoint, timeline_stream, timeline_rep,
                              timeline_ep);
    }
    if (*stream) return run_stream_cmd(stream_opts, stream_rep, stream_ep);
    if (*config) {
      std::cout << build_config(config_opts).source.dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
