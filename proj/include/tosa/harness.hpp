#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tosa/agent.hpp"
#include "tosa/config.hpp"
#include "tosa/env.hpp"

namespace tosa {

// Seeds for evaluation episode `episode` of replicate `replicate` at repeat
// count k. They do not depend on the policy, so every policy is evaluated on
// the same streams, geometry and fading.
EpisodeSeeds eval_seeds(std::uint64_t master_seed, std::size_t k, std::size_t replicate,
                        std::size_t episode);

// Seed that drives training of the agent for (k, replicate). In shared mode
// callers pass k = 0.
std::uint64_t training_seed(std::uint64_t master_seed, std::size_t k, std::size_t replicate);

// Environment config for repeat count k with n effective packets.
EnvConfig env_for(const ExperimentConfig& cfg, std::size_t k, std::size_t n_effective);

// Trains one agent. train_ks lists the repeat counts used for training
// episodes, cycled by episode index; each training stream holds
// ceil(ttis_per_episode / k) effective packets.
TrainResult train_agent(const ExperimentConfig& cfg, const std::vector<std::size_t>& train_ks,
                        std::uint64_t seed);

struct EpisodeOutcome {
  EpisodeMetrics metrics;
  std::vector<LogRow> log;
  // Share of TTIs where the chosen action equals oracle_policy on the same
  // observation.
  double oracle_agreement = 0.0;
  double success_probability = 0.0;  // closed form at the episode geometry
};

// Runs one full episode under a policy. `trained` is required for
// kTosaTrained and ignored otherwise.
EpisodeOutcome run_episode(const ExperimentConfig& cfg, std::size_t k, const EpisodeSeeds& seeds,
                           PolicyKind policy, const QNetworkParams* trained);
EpisodeOutcome run_episode(Environment& env, const Observation& initial, PolicyKind policy,
                           const QNetworkParams* trained, std::size_t window);

struct EpisodeRecord {
  std::size_t k = 0;
  std::size_t replicate = 0;
  std::size_t episode = 0;
  PolicyKind policy = PolicyKind::kBitOriented;
  EpisodeMetrics metrics;
  double oracle_agreement = 0.0;
  double success_probability = 0.0;
  std::string config_hash;
};

struct Stat {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 when n == 1
  double se = 0.0;
  double ci_low = 0.0;  // 95% normal interval
  double ci_high = 0.0;
  bool degenerate = false;  // n == 1: interval has zero width by construction
};

Stat describe(const std::vector<double>& values);

struct SummaryRow {
  std::size_t k = 0;
  PolicyKind policy = PolicyKind::kBitOriented;
  Stat transmissions_per_effective_packet;
  Stat effective_rate;
  Stat cumulative_reward;
  Stat oracle_agreement;
  std::size_t total_runs = 0;        // effective packets pooled over episodes
  std::size_t total_deliveries = 0;  // delivered effective packets, pooled
  std::string config_hash;
};

// Groups records by (k, policy) in ascending k, then policy order. Records
// with different config hashes in one group are rejected.
std::vector<SummaryRow> aggregate(const std::vector<EpisodeRecord>& records);

struct CellFailure {
  std::size_t k = 0;
  std::size_t replicate = 0;
  std::string message;
};

struct CampaignResult {
  std::vector<EpisodeRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<CellFailure> failures;
  std::string config_hash;
  bool complete() const { return failures.empty(); }
};

// For each k: train (when tosa_trained is requested) and evaluate every
// policy. Writes, under cfg.output_dir:
//   manifest.json                      config, seeds, version, status
//   summary.csv, episodes.csv          aggregated and per-episode metrics
//   logs/k{k}_r{rep}_e{ep}_{policy}.csv per-TTI traces
//   train/k{k}_r{rep}.{csv,qnet}       training curves and checkpoints
// Pass write_files = false to run in memory only.
CampaignResult run_campaign(const ExperimentConfig& cfg, bool write_files = true);

// File-level helpers used by the campaign and the CLI.
std::string provenance_line(const ExperimentConfig& cfg);
void write_episode_log(std::ostream& out, const std::vector<LogRow>& log, const std::string& provenance);
std::vector<LogRow> read_episode_log(std::istream& in);
// Metrics rebuilt from a per-TTI trace alone.
EpisodeMetrics metrics_from_log(const std::vector<LogRow>& log);
void write_episodes_csv(std::ostream& out, const std::vector<EpisodeRecord>& records,
                        const std::string& provenance);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::string& provenance);

enum class Outcome { kDrop, kSuccess, kFailure };

struct TimelineRow {
  std::size_t tti = 0;
  std::size_t run_id = 0;
  int action = 0;
  Outcome outcome = Outcome::kDrop;
};

// Per-TTI decision/outcome table for step plots.
std::vector<TimelineRow> emit_timeline(const std::vector<LogRow>& log);
void write_timeline(std::ostream& out, const std::vector<TimelineRow>& rows,
                    const std::string& provenance);

extern const char* const kCodeVersion;

}  // namespace tosa
