#include "tosa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tosa {

#ifndef TOSA_VERSION
#define TOSA_VERSION "unversioned"
#endif

const char* const kCodeVersion = TOSA_VERSION;

namespace fs = std::filesystem;

EpisodeSeeds eval_seeds(std::uint64_t master_seed, std::size_t k, std::size_t replicate,
                        std::size_t episode) {
  const std::uint64_t base = derive_seed(master_seed, {2, k, replicate, episode});
  return {derive_seed(base, {0}), derive_seed(base, {1}), derive_seed(base, {2})};
}

std::uint64_t training_seed(std::uint64_t master_seed, std::size_t k, std::size_t replicate) {
  return derive_seed(master_seed, {1, k, replicate});
}

EnvConfig env_for(const ExperimentConfig& cfg, std::size_t k, std::size_t n_effective) {
  EnvConfig env = cfg.env;
  env.traffic.repeat_k = k;
  env.traffic.n_effective = n_effective;
  if (!env.traffic.explicit_values.empty() && env.traffic.explicit_values.size() != n_effective) {
    // Explicit lists fix N; training streams of another length cycle them.
    std::vector<CommandFields> resized;
    for (std::size_t i = 0; i < n_effective; ++i) {
      resized.push_back(cfg.env.traffic.explicit_values[i % cfg.env.traffic.explicit_values.size()]);
    }
    env.traffic.explicit_values = std::move(resized);
  }
  return env;
}

TrainResult train_agent(const ExperimentConfig& cfg, const std::vector<std::size_t>& train_ks,
                        std::uint64_t seed) {
  if (train_ks.empty()) throw std::invalid_argument("train_agent: no repeat counts given");
  const std::size_t T = cfg.agent.ttis_per_episode;
  EnvFactory factory = [&cfg, &train_ks, T, seed](std::size_t episode) {
    const std::size_t k = train_ks[episode % train_ks.size()];
    const std::size_t n = std::max<std::size_t>(1, (T + k - 1) / k);
    Environment env(env_for(cfg, k, n));
    const std::uint64_t base = derive_seed(seed, {7, episode});
    env.reset(EpisodeSeeds{derive_seed(base, {0}), derive_seed(base, {1}), derive_seed(base, {2})});
    return env;
  };
  return train(factory, cfg.agent, cfg.neural, seed);
}

EpisodeOutcome run_episode(Environment& env, const Observation& initial, PolicyKind policy,
                           const QNetworkParams* trained, std::size_t window) {
  std::optional<GreedyScheduler> greedy;
  if (policy == PolicyKind::kTosaTrained) {
    if (!trained) throw std::invalid_argument("run_episode: tosa_trained needs parameters");
    greedy.emplace(*trained, window);
  }
  const SimilarityConfig& sim = env.config().similarity;
  Observation obs = initial;
  std::size_t agree = 0;
  std::size_t steps = 0;
  while (!env.done()) {
    int action = 1;
    switch (policy) {
      case PolicyKind::kTosaTrained:
        action = greedy->act(obs);
        break;
      case PolicyKind::kBitOriented:
        action = bit_oriented_policy();
        break;
      case PolicyKind::kOracle:
        action = oracle_policy(obs, sim);
        break;
    }
    agree += action == oracle_policy(obs, sim) ? 1 : 0;
    ++steps;
    obs = env.step(action).next_observation;
  }
  EpisodeOutcome out;
  out.metrics = env.metrics();
  out.log = env.state().log;
  out.oracle_agreement = static_cast<double>(agree) / static_cast<double>(steps);
  out.success_probability = env.success_probability();
  return out;
}

EpisodeOutcome run_episode(const ExperimentConfig& cfg, std::size_t k, const EpisodeSeeds& seeds,
                           PolicyKind policy, const QNetworkParams* trained) {
  Environment env(env_for(cfg, k, cfg.env.traffic.n_effective));
  const Observation initial = env.reset(seeds);
  return run_episode(env, initial, policy, trained, cfg.neural.window);
}

Stat describe(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("describe: no values");
  Stat s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.se = s.std / std::sqrt(static_cast<double>(s.n));
  }
  s.degenerate = s.n == 1;
  s.ci_low = s.mean - 1.96 * s.se;
  s.ci_high = s.mean + 1.96 * s.se;
  return s;
}

std::vector<SummaryRow> aggregate(const std::vector<EpisodeRecord>& records) {
  std::map<std::pair<std::size_t, int>, std::vector<const EpisodeRecord*>> groups;
  for (const auto& r : records) groups[{r.k, static_cast<int>(r.policy)}].push_back(&r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, group] : groups) {
    SummaryRow row;
    row.k = key.first;
    row.policy = static_cast<PolicyKind>(key.second);
    row.config_hash = group.front()->config_hash;
    std::vector<double> tpe, rate, reward, agreement;
    for (const EpisodeRecord* r : group) {
      if (r->config_hash != row.config_hash) {
        throw std::invalid_argument("aggregate: records for k=" + std::to_string(row.k) +
                                    " mix config hashes");
      }
      tpe.push_back(r->metrics.transmissions_per_effective_packet);
      rate.push_back(r->metrics.effective_rate);
      reward.push_back(r->metrics.cumulative_reward);
      agreement.push_back(r->oracle_agreement);
      row.total_runs += r->metrics.n_effective;
      row.total_deliveries += r->metrics.effective_deliveries;
    }
    row.transmissions_per_effective_packet = describe(tpe);
    row.effective_rate = describe(rate);
    row.cumulative_reward = describe(reward);
    row.oracle_agreement = describe(agreement);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("not a number: " + s);
  return v;
}

std::size_t parse_size(const std::string& s) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str()) throw std::runtime_error("not an integer: " + s);
  return static_cast<std::size_t>(v);
}

void write_stat_header(std::ostream& out, const char* name) {
  out << ',' << name << "_mean," << name << "_std," << name << "_se," << name << "_ci_low,"
      << name << "_ci_high";
}

void write_stat(std::ostream& out, const Stat& s) {
  out << ',' << fmt17(s.mean) << ',' << fmt17(s.std) << ',' << fmt17(s.se) << ','
      << fmt17(s.ci_low) << ',' << fmt17(s.ci_high);
}

std::string cell_stem(std::size_t k, std::size_t rep) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "k%02zu_r%02zu", k, rep);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string provenance_line(const ExperimentConfig& cfg) {
  return "# master_seed=" + std::to_string(cfg.master_seed) +
         " config_hash=" + config_hash(cfg.source) + " version=" + kCodeVersion;
}

void write_episode_log(std::ostream& out, const std::vector<LogRow>& log,
                       const std::string& provenance) {
  out << provenance << '\n';
  out << "tti,run_id,action,success,L,f_L,I,g_I,reward,deadline_violation\n";
  for (const auto& r : log) {
    out << r.tti << ',' << r.run_id << ',' << r.action << ',' << (r.success ? 1 : 0) << ','
        << fmt17(r.similarity) << ',' << fmt17(r.similarity_score) << ',' << fmt17(r.aoi_s)
        << ',' << fmt17(r.freshness) << ',' << fmt17(r.reward) << ','
        << (r.deadline_violation ? 1 : 0) << '\n';
  }
}

std::vector<LogRow> read_episode_log(std::istream& in) {
  std::vector<LogRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("tti,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw std::runtime_error("episode log: expected 10 columns: " + line);
    LogRow r;
    r.tti = parse_size(f[0]);
    r.run_id = parse_size(f[1]);
    r.action = static_cast<int>(parse_size(f[2]));
    r.success = f[3] == "1";
    r.similarity = parse_double(f[4]);
    r.similarity_score = parse_double(f[5]);
    r.aoi_s = parse_double(f[6]);
    r.freshness = parse_double(f[7]);
    r.reward = parse_double(f[8]);
    r.deadline_violation = f[9] == "1";
    rows.push_back(r);
  }
  return rows;
}

EpisodeMetrics metrics_from_log(const std::vector<LogRow>& log) {
  if (log.empty()) throw std::invalid_argument("metrics_from_log: empty log");
  EpisodeMetrics m;
  std::set<std::size_t> delivered;
  std::size_t max_run = 0;
  for (const auto& r : log) {
    m.transmit_count += r.action == 1 ? 1 : 0;
    if (r.success) delivered.insert(r.run_id);
    max_run = std::max(max_run, r.run_id);
    m.cumulative_reward += r.reward;
    m.deadline_violations += r.deadline_violation ? 1 : 0;
  }
  m.n_ttis = log.size();
  m.n_effective = max_run + 1;
  m.effective_deliveries = delivered.size();
  const auto n = static_cast<double>(m.n_effective);
  m.effective_rate = static_cast<double>(m.effective_deliveries) / n;
  m.transmissions_per_effective_packet = static_cast<double>(m.transmit_count) / n;
  return m;
}

void write_episodes_csv(std::ostream& out, const std::vector<EpisodeRecord>& records,
                        const std::string& provenance) {
  out << provenance << '\n';
  out << "k,replicate,episode,policy,n_effective,n_ttis,transmit_count,effective_deliveries,"
         "effective_rate,transmissions_per_effective_packet,cumulative_reward,"
         "deadline_violations,oracle_agreement,success_probability\n";
  for (const auto& r : records) {
    const auto& m = r.metrics;
    out << r.k << ',' << r.replicate << ',' << r.episode << ',' << to_string(r.policy) << ','
        << m.n_effective << ',' << m.n_ttis << ',' << m.transmit_count << ','
        << m.effective_deliveries << ',' << fmt17(m.effective_rate) << ','
        << fmt17(m.transmissions_per_effective_packet) << ',' << fmt17(m.cumulative_reward) << ','
        << m.deadline_violations << ',' << fmt17(r.oracle_agreement) << ','
        << fmt17(r.success_probability) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::string& provenance) {
  out << provenance << '\n';
  out << "k,policy,n_episodes";
  write_stat_header(out, "transmissions_per_effective_packet");
  write_stat_header(out, "effective_rate");
  write_stat_header(out, "cumulative_reward");
  write_stat_header(out, "oracle_agreement");
  out << ",total_runs,total_deliveries,degenerate\n";
  for (const auto& r : rows) {
    out << r.k << ',' << to_string(r.policy) << ',' << r.effective_rate.n;
    write_stat(out, r.transmissions_per_effective_packet);
    write_stat(out, r.effective_rate);
    write_stat(out, r.cumulative_reward);
    write_stat(out, r.oracle_agreement);
    out << ',' << r.total_runs << ',' << r.total_deliveries << ','
        << (r.effective_rate.degenerate ? 1 : 0) << '\n';
  }
}

std::vector<TimelineRow> emit_timeline(const std::vector<LogRow>& log) {
  std::vector<TimelineRow> rows;
  rows.reserve(log.size());
  for (const auto& r : log) {
    TimelineRow t;
    t.tti = r.tti;
    t.run_id = r.run_id;
    t.action = r.action;
    t.outcome = r.action == 0 ? Outcome::kDrop : (r.success ? Outcome::kSuccess : Outcome::kFailure);
    rows.push_back(t);
  }
  return rows;
}

void write_timeline(std::ostream& out, const std::vector<TimelineRow>& rows,
                    const std::string& provenance) {
  out << provenance << '\n';
  out << "tti,run_id,action,outcome\n";
  for (const auto& r : rows) {
    const char* outcome = r.outcome == Outcome::kDrop      ? "drop"
                          : r.outcome == Outcome::kSuccess ? "success"
                                                           : "failure";
    out << r.tti << ',' << r.run_id << ',' << r.action << ',' << outcome << '\n';
  }
}

CampaignResult run_campaign(const ExperimentConfig& cfg, bool write_files) {
  CampaignResult result;
  result.config_hash = config_hash(cfg.source);
  const std::string provenance = provenance_line(cfg);
  const fs::path root(cfg.output_dir);
  if (write_files) {
    fs::create_directories(root / "logs");
    if (cfg.has_policy(PolicyKind::kTosaTrained)) fs::create_directories(root / "train");
  }

  const bool needs_training = cfg.has_policy(PolicyKind::kTosaTrained);
  const bool shared = cfg.training_mode == TrainingMode::kShared;

  struct Cell {
    std::size_t k;
    std::size_t replicate;
    std::vector<EpisodeRecord> records;
    std::optional<std::string> error;
  };
  std::vector<Cell> cells;
  for (std::size_t k : cfg.k_list) {
    for (std::size_t rep = 0; rep < cfg.n_replicates; ++rep) cells.push_back({k, rep, {}, {}});
  }

  auto save_training = [&](const std::string& stem, const TrainResult& trained) {
    if (!write_files) return;
    std::ostringstream curve;
    curve << provenance << '\n';
    write_training_curve(curve, trained.curve);
    write_file(root / "train" / (stem + ".csv"), curve.str());
    std::ostringstream ckpt;
    save_checkpoint(ckpt, trained.params);
    write_file(root / "train" / (stem + ".qnet"), ckpt.str());
  };

  // Workers pull indices from a shared counter; results land in fixed slots,
  // so output order does not depend on scheduling.
  auto parallel_for = [&](std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(cfg.threads, count);
    if (workers <= 1) {
      for (std::size_t i = 0; i < count; ++i) body(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      });
    }
    for (auto& t : pool) t.join();
  };

  std::vector<std::optional<QNetworkParams>> shared_models(cfg.n_replicates);
  std::vector<std::string> shared_errors(cfg.n_replicates);
  if (needs_training && shared) {
    parallel_for(cfg.n_replicates, [&](std::size_t rep) {
      try {
        TrainResult trained = train_agent(cfg, cfg.k_list, training_seed(cfg.master_seed, 0, rep));
        char stem[32];
        std::snprintf(stem, sizeof stem, "shared_r%02zu", rep);
        save_training(stem, trained);
        shared_models[rep] = std::move(trained.params);
      } catch (const std::exception& e) {
        shared_errors[rep] = e.what();
      }
    });
  }

  parallel_for(cells.size(), [&](std::size_t index) {
    Cell& cell = cells[index];
    try {
      std::optional<QNetworkParams> params;
      if (needs_training) {
        if (shared) {
          if (!shared_models[cell.replicate]) {
            throw std::runtime_error("shared training failed: " + shared_errors[cell.replicate]);
          }
          params = shared_models[cell.replicate];
        } else {
          TrainResult trained = train_agent(
              cfg, {cell.k}, training_seed(cfg.master_seed, cell.k, cell.replicate));
          save_training(cell_stem(cell.k, cell.replicate), trained);
          params = std::move(trained.params);
        }
      }
      for (std::size_t ep = 0; ep < cfg.n_eval_episodes; ++ep) {
        const EpisodeSeeds seeds = eval_seeds(cfg.master_seed, cell.k, cell.replicate, ep);
        for (PolicyKind policy : cfg.policies) {
          const EpisodeOutcome outcome =
              run_episode(cfg, cell.k, seeds, policy, params ? &*params : nullptr);
          EpisodeRecord rec;
          rec.k = cell.k;
          rec.replicate = cell.replicate;
          rec.episode = ep;
          rec.policy = policy;
          rec.metrics = outcome.metrics;
          rec.oracle_agreement = outcome.oracle_agreement;
          rec.success_probability = outcome.success_probability;
          rec.config_hash = result.config_hash;
          cell.records.push_back(rec);
          if (write_files) {
            char name[96];
            std::snprintf(name, sizeof name, "%s_e%02zu_%s.csv",
                          cell_stem(cell.k, cell.replicate).c_str(), ep,
                          std::string(to_string(policy)).c_str());
            std::ostringstream log;
            write_episode_log(log, outcome.log, provenance);
            write_file(root / "logs" / name, log.str());
          }
        }
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  nlohmann::json cell_manifest = nlohmann::json::array();
  for (const Cell& cell : cells) {
    if (cell.error) {
      result.failures.push_back({cell.k, cell.replicate, *cell.error});
      continue;
    }
    result.records.insert(result.records.end(), cell.records.begin(), cell.records.end());
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t ep = 0; ep < cfg.n_eval_episodes; ++ep) {
      const EpisodeSeeds s = eval_seeds(cfg.master_seed, cell.k, cell.replicate, ep);
      seeds.push_back({{"traffic", s.traffic}, {"geometry", s.geometry}, {"fading", s.fading}});
    }
    nlohmann::json entry{{"k", cell.k}, {"replicate", cell.replicate}, {"eval_seeds", seeds}};
    if (needs_training) {
      entry["training_seed"] =
          training_seed(cfg.master_seed, shared ? 0 : cell.k, cell.replicate);
    }
    cell_manifest.push_back(entry);
  }
  if (!result.records.empty()) result.summary = aggregate(result.records);

  if (write_files) {
    std::ostringstream episodes;
    write_episodes_csv(episodes, result.records, provenance);
    write_file(root / "episodes.csv", episodes.str());
    std::ostringstream summary;
    write_summary_csv(summary, result.summary, provenance);
    write_file(root / "summary.csv", summary.str());

    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : result.failures) {
      failures.push_back({{"k", f.k}, {"replicate", f.replicate}, {"error", f.message}});
    }
    nlohmann::json manifest{
        {"version", kCodeVersion},
        {"master_seed", cfg.master_seed},
        {"config_hash", result.config_hash},
        {"status", result.complete() ? "complete" : "incomplete"},
        {"failures", failures},
        {"cells", cell_manifest},
        {"config", cfg.source},
    };
    write_file(root / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

}  // namespace tosa
