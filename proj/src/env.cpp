#include "tosa/env.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace tosa {

void validate(const EnvConfig& cfg) {
  validate(cfg.channel);
  validate(cfg.traffic);
  validate(cfg.similarity);
  validate(cfg.aoi());
  if (!(cfg.height_m > 0)) throw std::invalid_argument("env: height_m must be > 0");
  if (!(cfg.ground_radius_m >= 0)) throw std::invalid_argument("env: ground_radius_m must be >= 0");
  if (cfg.fixed_offset_m && !(*cfg.fixed_offset_m >= 0 && *cfg.fixed_offset_m <= cfg.ground_radius_m)) {
    throw std::invalid_argument("env: fixed_offset_m must lie in [0, ground_radius_m]");
  }
}

EpisodeMetrics episode_metrics(const EpisodeState& state) {
  if (!state.finished()) throw std::logic_error("episode_metrics: episode not finished");
  EpisodeMetrics m;
  m.transmit_count = state.transmit_count;
  for (bool d : state.delivered_runs) m.effective_deliveries += d ? 1 : 0;
  m.n_effective = state.n_effective();
  m.n_ttis = state.stream.size();
  const auto n = static_cast<double>(m.n_effective);
  m.effective_rate = static_cast<double>(m.effective_deliveries) / n;
  m.transmissions_per_effective_packet = static_cast<double>(m.transmit_count) / n;
  m.cumulative_reward = state.cumulative_reward;
  m.deadline_violations = state.deadline_violations;
  return m;
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)), aoi_(cfg_.aoi()) {
  validate(cfg_);
}

Observation Environment::reset(const EpisodeSeeds& seeds) {
  Rng traffic_rng(seeds.traffic);
  return reset(build_stream(cfg_.traffic, cfg_.tti_seconds, traffic_rng), seeds);
}

Observation Environment::reset(std::vector<CncPacket> stream, const EpisodeSeeds& seeds) {
  if (stream.empty()) throw std::invalid_argument("env: empty packet stream");
  state_ = EpisodeState();
  state_.stream = std::move(stream);
  if (cfg_.fixed_offset_m) {
    state_.geometry = make_geometry(cfg_.height_m, *cfg_.fixed_offset_m, cfg_.ground_radius_m);
  } else {
    Rng geometry_rng(seeds.geometry);
    state_.geometry = sample_position(cfg_.ground_radius_m, cfg_.height_m, geometry_rng);
  }
  state_.fading = CounterStream(seeds.fading);
  const std::size_t runs = state_.n_effective();
  state_.delivered_runs.assign(runs, false);
  state_.attempt_counts.assign(runs, 0);
  state_.run_freshness.assign(runs, 1.0);
  state_.log.reserve(state_.stream.size());
  return observe(0);
}

Observation Environment::observe(std::size_t index) const {
  const auto& stream = state_.stream;
  const CncPacket& packet = stream[index];
  Observation obs;
  const double raw = index == 0 ? first_packet_similarity(cfg_.similarity)
                                : raw_similarity(packet, stream[index - 1], cfg_.similarity);
  obs.similarity_score = similarity_score(raw, cfg_.similarity);
  obs.freshness = state_.run_freshness[packet.run_id];
  obs.last_action = state_.last_action;
  obs.last_success = state_.last_success;
  obs.run_delivered = state_.delivered_runs[packet.run_id];
  return obs;
}

Observation Environment::current_observation() const {
  if (state_.finished()) throw std::logic_error("env: no pending packet");
  return observe(state_.cursor);
}

double Environment::success_probability() const {
  return tosa::success_probability(state_.geometry, cfg_.channel);
}

StepResult Environment::step(int action) {
  if (state_.finished()) throw std::logic_error("env: step on a finished episode");
  if (action != 0 && action != 1) throw std::invalid_argument("env: action must be 0 or 1");

  const std::size_t t = state_.cursor;
  const CncPacket& packet = state_.stream[t];
  const auto& sim = cfg_.similarity;

  double raw = first_packet_similarity(sim);
  if (cfg_.reference == SimilarityReference::kLastDelivered) {
    if (state_.reference) raw = raw_similarity(packet.fields, *state_.reference, sim);
  } else if (t > 0) {
    raw = raw_similarity(packet, state_.stream[t - 1], sim);
  }

  StepResult result;
  result.tti_index = t;
  result.run_id = packet.run_id;
  result.transmitted = action == 1;

  LogRow row;
  row.tti = t;
  row.run_id = packet.run_id;
  row.action = action;
  row.similarity = raw;
  row.similarity_score = similarity_score(raw, sim);
  row.aoi_s = std::numeric_limits<double>::quiet_NaN();
  row.freshness = std::numeric_limits<double>::quiet_NaN();

  if (result.transmitted) {
    ++state_.transmit_count;
    ++state_.attempt_counts[packet.run_id];
    LinkRealization link =
        link_from_fading(state_.geometry, cfg_.channel, state_.fading.exponential(t));
    const double threshold = cfg_.channel.snr_threshold_linear;
    if (cfg_.link_override == LinkOverride::kAlwaysSuccess) {
      link.snr_linear = threshold;
      link.success = true;
    } else if (cfg_.link_override == LinkOverride::kAlwaysFail) {
      link.snr_linear = std::nextafter(threshold, 0.0);
      link.success = false;
    }
    result.link = link;
    result.success = link.success;
    if (link.success) {
      row.aoi_s = aoi_of_delivery(link.snr_linear, aoi_);
      const Freshness fresh = freshness_score(row.aoi_s, aoi_);
      row.freshness = fresh.score;
      row.deadline_violation = fresh.deadline_violation;
      state_.deadline_violations += fresh.deadline_violation ? 1 : 0;
      state_.delivered_runs[packet.run_id] = true;
      state_.run_freshness[packet.run_id] = fresh.score;
      state_.reference = packet.fields;
      result.reward = reward(true, true, row.similarity_score, fresh.score);
    }
  }

  row.success = result.success;
  row.reward = result.reward;
  state_.log.push_back(row);
  state_.cumulative_reward += result.reward;
  state_.last_action = action;
  state_.last_success = result.success;
  state_.cursor = t + 1;
  result.terminal = state_.finished();
  result.next_observation = observe(result.terminal ? t : t + 1);
  return result;
}

}  // namespace tosa
