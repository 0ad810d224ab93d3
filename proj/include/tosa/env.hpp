#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "tosa/channel.hpp"
#include "tosa/rng.hpp"
#include "tosa/semantics.hpp"
#include "tosa/traffic.hpp"

namespace tosa {

// Which packet the reward's L is measured against.
enum class SimilarityReference {
  kLastDelivered,   // the command the UAV currently holds
  kPreviousPacket,  // the immediately preceding packet in the stream
};

// Test hook that pins decoding outcomes and the SNR (to the threshold, or just
// below it); kNone is the physical channel.
enum class LinkOverride { kNone, kAlwaysSuccess, kAlwaysFail };

struct EnvConfig {
  ChannelParams channel;
  double height_m = 100.0;
  double ground_radius_m = 500.0;
  // Pins the horizontal offset instead of sampling it per episode.
  std::optional<double> fixed_offset_m;
  DatasetConfig traffic;
  SimilarityConfig similarity;
  double tti_seconds = 1e-3;
  SimilarityReference reference = SimilarityReference::kLastDelivered;
  LinkOverride link_override = LinkOverride::kNone;

  AoiConfig aoi() const {
    return {tti_seconds, static_cast<double>(traffic.payload_bits), channel.bandwidth_hz};
  }
};

void validate(const EnvConfig& cfg);

struct EpisodeSeeds {
  std::uint64_t traffic = 0;
  std::uint64_t geometry = 0;
  std::uint64_t fading = 0;  // key of the per-TTI counter stream
};

inline constexpr std::size_t kObservationSize = 5;
using FeatureVector = std::array<double, kObservationSize>;

// What the scheduler sees before deciding on the pending packet.
struct Observation {
  double similarity_score = 0.0;  // f(L) of the pending packet vs its predecessor
  double freshness = 1.0;         // g(I) of this run's delivery, 1 if none yet
  int last_action = 0;
  bool last_success = false;
  bool run_delivered = false;  // some packet of the pending packet's run was delivered

  FeatureVector features() const {
    return {similarity_score, freshness, static_cast<double>(last_action),
            last_success ? 1.0 : 0.0, run_delivered ? 1.0 : 0.0};
  }
};

// One per-TTI trace row. aoi_s and freshness are NaN unless the packet was
// delivered in this TTI.
struct LogRow {
  std::size_t tti = 0;
  std::size_t run_id = 0;
  int action = 0;
  bool success = false;
  double similarity = 0.0;
  double similarity_score = 0.0;
  double aoi_s = 0.0;
  double freshness = 0.0;
  double reward = 0.0;
  bool deadline_violation = false;
};

struct StepResult {
  double reward = 0.0;
  Observation next_observation;
  bool transmitted = false;
  bool success = false;
  bool terminal = false;
  std::size_t tti_index = 0;
  std::size_t run_id = 0;
  LinkRealization link;  // default-initialized for drops
};

struct EpisodeState {
  std::vector<CncPacket> stream;
  std::size_t cursor = 0;
  Geometry geometry;
  CounterStream fading;
  std::vector<bool> delivered_runs;
  std::vector<std::size_t> attempt_counts;
  std::vector<double> run_freshness;
  std::optional<CommandFields> reference;  // last delivered command
  int last_action = 0;
  bool last_success = false;
  std::size_t transmit_count = 0;
  std::size_t deadline_violations = 0;
  double cumulative_reward = 0.0;
  std::vector<LogRow> log;

  std::size_t n_effective() const { return stream.empty() ? 0 : stream.back().run_id + 1; }
  bool finished() const { return cursor >= stream.size(); }
};

struct EpisodeMetrics {
  std::size_t transmit_count = 0;
  std::size_t effective_deliveries = 0;
  std::size_t n_effective = 0;
  std::size_t n_ttis = 0;
  double effective_rate = 0.0;
  double transmissions_per_effective_packet = 0.0;
  double cumulative_reward = 0.0;
  std::size_t deadline_violations = 0;
};

// Throws std::logic_error if the episode has not finished.
EpisodeMetrics episode_metrics(const EpisodeState& state);

// One TTI-granular episode over a k*N packet stream. Geometry is fixed per
// episode; fading for TTI t is draw t of a counter stream, so dropped TTIs
// consume no randomness and different policies see the same channel.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  Observation reset(const EpisodeSeeds& seeds);
  // Replays an explicit (e.g. imported) stream.
  Observation reset(std::vector<CncPacket> stream, const EpisodeSeeds& seeds);

  // action: 0 = drop, 1 = transmit. Throws std::logic_error when finished.
  StepResult step(int action);

  bool done() const { return state_.finished(); }
  // Observation of the pending packet; throws std::logic_error when finished.
  Observation current_observation() const;
  const EpisodeState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  EpisodeMetrics metrics() const { return episode_metrics(state_); }
  // Closed-form per-attempt success probability at this episode's geometry.
  double success_probability() const;

 private:
  Observation observe(std::size_t index) const;

  EnvConfig cfg_;
  AoiConfig aoi_;
  EpisodeState state_;
};

}  // namespace tosa
