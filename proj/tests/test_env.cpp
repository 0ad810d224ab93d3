#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tosa/agent.hpp"
#include "tosa/env.hpp"

using namespace tosa;

namespace {

EnvConfig yaw_example(std::size_t k, LinkOverride link = LinkOverride::kNone) {
  EnvConfig cfg;
  cfg.traffic.n_effective = 3;
  cfg.traffic.repeat_k = k;
  cfg.traffic.explicit_values = {{0, 0, 30, 3}, {0, 0, 0, 3}, {0, 0, 30, 3}};
  cfg.link_override = link;
  return cfg;
}

EnvConfig random_traffic(std::size_t n, std::size_t k, double offset_m) {
  EnvConfig cfg;
  cfg.traffic.n_effective = n;
  cfg.traffic.repeat_k = k;
  cfg.fixed_offset_m = offset_m;
  return cfg;
}

EpisodeSeeds seeds(std::uint64_t s) { return {s, s + 1, s + 2}; }

}  // namespace

TEST_CASE("reset is deterministic and starts with no history") {
  EnvConfig cfg;
  cfg.traffic.n_effective = 20;
  cfg.traffic.repeat_k = 3;
  Environment a(cfg), b(cfg);
  const Observation oa = a.reset(seeds(10));
  b.reset(seeds(10));
  REQUIRE(a.state().stream.size() == 60);
  for (std::size_t i = 0; i < 60; ++i) CHECK(a.state().stream[i].fields == b.state().stream[i].fields);
  CHECK(a.state().geometry.distance_m == b.state().geometry.distance_m);
  CHECK_FALSE(oa.run_delivered);
  CHECK(oa.last_action == 0);
  CHECK_FALSE(oa.last_success);
  CHECK(oa.freshness == 1.0);
  CHECK(oa.similarity_score == similarity_score(first_packet_similarity(cfg.similarity), cfg.similarity));
}

TEST_CASE("drop: no reward, no channel use") {
  Environment env(yaw_example(4));
  env.reset(seeds(1));
  const StepResult r = env.step(0);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.success);
  CHECK_FALSE(r.transmitted);
  CHECK(r.link.snr_linear == 0.0);
  CHECK(std::isnan(env.state().log.back().aoi_s));
  CHECK_THROWS_AS(env.step(2), std::invalid_argument);
}

TEST_CASE("rewards on the yaw-step stream with forced success") {
  Environment env(yaw_example(4, LinkOverride::kAlwaysSuccess));
  env.reset(seeds(1));
  const auto& sim = env.config().similarity;
  const double dt = env.config().tti_seconds;

  const StepResult first = env.step(1);
  CHECK(first.success);
  CHECK(first.reward > 0.0);

  // Exact repeat after a delivery: f(0) g(I) < 0.
  const StepResult repeat = env.step(1);
  const LogRow& rep_row = env.state().log.back();
  CHECK(rep_row.similarity == 0.0);
  CHECK(repeat.reward == doctest::Approx(similarity_score(0.0, sim) * (1.0 - rep_row.aoi_s / dt)).epsilon(1e-15).scale(0));
  CHECK(repeat.reward < 0.0);

  env.step(0);
  env.step(0);
  // New run, yaw 30 -> 0: L = 0.1.
  const StepResult fresh = env.step(1);
  const LogRow& row = env.state().log.back();
  CHECK(row.similarity == doctest::Approx(0.1).epsilon(1e-15).scale(0));
  CHECK(fresh.reward == doctest::Approx(similarity_score(0.1, sim) * (1.0 - row.aoi_s / dt)).epsilon(1e-15).scale(0));
  CHECK(fresh.reward > 0.0);
}

TEST_CASE("observation tracks delivery within a run") {
  Environment env(yaw_example(3, LinkOverride::kAlwaysSuccess));
  Observation obs = env.reset(seeds(1));
  CHECK_FALSE(obs.run_delivered);
  obs = env.step(1).next_observation;  // deliver run 0
  CHECK(obs.run_delivered);
  CHECK(obs.last_action == 1);
  CHECK(obs.last_success);
  CHECK(obs.freshness < 1.0);
  CHECK(obs.similarity_score < 0.0);  // repeat of the previous packet
  obs = env.step(0).next_observation;
  CHECK(obs.run_delivered);
  CHECK(obs.last_action == 0);
  obs = env.step(0).next_observation;  // next packet opens run 1
  CHECK_FALSE(obs.run_delivered);
  CHECK(obs.freshness == 1.0);
  CHECK(obs.similarity_score > 0.0);
}

TEST_CASE("retry after a failure is rewarded against the last delivered command") {
  // Find an episode where some run's first attempt fails and a later one in
  // the same run succeeds.
  EnvConfig cfg = random_traffic(30, 4, 450.0);  // p ~ 0.76
  for (SimilarityReference ref : {SimilarityReference::kLastDelivered, SimilarityReference::kPreviousPacket}) {
    cfg.reference = ref;
    bool found = false;
    for (std::uint64_t s = 0; s < 50 && !found; ++s) {
      Environment env(cfg);
      Observation obs = env.reset(seeds(s * 3));
      bool failed_in_run = false;
      std::size_t run = 0;
      while (!env.done()) {
        const int a = oracle_policy(obs, cfg.similarity);
        const StepResult r = env.step(a);
        if (r.run_id != run) {
          run = r.run_id;
          failed_in_run = false;
        }
        if (r.transmitted && !r.success) failed_in_run = true;
        if (r.success && failed_in_run && r.run_id > 0) {
          if (ref == SimilarityReference::kLastDelivered) {
            CHECK(r.reward > 0.0);
          } else {
            CHECK(r.reward < 0.0);
          }
          found = true;
          break;
        }
        obs = r.next_observation;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("episode bookkeeping") {
  Environment env(yaw_example(2));
  env.reset(seeds(3));
  CHECK_THROWS_AS(env.metrics(), std::logic_error);
  while (!env.done()) env.step(0);
  CHECK_THROWS_AS(env.step(1), std::logic_error);
  const EpisodeMetrics m = env.metrics();
  CHECK(m.transmit_count == 0);
  CHECK(m.effective_rate == 0.0);
  CHECK(m.n_ttis == 6);

  Environment ok(yaw_example(5, LinkOverride::kAlwaysSuccess));
  ok.reset(seeds(3));
  double sum = 0.0;
  while (!ok.done()) sum += ok.step(1).reward;
  const EpisodeMetrics all = ok.metrics();
  CHECK(all.transmit_count == 15);
  CHECK(all.effective_rate == 1.0);
  CHECK(all.transmissions_per_effective_packet == 5.0);
  CHECK(all.cumulative_reward == sum);
}

TEST_CASE("reward is nonzero only on delivered transmissions; run_delivered is monotone") {
  EnvConfig cfg = random_traffic(40, 5, 400.0);
  Rng policy_rng(17);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Environment env(cfg);
    Observation obs = env.reset(seeds(100 + s));
    double sum = 0.0;
    std::size_t steps = 0;
    while (!env.done()) {
      const StepResult r = env.step(policy_rng.coin() ? 1 : 0);
      ++steps;
      sum += r.reward;
      if (!(r.transmitted && r.success)) REQUIRE(r.reward == 0.0);
      if (obs.run_delivered && !r.terminal && r.run_id == env.state().stream[r.tti_index + 1].run_id) {
        REQUIRE(r.next_observation.run_delivered);
      }
      obs = r.next_observation;
    }
    CHECK(steps == 200);
    CHECK(env.state().cumulative_reward == sum);
  }
}

TEST_CASE("drops consume no randomness and traces replay exactly") {
  EnvConfig cfg = random_traffic(30, 3, 300.0);
  Environment all(cfg), odd(cfg), again(cfg);
  all.reset(seeds(5));
  odd.reset(seeds(5));
  again.reset(seeds(5));
  while (!all.done()) {
    const std::size_t t = all.state().cursor;
    const StepResult a = all.step(1);
    const StepResult b = odd.step(t % 2 == 1 ? 1 : 0);
    const StepResult c = again.step(1);
    if (t % 2 == 1) CHECK(a.link.fading_power == b.link.fading_power);
    CHECK(a.link.snr_linear == c.link.snr_linear);
    CHECK(a.reward == c.reward);
  }
}

TEST_CASE("oracle effective rate matches the truncated-geometric expectation") {
  const std::size_t k = 3;
  EnvConfig cfg = random_traffic(200, k, 450.0);
  double p = 0.0;
  std::size_t delivered = 0, runs = 0, transmissions = 0;
  for (std::uint64_t s = 0; s < 25; ++s) {
    Environment env(cfg);
    Observation obs = env.reset(seeds(1000 + 3 * s));
    p = env.success_probability();
    while (!env.done()) obs = env.step(oracle_policy(obs, cfg.similarity)).next_observation;
    const auto m = env.metrics();
    delivered += m.effective_deliveries;
    runs += m.n_effective;
    transmissions += m.transmit_count;
  }
  const double q = 1.0 - std::pow(1.0 - p, static_cast<double>(k));
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(runs));
  CHECK(std::abs(static_cast<double>(delivered) / runs - q) < 3.0 * se);
  // Expected attempts per run: sum_{j<k} (1-p)^j = q / p.
  CHECK(static_cast<double>(transmissions) / runs == doctest::Approx(q / p).epsilon(0.02));
}
