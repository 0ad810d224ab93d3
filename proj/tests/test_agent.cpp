#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tosa/agent.hpp"

using namespace tosa;

namespace {

// Two runs of a yaw step, each repeated twice, with every transmission decoded.
EnvConfig toy_config() {
  EnvConfig cfg;
  cfg.traffic.n_effective = 2;
  cfg.traffic.repeat_k = 2;
  cfg.traffic.explicit_values = {{0, 0, 30, 3}, {0, 0, 0, 3}};
  cfg.link_override = LinkOverride::kAlwaysSuccess;
  return cfg;
}

double discounted_return(const EnvConfig& cfg, unsigned mask, double gamma) {
  Environment env(cfg);
  env.reset(EpisodeSeeds{1, 2, 3});
  double total = 0.0, weight = 1.0;
  for (std::size_t t = 0; !env.done(); ++t, weight *= gamma) {
    total += weight * env.step(static_cast<int>((mask >> t) & 1u)).reward;
  }
  return total;
}

}  // namespace

TEST_CASE("greedy action breaks ties toward transmit") {
  CHECK(greedy_action({0.0, 0.0}) == 1);
  CHECK(greedy_action({1.0, 0.5}) == 0);
  CHECK(greedy_action({-1.0, 0.5}) == 1);
}

TEST_CASE("epsilon-greedy exploration") {
  QFunction fn({5, 4, 1});
  const QNetworkParams p({5, 4, 1});  // zeros: greedy choice is transmit
  const std::vector<double> window(2 * 5, 0.0);
  Rng rng(1);
  int ones = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ones += select_action(fn, p, window, 1.0, rng);
  CHECK(std::abs(static_cast<double>(ones) / n - 0.5) < 0.02);
  for (int i = 0; i < 100; ++i) CHECK(select_action(fn, p, window, 0.0, rng) == 1);
}

TEST_CASE("epsilon schedule decays linearly then holds") {
  AgentConfig cfg;
  cfg.episodes = 100;
  CHECK(epsilon_at(cfg, 0) == 1.0);
  CHECK(epsilon_at(cfg, 25) == doctest::Approx(0.505).epsilon(1e-12).scale(0));
  CHECK(epsilon_at(cfg, 50) == doctest::Approx(0.01).epsilon(1e-12).scale(0));
  CHECK(epsilon_at(cfg, 99) == doctest::Approx(0.01).epsilon(1e-12).scale(0));
}

TEST_CASE("TD targets") {
  const NetworkShape s{5, 6, 1};
  Rng rng(4);
  QFunction fn(s);
  const QNetworkParams online = QNetworkParams::initialize(s, rng);
  const QNetworkParams other = QNetworkParams::initialize(s, rng);
  Transition t;
  t.state.assign(3 * 5, 0.1);
  t.next_state.assign(3 * 5, 0.0);
  for (double& v : t.next_state) v = rng.uniform(-1, 1);
  t.reward = 0.7;

  CHECK(td_target(fn, online, other, t, 0.0, TargetRule::kDdqn) == 0.7);
  t.terminal = true;
  CHECK(td_target(fn, online, other, t, 0.5, TargetRule::kDdqn) == 0.7);
  t.terminal = false;

  // With identical networks DDQN reduces to the max form.
  const QValues q = forward(online, t.next_state);
  const double max_form = 0.7 + 0.1 * std::max(q[0], q[1]);
  CHECK(td_target(fn, online, online, t, 0.1, TargetRule::kDdqn) == doctest::Approx(max_form).epsilon(1e-15).scale(0));
  CHECK(td_target(fn, online, online, t, 0.1, TargetRule::kDqn) == doctest::Approx(max_form).epsilon(1e-15).scale(0));

  // DDQN picks with the online net and evaluates with the target net.
  const QValues qt = forward(other, t.next_state);
  const int a_online = greedy_action(q);
  CHECK(td_target(fn, online, other, t, 0.1, TargetRule::kDdqn) ==
        doctest::Approx(0.7 + 0.1 * qt[static_cast<std::size_t>(a_online)]).epsilon(1e-15).scale(0));
  CHECK(td_target(fn, online, other, t, 0.1, TargetRule::kDqn) ==
        doctest::Approx(0.7 + 0.1 * std::max(qt[0], qt[1])).epsilon(1e-15).scale(0));
}

TEST_CASE("observation window pads with zeros and keeps the newest last") {
  ObservationWindow w(3);
  Observation a;
  a.similarity_score = 0.5;
  a.last_action = 1;
  w.push(a);
  auto flat = w.flat();
  REQUIRE(flat.size() == 15);
  for (std::size_t i = 0; i < 10; ++i) CHECK(flat[i] == 0.0);
  CHECK(flat[10] == 0.5);
  CHECK(flat[12] == 1.0);
  Observation b;
  b.similarity_score = -0.25;
  w.push(b);
  w.push(b);
  w.push(b);
  flat = w.flat();
  CHECK(flat[0] == -0.25);
  w.reset();
  for (double v : w.flat()) CHECK(v == 0.0);
}

TEST_CASE("replay memory is FIFO and samples without replacement") {
  ReplayMemory mem(5);
  for (int i = 0; i < 8; ++i) {
    Transition t;
    t.reward = i;
    mem.push(t);
  }
  REQUIRE(mem.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(mem[i].reward == static_cast<double>(i + 3));

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto idx = mem.sample(5, rng);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 5);
  }
  CHECK_THROWS_AS(mem.sample(6, rng), std::invalid_argument);

  // Uniformity: each index of 10 appears in a 3-sample with probability 0.3.
  ReplayMemory big(10);
  for (int i = 0; i < 10; ++i) big.push(Transition{});
  std::vector<int> counts(10, 0);
  const int n = 30000;
  for (int trial = 0; trial < n; ++trial) {
    for (std::size_t i : big.sample(3, rng)) ++counts[i];
  }
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.3) < 0.015);
}

TEST_CASE("baseline and oracle policies") {
  CHECK(bit_oriented_policy() == 1);
  SimilarityConfig sim;
  Observation obs;
  obs.similarity_score = 0.9;
  CHECK(oracle_policy(obs, sim) == 1);
  obs.similarity_score = -0.98;
  obs.run_delivered = false;
  CHECK(oracle_policy(obs, sim) == 1);
  obs.run_delivered = true;
  CHECK(oracle_policy(obs, sim) == 0);
}

TEST_CASE("toy episode: the oracle sequence is the unique discounted-return maximizer") {
  const EnvConfig cfg = toy_config();
  const double gamma = AgentConfig{}.gamma;
  double best = -1e9;
  unsigned best_mask = 0;
  int ties = 0;
  for (unsigned mask = 0; mask < 16; ++mask) {
    const double r = discounted_return(cfg, mask, gamma);
    if (r > best + 1e-12) {
      best = r;
      best_mask = mask;
      ties = 0;
    } else if (std::abs(r - best) <= 1e-12) {
      ++ties;
    }
  }
  CHECK(best_mask == 0b0101u);  // transmit at t = 0 and t = 2
  CHECK(ties == 0);
  // Undiscounted, any schedule with one delivery per run is optimal.
  for (unsigned mask : {0b0110u, 0b1001u, 0b1010u}) {
    CHECK(discounted_return(cfg, mask, 1.0) == doctest::Approx(discounted_return(cfg, 0b0101u, 1.0)).epsilon(1e-15).scale(0));
  }
}

TEST_CASE("training learns the toy schedule") {
  const EnvConfig cfg = toy_config();
  AgentConfig agent;
  agent.episodes = 400;
  agent.batch_size = 8;
  agent.replay_capacity = 1000;
  agent.target_update_k = 20;
  NeuralConfig neural;
  neural.shape = {5, 8, 1};
  neural.window = 2;
  neural.rmsprop.learning_rate = 3e-3;
  auto make_env = [&](std::size_t) {
    Environment env(cfg);
    env.reset(EpisodeSeeds{1, 2, 3});
    return env;
  };
  const TrainResult result = train(make_env, agent, neural, 11);
  CHECK(result.curve.size() == 400);
  CHECK(result.curve.front().epsilon == 1.0);

  GreedyScheduler sched(result.params, neural.window);
  Environment env = make_env(0);
  Observation obs = env.current_observation();
  std::vector<int> actions;
  while (!env.done()) {
    const int a = sched.act(obs);
    actions.push_back(a);
    obs = env.step(a).next_observation;
  }
  CHECK(actions == std::vector<int>{1, 0, 1, 0});

  // Same seed, same network.
  const TrainResult again = train(make_env, agent, neural, 11);
  CHECK(again.params == result.params);

  std::ostringstream curve;
  write_training_curve(curve, result.curve);
  CHECK(curve.str().rfind("episode,cumulative_reward,epsilon,loss_mean\n", 0) == 0);
}

TEST_CASE("divergence is reported") {
  const EnvConfig cfg = toy_config();
  AgentConfig agent;
  agent.episodes = 50;
  agent.batch_size = 2;
  agent.replay_capacity = 10;
  NeuralConfig neural;
  neural.shape = {5, 4, 1};
  neural.window = 2;
  neural.rmsprop.learning_rate = 1e300;
  auto make_env = [&](std::size_t) {
    Environment env(cfg);
    env.reset(EpisodeSeeds{1, 2, 3});
    return env;
  };
  CHECK_THROWS_AS(train(make_env, agent, neural, 1), TrainingDiverged);
}
