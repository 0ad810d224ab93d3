#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tosa/env.hpp"
#include "tosa/neural.hpp"
#include "tosa/rng.hpp"

namespace tosa {

enum class TargetRule { kDdqn, kDqn };

struct AgentConfig {
  double gamma = 0.1;
  double epsilon_start = 1.0;
  double epsilon_min = 0.01;
  // Linear decay from epsilon_start to epsilon_min over this share of episodes.
  double epsilon_decay_fraction = 0.5;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 32;
  std::size_t target_update_k = 200;  // in TTIs
  std::size_t episodes = 1000;
  // Approximate training episode length; the harness sizes training
  // streams as ceil(T / k) effective packets.
  std::size_t ttis_per_episode = 200;
  TargetRule target_rule = TargetRule::kDdqn;
};

struct NeuralConfig {
  NetworkShape shape;
  std::size_t window = 8;
  RmsPropConfig rmsprop;
};

void validate(const AgentConfig& cfg);
void validate(const NeuralConfig& cfg);

// Sliding window of the last W observation vectors, zero-padded at the front
// until W observations have been seen.
class ObservationWindow {
 public:
  explicit ObservationWindow(std::size_t length);

  void reset();
  void push(const Observation& obs);
  // Flat [W x n_in] copy, oldest first.
  std::vector<double> flat() const;
  std::size_t length() const { return length_; }

 private:
  std::size_t length_;
  std::vector<double> buffer_;
};

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

// Fixed-capacity FIFO store of transitions.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Logical index: 0 is the oldest stored transition.
  const Transition& operator[](std::size_t i) const;
  // batch distinct logical indices, uniformly without replacement.
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // physical slot of the oldest item once full
  std::vector<Transition> items_;
};

// Argmax with ties broken toward transmit.
inline int greedy_action(const QValues& q) { return q[1] >= q[0] ? 1 : 0; }

int select_action(QFunction& fn, const QNetworkParams& params, std::span<const double> window,
                  double epsilon, Rng& rng);

double epsilon_at(const AgentConfig& cfg, std::size_t episode);

// y = R for terminal transitions, else R + gamma Q(S', a*; target) with
// a* = argmax_a Q(S', a; online) for DDQN and argmax_a Q(S', a; target) for DQN.
double td_target(QFunction& fn, const QNetworkParams& online, const QNetworkParams& target,
                 const Transition& t, double gamma, TargetRule rule);

struct EpisodeStats {
  std::size_t episode = 0;
  double cumulative_reward = 0.0;
  double epsilon = 0.0;
  double loss_mean = 0.0;  // NaN if no gradient step ran
};

struct TrainResult {
  QNetworkParams params;
  std::vector<EpisodeStats> curve;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(std::size_t episode)
      : std::runtime_error("training diverged in episode " + std::to_string(episode)),
        episode_(episode) {}
  std::size_t episode() const { return episode_; }

 private:
  std::size_t episode_;
};

// Returns a freshly reset environment for the given training episode.
using EnvFactory = std::function<Environment(std::size_t episode)>;

// Double deep Q-learning: per TTI act epsilon-greedily, store the transition,
// take one RMSProp step on a minibatch mean loss, and refresh the target
// network every target_update_k TTIs.
TrainResult train(const EnvFactory& make_env, const AgentConfig& agent_cfg,
                  const NeuralConfig& neural_cfg, std::uint64_t seed);

void write_training_curve(std::ostream& out, const std::vector<EpisodeStats>& curve);

// Always transmits.
inline int bit_oriented_policy() { return 1; }

// Transmits a new command immediately and retries each TTI until it is
// delivered; drops repeats of a delivered command.
int oracle_policy(const Observation& obs, const SimilarityConfig& sim);

// Greedy (epsilon = 0) scheduler over a trained network.
class GreedyScheduler {
 public:
  GreedyScheduler(QNetworkParams params, std::size_t window);

  void reset();
  int act(const Observation& obs);
  const QValues& last_q() const { return last_q_; }

 private:
  QNetworkParams params_;
  QFunction fn_;
  ObservationWindow window_;
  QValues last_q_{};
};

}  // namespace tosa
