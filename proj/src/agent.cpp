#include "tosa/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <utility>

namespace tosa {

void validate(const AgentConfig& cfg) {
  if (!(cfg.gamma >= 0 && cfg.gamma < 1)) throw std::invalid_argument("agent: gamma in [0, 1)");
  auto in_unit = [](double e) { return e >= 0 && e <= 1; };
  if (!in_unit(cfg.epsilon_start) || !in_unit(cfg.epsilon_min)) {
    throw std::invalid_argument("agent: epsilon values must lie in [0, 1]");
  }
  if (!in_unit(cfg.epsilon_decay_fraction)) {
    throw std::invalid_argument("agent: epsilon_decay_fraction must lie in [0, 1]");
  }
  if (cfg.batch_size < 1 || cfg.batch_size > cfg.replay_capacity) {
    throw std::invalid_argument("agent: requires 1 <= batch_size <= replay_capacity");
  }
  if (cfg.target_update_k < 1) throw std::invalid_argument("agent: target_update_k >= 1");
  if (cfg.ttis_per_episode < 1) throw std::invalid_argument("agent: ttis_per_episode >= 1");
}

void validate(const NeuralConfig& cfg) {
  if (cfg.shape.n_in != kObservationSize) {
    throw std::invalid_argument("neural: n_in must equal the observation size");
  }
  if (cfg.shape.n_h < 1 || cfg.shape.n_l < 1 || cfg.window < 1) {
    throw std::invalid_argument("neural: n_h, n_l and window must be >= 1");
  }
  if (!(cfg.rmsprop.learning_rate >= 0 && cfg.rmsprop.decay >= 0 && cfg.rmsprop.decay < 1 &&
        cfg.rmsprop.epsilon > 0)) {
    throw std::invalid_argument("neural: invalid RMSProp settings");
  }
}

ObservationWindow::ObservationWindow(std::size_t length)
    : length_(length), buffer_(length * kObservationSize, 0.0) {
  if (length == 0) throw std::invalid_argument("ObservationWindow: length must be >= 1");
}

void ObservationWindow::reset() {
  std::fill(buffer_.begin(), buffer_.end(), 0.0);
}

void ObservationWindow::push(const Observation& obs) {
  // Shift left by one vector; the newest sits in the last slot.
  std::copy(buffer_.begin() + kObservationSize, buffer_.end(), buffer_.begin());
  const FeatureVector f = obs.features();
  std::copy(f.begin(), f.end(), buffer_.end() - kObservationSize);
}

std::vector<double> ObservationWindow::flat() const { return buffer_; }

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be >= 1");
  items_.reserve(capacity);
}

void ReplayMemory::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayMemory::operator[](std::size_t i) const {
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayMemory::sample(std::size_t batch, Rng& rng) const {
  const std::size_t n = items_.size();
  if (batch > n) throw std::invalid_argument("ReplayMemory: batch larger than memory");
  // Floyd's algorithm: distinct indices in O(batch^2) without touching n.
  std::vector<std::size_t> picked;
  picked.reserve(batch);
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t candidate = rng.below(j + 1);
    const bool seen = std::find(picked.begin(), picked.end(), candidate) != picked.end();
    picked.push_back(seen ? j : candidate);
  }
  return picked;
}

int select_action(QFunction& fn, const QNetworkParams& params, std::span<const double> window,
                  double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) return rng.coin() ? 1 : 0;
  return greedy_action(fn.forward(params, window));
}

double epsilon_at(const AgentConfig& cfg, std::size_t episode) {
  const double horizon = cfg.epsilon_decay_fraction * static_cast<double>(cfg.episodes);
  if (horizon <= 0.0) return cfg.epsilon_min;
  const double progress = std::min(1.0, static_cast<double>(episode) / horizon);
  return cfg.epsilon_start + (cfg.epsilon_min - cfg.epsilon_start) * progress;
}

double td_target(QFunction& fn, const QNetworkParams& online, const QNetworkParams& target,
                 const Transition& t, double gamma, TargetRule rule) {
  if (t.terminal || gamma == 0.0) return t.reward;
  const QValues q_target = fn.forward(target, t.next_state);
  int best;
  if (rule == TargetRule::kDdqn) {
    best = greedy_action(fn.forward(online, t.next_state));
  } else {
    best = greedy_action(q_target);
  }
  return t.reward + gamma * q_target[static_cast<std::size_t>(best)];
}

TrainResult train(const EnvFactory& make_env, const AgentConfig& agent_cfg,
                  const NeuralConfig& neural_cfg, std::uint64_t seed) {
  validate(agent_cfg);
  validate(neural_cfg);
  Rng init_rng(derive_seed(seed, {0}));
  Rng act_rng(derive_seed(seed, {1}));
  Rng replay_rng(derive_seed(seed, {2}));

  TrainResult result;
  result.params = QNetworkParams::initialize(neural_cfg.shape, init_rng);
  QNetworkParams& params = result.params;
  QNetworkParams target = clone_target(params);
  OptimizerState optimizer(neural_cfg.rmsprop, params.size());
  ReplayMemory replay(agent_cfg.replay_capacity);
  QFunction fn(neural_cfg.shape);
  ObservationWindow window(neural_cfg.window);
  std::vector<double> grad(params.size());
  const double inv_batch = 1.0 / static_cast<double>(agent_cfg.batch_size);
  std::size_t step_count = 0;

  for (std::size_t ep = 0; ep < agent_cfg.episodes; ++ep) {
    Environment env = make_env(ep);
    const double epsilon = epsilon_at(agent_cfg, ep);
    window.reset();
    window.push(env.current_observation());
    std::vector<double> state = window.flat();
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    while (!env.done()) {
      const int action = select_action(fn, params, state, epsilon, act_rng);
      const StepResult step = env.step(action);
      window.push(step.next_observation);
      Transition t{state, action, step.reward, window.flat(), step.terminal};
      state = t.next_state;
      replay.push(std::move(t));

      if (replay.size() >= agent_cfg.batch_size) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        for (std::size_t idx : replay.sample(agent_cfg.batch_size, replay_rng)) {
          const Transition& s = replay[idx];
          const double y = td_target(fn, params, target, s, agent_cfg.gamma, agent_cfg.target_rule);
          batch_loss += fn.accumulate_gradient(params, s.state, static_cast<std::size_t>(s.action),
                                               y, inv_batch, grad);
        }
        rmsprop_step(params, optimizer, grad);
        loss_sum += batch_loss * inv_batch;
        ++loss_count;
      }
      if (++step_count % agent_cfg.target_update_k == 0) target = clone_target(params);
    }

    EpisodeStats stats;
    stats.episode = ep;
    stats.cumulative_reward = env.state().cumulative_reward;
    stats.epsilon = epsilon;
    stats.loss_mean = loss_count ? loss_sum / static_cast<double>(loss_count)
                                 : std::numeric_limits<double>::quiet_NaN();
    if ((loss_count && !std::isfinite(stats.loss_mean)) || !params.all_finite()) {
      throw TrainingDiverged(ep);
    }
    result.curve.push_back(stats);
  }
  return result;
}

void write_training_curve(std::ostream& out, const std::vector<EpisodeStats>& curve) {
  out << "episode,cumulative_reward,epsilon,loss_mean\n";
  char buf[128];
  for (const auto& s : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", s.episode, s.cumulative_reward,
                  s.epsilon, s.loss_mean);
    out << buf;
  }
}

int oracle_policy(const Observation& obs, const SimilarityConfig& sim) {
  const bool new_run = obs.similarity_score > similarity_score(sim.zeta, sim);
  if (new_run) return 1;
  return obs.run_delivered ? 0 : 1;
}

GreedyScheduler::GreedyScheduler(QNetworkParams params, std::size_t window)
    : params_(std::move(params)), fn_(params_.shape()), window_(window) {}

void GreedyScheduler::reset() { window_.reset(); }

int GreedyScheduler::act(const Observation& obs) {
  window_.push(obs);
  last_q_ = fn_.forward(params_, window_.flat());
  return greedy_action(last_q_);
}

}  // namespace tosa
