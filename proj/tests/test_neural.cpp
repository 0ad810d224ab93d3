#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tosa/neural.hpp"

using namespace tosa;

namespace {

std::vector<double> random_window(std::size_t steps, std::size_t n_in, Rng& rng) {
  std::vector<double> w(steps * n_in);
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return w;
}

double loss_at(const QNetworkParams& p, const std::vector<double>& window, std::size_t action, double y) {
  const double q = forward(p, window)[action];
  return 0.5 * (y - q) * (y - q);
}

}  // namespace

TEST_CASE("zero weights give zero Q-values") {
  const QNetworkParams p(NetworkShape{5, 8, 1});
  std::vector<double> window(4 * 5, 0.7);
  const QValues q = forward(p, window);
  CHECK(q[0] == 0.0);
  CHECK(q[1] == 0.0);
}

TEST_CASE("parameter layout") {
  const NetworkShape s{5, 4, 2};
  // layer 0: 12*5 + 12*4 + 12, layer 1: 12*4 + 12*4 + 12, head: 2*4 + 2
  CHECK(QNetworkParams::parameter_count(s) == 120 + 108 + 10);
  const QNetworkParams p(s);
  CHECK(p.size() == 238);
  CHECK(p.layer(1).in == 4);
  CHECK(p.head_b() == 236);
}

TEST_CASE("initialization is reproducible and bounded") {
  const NetworkShape s{5, 16, 1};
  Rng a(3), b(3), c(4);
  const QNetworkParams pa = QNetworkParams::initialize(s, a);
  CHECK(pa == QNetworkParams::initialize(s, b));
  CHECK_FALSE(pa == QNetworkParams::initialize(s, c));
  for (double v : pa.values()) CHECK(std::abs(v) <= std::sqrt(1.0 / 5.0));
  CHECK(pa.all_finite());
}

TEST_CASE("forward is deterministic and finite on extreme inputs") {
  const NetworkShape s{5, 16, 2};
  Rng rng(9);
  const QNetworkParams p = QNetworkParams::initialize(s, rng);
  std::vector<double> window = random_window(8, 5, rng);
  const QValues q1 = forward(p, window);
  const QValues q2 = forward(p, window);
  CHECK(q1 == q2);
  for (double& v : window) v *= 1e6;
  const QValues q3 = forward(p, window);
  CHECK(std::isfinite(q3[0]));
  CHECK(std::isfinite(q3[1]));
  CHECK_THROWS_AS(forward(p, std::vector<double>(7, 0.0)), std::invalid_argument);
}

TEST_CASE("zero residual gives zero gradient") {
  const NetworkShape s{5, 8, 1};
  Rng rng(1);
  const QNetworkParams p = QNetworkParams::initialize(s, rng);
  const auto window = random_window(6, 5, rng);
  const double y = forward(p, window)[1];
  for (double g : backward(p, window, 1, y)) CHECK(g == 0.0);
}

TEST_CASE("backpropagation through time matches central differences") {
  Rng rng(2024);
  for (std::size_t layers : {1u, 2u}) {
    const NetworkShape s{5, 6, layers};
    const QNetworkParams base = QNetworkParams::initialize(s, rng);
    const std::size_t n = base.size();
    for (int trial = 0; trial < 100; ++trial) {
      const auto window = random_window(1 + rng.below(8), 5, rng);
      const std::size_t action = rng.below(2);
      const double y = rng.uniform(-2.0, 2.0);
      const auto grad = backward(base, window, action, y);
      const std::size_t i = rng.below(n);
      const double h = 1e-5;
      QNetworkParams plus = base, minus = base;
      plus.values()[i] += h;
      minus.values()[i] -= h;
      const double numeric = (loss_at(plus, window, action, y) - loss_at(minus, window, action, y)) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
      INFO("layers=" << layers << " index=" << i);
      CHECK(std::abs(numeric - grad[i]) / denom < 1e-4);
    }
  }
}

TEST_CASE("only the selected head row receives gradient") {
  const NetworkShape s{5, 8, 1};
  Rng rng(5);
  const QNetworkParams p = QNetworkParams::initialize(s, rng);
  const auto window = random_window(4, 5, rng);
  const auto g = backward(p, window, 0, 3.0);
  for (std::size_t j = 0; j < s.n_h; ++j) {
    CHECK(g[p.head_w() + s.n_h + j] == 0.0);  // row of action 1
  }
  CHECK(g[p.head_b() + 1] == 0.0);
  CHECK(g[p.head_b()] != 0.0);
}

TEST_CASE("accumulate_gradient scales and adds") {
  const NetworkShape s{5, 4, 1};
  Rng rng(8);
  const QNetworkParams p = QNetworkParams::initialize(s, rng);
  const auto window = random_window(3, 5, rng);
  const auto g = backward(p, window, 1, 0.5);
  std::vector<double> acc(p.size(), 1.0);
  QFunction fn(s);
  const double loss = fn.accumulate_gradient(p, window, 1, 0.5, 0.25, acc);
  CHECK(loss == doctest::Approx(loss_at(p, window, 1, 0.5)).epsilon(1e-14).scale(0));
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == doctest::Approx(1.0 + 0.25 * g[i]).epsilon(1e-14).scale(0));
}

TEST_CASE("RMSProp update rule") {
  QNetworkParams p(NetworkShape{1, 1, 1});
  OptimizerState st({0.1, 0.9, 1e-8}, p.size());
  std::vector<double> g(p.size(), 0.0);
  g[0] = 2.0;
  g[1] = -0.5;
  rmsprop_step(p, st, g);
  // acc = 0.1 g^2, step = lr g / sqrt(0.1 g^2) = lr sign(g) / sqrt(0.1)
  CHECK(st.accumulator[0] == doctest::Approx(0.4).epsilon(1e-15).scale(0));
  CHECK(p.values()[0] == doctest::Approx(-0.1 * 2.0 / (std::sqrt(0.4) + 1e-8)).epsilon(1e-15).scale(0));
  CHECK(p.values()[1] == doctest::Approx(0.1 * 0.5 / (std::sqrt(0.025) + 1e-8)).epsilon(1e-15).scale(0));
  CHECK(p.values()[2] == 0.0);
  rmsprop_step(p, st, g);
  CHECK(st.accumulator[0] == doctest::Approx(0.9 * 0.4 + 0.1 * 4.0).epsilon(1e-15).scale(0));
  CHECK_THROWS_AS(rmsprop_step(p, st, std::vector<double>(2, 0.0)), std::invalid_argument);
}

TEST_CASE("target clone is independent") {
  Rng rng(6);
  QNetworkParams online = QNetworkParams::initialize({5, 4, 1}, rng);
  const QNetworkParams target = clone_target(online);
  online.values()[0] += 1.0;
  CHECK_FALSE(online == target);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(12);
  const QNetworkParams p = QNetworkParams::initialize({5, 7, 2}, rng);
  std::stringstream ss;
  save_checkpoint(ss, p);
  const QNetworkParams q = load_checkpoint(ss);
  CHECK(p == q);

  std::stringstream bad("tosa-qnet 99\n");
  CHECK_THROWS(load_checkpoint(bad));
  std::string text;
  {
    std::stringstream again;
    save_checkpoint(again, p);
    text = again.str();
  }
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS(load_checkpoint(truncated));
}

TEST_CASE("training reduces loss on a synthetic regression task") {
  // Target: Q(window, a) = mean of feature a over the window.
  const NetworkShape s{5, 8, 1};
  Rng rng(77);
  QNetworkParams p = QNetworkParams::initialize(s, rng);
  OptimizerState st({3e-3, 0.99, 1e-8}, p.size());
  QFunction fn(s);
  std::vector<std::vector<double>> data;
  std::vector<std::size_t> actions;
  std::vector<double> targets;
  for (int i = 0; i < 64; ++i) {
    data.push_back(random_window(4, 5, rng));
    actions.push_back(rng.below(2));
    double m = 0.0;
    for (std::size_t t = 0; t < 4; ++t) m += data.back()[t * 5 + actions.back()];
    targets.push_back(m / 4.0);
  }
  auto epoch = [&](bool update) {
    std::vector<double> g(p.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      loss += fn.accumulate_gradient(p, data[i], actions[i], targets[i], 1.0 / data.size(), g);
    }
    if (update) rmsprop_step(p, st, g);
    return loss / data.size();
  };
  const double initial = epoch(false);
  // Block means of 60 updates fall until the loss reaches its noise floor.
  std::vector<double> blocks;
  for (int b = 0; b < 5; ++b) {
    double sum = 0.0;
    for (int it = 0; it < 60; ++it) {
      epoch(true);
      sum += epoch(false);
    }
    blocks.push_back(sum / 60.0);
  }
  CHECK(blocks[0] < initial);
  CHECK(blocks[1] < blocks[0]);
  CHECK(blocks[2] < blocks[1]);
  CHECK(blocks.back() < 0.01 * initial);
}
