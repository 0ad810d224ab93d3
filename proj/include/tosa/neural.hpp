#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "tosa/rng.hpp"

namespace tosa {

struct NetworkShape {
  std::size_t n_in = 5;
  std::size_t n_h = 32;
  std::size_t n_l = 1;

  bool operator==(const NetworkShape&) const = default;
};

inline constexpr std::size_t kNumActions = 2;

// All weights of the recurrent Q-function in one flat array.
//
// Per GRU layer l (input width in_l = n_in for l == 0, else n_h), gates are
// stacked in the order update (z), reset (r), candidate (c):
//   W: [3 n_h x in_l]   U: [3 n_h x n_h]   b: [3 n_h]
// followed by the dense head Wo: [2 x n_h], bo: [2]. Matrices are row-major.
class QNetworkParams {
 public:
  QNetworkParams() = default;
  explicit QNetworkParams(NetworkShape shape);  // all zeros

  // Uniform in +-sqrt(1/fan_in) per weight matrix; biases use the bound of
  // their recurrent matrix.
  static QNetworkParams initialize(NetworkShape shape, Rng& rng);

  struct LayerOffsets {
    std::size_t in = 0;
    std::size_t w = 0;
    std::size_t u = 0;
    std::size_t b = 0;
  };

  const NetworkShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const LayerOffsets& layer(std::size_t l) const { return layers_[l]; }
  std::size_t head_w() const { return head_w_; }
  std::size_t head_b() const { return head_b_; }

  bool all_finite() const;
  bool operator==(const QNetworkParams& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

  static std::size_t parameter_count(NetworkShape shape);

 private:
  NetworkShape shape_;
  std::vector<LayerOffsets> layers_;
  std::size_t head_w_ = 0;
  std::size_t head_b_ = 0;
  std::vector<double> values_;
};

using QValues = std::array<double, kNumActions>;

// Deep copy used for the target network.
inline QNetworkParams clone_target(const QNetworkParams& params) { return params; }

// Forward/backward engine with reusable scratch buffers. A window is a flat
// row-major [length x n_in] sequence, oldest observation first; the Q-values
// are read from the top layer's hidden state after the last step.
class QFunction {
 public:
  explicit QFunction(NetworkShape shape);

  QValues forward(const QNetworkParams& params, std::span<const double> window);

  // Adds scale * d/dtheta [0.5 (target - Q(window, action))^2] into grad and
  // returns the unscaled loss.
  double accumulate_gradient(const QNetworkParams& params, std::span<const double> window,
                             std::size_t action, double td_target, double scale,
                             std::span<double> grad);

 private:
  std::size_t check_window(const QNetworkParams& params, std::span<const double> window) const;
  void run_forward(const QNetworkParams& params, std::span<const double> window, std::size_t steps);

  NetworkShape shape_;
  // Per layer, [steps x n_h] activations.
  std::vector<std::vector<double>> z_, r_, c_, h_, rh_;
  std::vector<double> dh_, dh_next_, dx_, daz_, dar_, dac_, drh_;
};

QValues forward(const QNetworkParams& params, std::span<const double> window);

// Gradient of 0.5 (td_target - Q(window, action))^2 with respect to every
// parameter, by backpropagation through time.
std::vector<double> backward(const QNetworkParams& params, std::span<const double> window,
                             std::size_t action, double td_target);

struct RmsPropConfig {
  double learning_rate = 1e-5;
  double decay = 0.99;
  double epsilon = 1e-8;
};

struct OptimizerState {
  RmsPropConfig config;
  std::vector<double> accumulator;

  OptimizerState() = default;
  OptimizerState(RmsPropConfig cfg, std::size_t n) : config(cfg), accumulator(n, 0.0) {}
};

// acc <- rho acc + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(acc) + eps)
void rmsprop_step(QNetworkParams& params, OptimizerState& state, std::span<const double> gradient);

// Versioned text checkpoint: a shape header, then one block per tensor
// ("name rows cols" followed by row-major values at 17 significant digits).
void save_checkpoint(std::ostream& out, const QNetworkParams& params);
QNetworkParams load_checkpoint(std::istream& in);

}  // namespace tosa
