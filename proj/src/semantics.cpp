#include "tosa/semantics.hpp"

#include <cmath>
#include <stdexcept>

namespace tosa {

void validate(const SimilarityConfig& cfg) {
  bool any_positive = false;
  for (std::size_t i = 0; i < kNumFields; ++i) {
    if (cfg.weights[i] < 0) throw std::invalid_argument("similarity: weights must be >= 0");
    if (!(cfg.ranges[i] > 0)) throw std::invalid_argument("similarity: ranges must be > 0");
    any_positive = any_positive || cfg.weights[i] > 0;
  }
  if (!any_positive) throw std::invalid_argument("similarity: weights must not all be zero");
  if (!(cfg.kappa > 0)) throw std::invalid_argument("similarity: kappa must be > 0");
  if (!(cfg.zeta >= 0 && cfg.zeta < cfg.weight_sum())) {
    throw std::invalid_argument("similarity: zeta must lie in [0, sum of weights)");
  }
}

void validate(const AoiConfig& cfg) {
  if (!(cfg.tti_seconds > 0 && cfg.payload_bits > 0 && cfg.bandwidth_hz > 0)) {
    throw std::invalid_argument("aoi: tti_seconds, payload_bits and bandwidth_hz must be > 0");
  }
}

double raw_similarity(const CommandFields& curr, const CommandFields& prev,
                      const SimilarityConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumFields; ++i) {
    total += cfg.weights[i] * std::fabs(curr[i] - prev[i]) / cfg.ranges[i];
  }
  return total;
}

double similarity_score(double raw, const SimilarityConfig& cfg) {
  // tanh form of 2*sigmoid(x) - 1; exact zero at raw == zeta and odd in x.
  return std::tanh(0.5 * cfg.kappa * (raw - cfg.zeta));
}

double aoi_of_delivery(double snr_linear, const AoiConfig& cfg) {
  if (!(snr_linear > 0)) throw std::invalid_argument("aoi_of_delivery: snr must be > 0");
  return cfg.payload_bits / (cfg.bandwidth_hz * std::log2(1.0 + snr_linear));
}

Freshness freshness_score(double aoi_seconds, const AoiConfig& cfg) {
  if (aoi_seconds > cfg.tti_seconds) return {0.0, true};
  return {1.0 - aoi_seconds / cfg.tti_seconds, false};
}

double reward(bool transmitted, bool success, double f_l, double g_i) {
  return transmitted && success ? f_l * g_i : 0.0;
}

}  // namespace tosa
