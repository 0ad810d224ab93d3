#pragma once

#include <array>

#include "tosa/traffic.hpp"

namespace tosa {

// Weighted normalized field gap between two commands and the sigmoid that
// maps it to (-1, 1). L is called "similarity" but grows with difference:
// L = 0 for identical packets.
struct SimilarityConfig {
  std::array<double, kNumFields> weights{1.0, 1.0, 1.0, 1.0};
  std::array<double, kNumFields> ranges{70.0, 70.0, 300.0, 10.0};
  double kappa = 100.0;
  double zeta = 0.05;

  double weight_sum() const { return weights[0] + weights[1] + weights[2] + weights[3]; }
};

struct AoiConfig {
  double tti_seconds = 1e-3;
  double payload_bits = 128.0;
  double bandwidth_hz = 20e6;
};

void validate(const SimilarityConfig& cfg);
void validate(const AoiConfig& cfg);

double raw_similarity(const CommandFields& curr, const CommandFields& prev,
                      const SimilarityConfig& cfg);
inline double raw_similarity(const CncPacket& curr, const CncPacket& prev,
                             const SimilarityConfig& cfg) {
  return raw_similarity(curr.fields, prev.fields, cfg);
}

// L for a packet with no predecessor: maximum novelty, sum of weights.
inline double first_packet_similarity(const SimilarityConfig& cfg) { return cfg.weight_sum(); }

// f(L) = 2 / (1 + exp(-kappa (L - zeta))) - 1.
double similarity_score(double raw, const SimilarityConfig& cfg);

// Transmission time of a freshly generated packet, N_cc / (B log2(1 + snr)).
double aoi_of_delivery(double snr_linear, const AoiConfig& cfg);

struct Freshness {
  double score = 1.0;
  bool deadline_violation = false;
};

// g(I) = 1 - I / dT, clamped to 0 with a violation flag when I > dT.
Freshness freshness_score(double aoi_seconds, const AoiConfig& cfg);

// Successful transmission earns f(L) g(I); failures and drops earn 0.
double reward(bool transmitted, bool success, double f_l, double g_i);

}  // namespace tosa
