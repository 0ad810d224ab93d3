#pragma once

#include <optional>

#include "tosa/rng.hpp"

namespace tosa {

// Air-to-ground downlink parameters, all in linear units. dB quantities are
// converted once when a config is loaded.
struct ChannelParams {
  double carrier_frequency_hz = 5e9;
  double speed_of_light_m_s = 3e8;
  // Gain convention: (4*pi*d*fc/c)^alpha < 1 for alpha < 0.
  double path_loss_exponent = -2.0;
  double eta_los = 0.7943282347242815;  // 10^-0.1
  double eta_nlos = 0.01;               // 10^-2
  double env_a = 11.95;
  double env_b = 0.14;  // 1/degree
  double tx_power_w = 0.06309573444801933;       // 18 dBm
  double noise_power_w = 3.981071705534973e-14;  // -104 dBm
  double snr_threshold_linear = 3.548133892335755;  // 5.5 dB
  double bandwidth_hz = 20e6;
};

// Throws std::invalid_argument naming the first violated constraint.
void validate(const ChannelParams& params);

struct Geometry {
  double height_m = 0.0;
  double ground_radius_m = 0.0;
  double horizontal_offset_m = 0.0;
  double distance_m = 0.0;
  double elevation_deg = 0.0;
};

struct LinkRealization {
  double fading_power = 0.0;
  double p_los = 0.0;
  double mean_gain = 0.0;
  double composite_gain = 0.0;
  double snr_linear = 0.0;
  bool success = false;
};

double db_to_linear(double db);
double dbm_to_watts(double dbm);
double linear_to_db(double linear);

// LoS probability for elevation theta (degrees), theta in (0, 90].
double los_probability(double theta_deg, const ChannelParams& params);

// Deterministic part of the composite gain: LoS/NLoS excess-loss mixture
// times the free-space factor. Excludes small-scale fading.
double mean_channel_gain(double distance_m, double theta_deg, const ChannelParams& params);

// Builds a geometry from height and horizontal offset, deriving d and theta.
Geometry make_geometry(double height_m, double horizontal_offset_m, double ground_radius_m);

// Uniform position over the disk of radius R at height H.
Geometry sample_position(double ground_radius_m, double height_m, Rng& rng);

// Evaluates one link attempt for a given fading power |beta|^2.
LinkRealization link_from_fading(const Geometry& geometry, const ChannelParams& params,
                                 double fading_power);

// Draws |beta|^2 ~ Exp(1) from the stream and evaluates the link.
LinkRealization draw_link(const Geometry& geometry, const ChannelParams& params, Rng& rng);

// Closed-form per-attempt success probability under Rayleigh fading:
// P(|beta|^2 >= gamma_th * sigma^2 / (P * mean_gain)).
double success_probability(const Geometry& geometry, const ChannelParams& params);

}  // namespace tosa
