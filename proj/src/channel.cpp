#include "tosa/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tosa {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("channel: ") + what);
}

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

}  // namespace

void validate(const ChannelParams& p) {
  require(p.carrier_frequency_hz > 0, "carrier_frequency_hz must be > 0");
  require(p.speed_of_light_m_s > 0, "speed_of_light_m_s must be > 0");
  require(p.bandwidth_hz > 0, "bandwidth_hz must be > 0");
  require(p.tx_power_w > 0, "tx_power_w must be > 0");
  require(p.noise_power_w > 0, "noise_power_w must be > 0");
  require(p.eta_nlos > 0 && p.eta_nlos <= p.eta_los && p.eta_los <= 1,
          "requires 0 < eta_nlos <= eta_los <= 1");
  require(p.path_loss_exponent < 0, "path_loss_exponent must be < 0 (gain convention)");
  require(p.env_a > 0 && p.env_b > 0, "env_a and env_b must be > 0");
  require(p.snr_threshold_linear > 0, "snr_threshold_linear must be > 0");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double los_probability(double theta_deg, const ChannelParams& params) {
  if (!(theta_deg > 0.0 && theta_deg <= 90.0)) {
    throw std::invalid_argument("los_probability: elevation must lie in (0, 90] degrees");
  }
  return 1.0 / (1.0 + params.env_a * std::exp(-params.env_b * (theta_deg - params.env_a)));
}

double mean_channel_gain(double distance_m, double theta_deg, const ChannelParams& params) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("mean_channel_gain: distance must be > 0");
  const double p_los = los_probability(theta_deg, params);
  const double eta = p_los * params.eta_los + (1.0 - p_los) * params.eta_nlos;
  const double free_space = 4.0 * std::numbers::pi * distance_m * params.carrier_frequency_hz /
                            params.speed_of_light_m_s;
  return eta * std::pow(free_space, params.path_loss_exponent);
}

Geometry make_geometry(double height_m, double horizontal_offset_m, double ground_radius_m) {
  if (!(height_m > 0.0)) throw std::invalid_argument("geometry: height must be > 0");
  if (!(horizontal_offset_m >= 0.0)) {
    throw std::invalid_argument("geometry: horizontal offset must be >= 0");
  }
  Geometry g;
  g.height_m = height_m;
  g.ground_radius_m = ground_radius_m;
  g.horizontal_offset_m = horizontal_offset_m;
  g.distance_m = std::hypot(height_m, horizontal_offset_m);
  // asin(H/d) rounds to exactly 90 when r == 0.
  g.elevation_deg = kDegPerRad * std::asin(std::min(1.0, height_m / g.distance_m));
  return g;
}

Geometry sample_position(double ground_radius_m, double height_m, Rng& rng) {
  if (!(ground_radius_m >= 0.0)) throw std::invalid_argument("sample_position: R must be >= 0");
  const double r = ground_radius_m * std::sqrt(rng.uniform());
  return make_geometry(height_m, r, ground_radius_m);
}

LinkRealization link_from_fading(const Geometry& geometry, const ChannelParams& params,
                                 double fading_power) {
  LinkRealization link;
  link.fading_power = fading_power;
  link.p_los = los_probability(geometry.elevation_deg, params);
  link.mean_gain = mean_channel_gain(geometry.distance_m, geometry.elevation_deg, params);
  link.composite_gain = link.mean_gain * fading_power;
  link.snr_linear = params.tx_power_w * link.composite_gain / params.noise_power_w;
  link.success = link.snr_linear >= params.snr_threshold_linear;
  return link;
}

LinkRealization draw_link(const Geometry& geometry, const ChannelParams& params, Rng& rng) {
  return link_from_fading(geometry, params, rng.exponential());
}

double success_probability(const Geometry& geometry, const ChannelParams& params) {
  const double gain = mean_channel_gain(geometry.distance_m, geometry.elevation_deg, params);
  return std::exp(-params.snr_threshold_linear * params.noise_power_w /
                  (params.tx_power_w * gain));
}

}  // namespace tosa
