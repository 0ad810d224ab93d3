#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tosa/semantics.hpp"

using namespace tosa;

namespace {

// Literal sigmoid form, kept separate from the library's tanh evaluation.
double sigmoid_form(double raw, double kappa, double zeta) {
  return 2.0 / (1.0 + std::exp(-kappa * (raw - zeta))) - 1.0;
}

}  // namespace

TEST_CASE("raw_similarity") {
  const SimilarityConfig cfg;
  const CommandFields a{0, 0, 0, 3};
  CHECK(raw_similarity(a, a, cfg) == 0.0);
  CHECK(raw_similarity(CommandFields{0, 0, 30, 3}, a, cfg) == doctest::Approx(0.1).epsilon(1e-15).scale(0));
  const CommandFields lo{-35, -35, -150, -5};
  const CommandFields hi{35, 35, 150, 5};
  CHECK(raw_similarity(hi, lo, cfg) == doctest::Approx(4.0).epsilon(1e-15).scale(0));
  CHECK(first_packet_similarity(cfg) == 4.0);
}

TEST_CASE("raw_similarity is a symmetric weighted L1 distance") {
  SimilarityConfig cfg;
  cfg.weights = {0.5, 2.0, 1.0, 0.25};
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_effective_packet(rng);
    const auto y = random_effective_packet(rng);
    const auto z = random_effective_packet(rng);
    CHECK(raw_similarity(x, y, cfg) == raw_similarity(y, x, cfg));
    CHECK(raw_similarity(x, z, cfg) <= raw_similarity(x, y, cfg) + raw_similarity(y, z, cfg) + 1e-12);
    CHECK(raw_similarity(x, y, cfg) >= 0.0);
  }
}

TEST_CASE("similarity_score") {
  const SimilarityConfig cfg;
  CHECK(similarity_score(cfg.zeta, cfg) == 0.0);
  CHECK(similarity_score(0.0, cfg) == doctest::Approx(-0.98661429815143029).epsilon(1e-14).scale(0));
  CHECK(similarity_score(0.1, cfg) == doctest::Approx(0.98661429815143029).epsilon(1e-14).scale(0));
  Rng rng(2);
  double prev = similarity_score(0.0, cfg);
  for (double raw = 0.001; raw < 4.0; raw += 0.001) {
    const double f = similarity_score(raw, cfg);
    CHECK(f >= prev);
    CHECK(std::abs(f - sigmoid_form(raw, cfg.kappa, cfg.zeta)) < 1e-12);
    prev = f;
  }
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(0.0, 0.05);
    CHECK(std::abs(similarity_score(cfg.zeta + x, cfg) + similarity_score(cfg.zeta - x, cfg)) < 1e-12);
  }
}

TEST_CASE("aoi_of_delivery and freshness") {
  const AoiConfig cfg;  // 128 bits, 20 MHz, 1 ms
  CHECK(aoi_of_delivery(3.61e3, cfg) == doctest::Approx(5.4153842090460502e-7).epsilon(1e-12).scale(0));
  CHECK(aoi_of_delivery(1.0, cfg) == doctest::Approx(128.0 / 20e6).epsilon(1e-15).scale(0));
  double prev = aoi_of_delivery(0.01, cfg);
  for (double snr = 0.02; snr < 1e4; snr *= 1.3) {
    const double cur = aoi_of_delivery(snr, cfg);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK_THROWS_AS(aoi_of_delivery(0.0, cfg), std::invalid_argument);

  CHECK(freshness_score(0.0, cfg).score == 1.0);
  CHECK(freshness_score(cfg.tti_seconds, cfg).score == 0.0);
  CHECK_FALSE(freshness_score(cfg.tti_seconds, cfg).deadline_violation);
  CHECK(freshness_score(5.41e-7, cfg).score == doctest::Approx(0.999459).epsilon(1e-12).scale(0));
  const Freshness late = freshness_score(2e-3, cfg);
  CHECK(late.score == 0.0);
  CHECK(late.deadline_violation);
}

TEST_CASE("reward") {
  CHECK(reward(true, false, 0.9, 0.9) == 0.0);
  CHECK(reward(false, false, 0.9, 0.9) == 0.0);
  CHECK(reward(true, true, 0.98661429815143029, 0.999459) ==
        doctest::Approx(0.98608053981613037).epsilon(1e-14).scale(0));
  CHECK(reward(true, true, -0.98661429815143029, 0.999459) < 0.0);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double f = rng.uniform(-0.999, 0.999);
    const double g = rng.uniform();
    const double r = reward(true, true, f, g);
    CHECK(std::abs(r) <= std::abs(f));
    CHECK(r > -1.0);
    CHECK(r < 1.0);
  }
}

TEST_CASE("config validation") {
  SimilarityConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.weights = {0, 0, 0, 0};
  CHECK_THROWS(validate(cfg));
  cfg = SimilarityConfig{};
  cfg.zeta = 4.0;
  CHECK_THROWS(validate(cfg));
  AoiConfig aoi;
  aoi.tti_seconds = 0;
  CHECK_THROWS(validate(aoi));
}
