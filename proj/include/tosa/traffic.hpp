#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tosa/rng.hpp"

namespace tosa {

// Index order used for per-field arrays: ROW, PITCH, YAW, THRUST.
enum class Field : std::size_t { kRow = 0, kPitch = 1, kYaw = 2, kThrust = 3 };
inline constexpr std::size_t kNumFields = 4;

struct FieldRange {
  double lo;
  double hi;
  double width() const { return hi - lo; }
};

// Valid value ranges of the four command fields (deg, deg, deg/s, m/s).
inline constexpr std::array<FieldRange, kNumFields> kFieldRanges{{
    {-35.0, 35.0}, {-35.0, 35.0}, {-150.0, 150.0}, {-5.0, 5.0}}};

using CommandFields = std::array<double, kNumFields>;

struct CncPacket {
  CommandFields fields{};
  double gen_time_s = 0.0;
  std::size_t seq_index = 0;
  std::size_t run_id = 0;
  std::uint32_t payload_bits = 128;

  double row_deg() const { return fields[0]; }
  double pitch_deg() const { return fields[1]; }
  double yaw_deg_s() const { return fields[2]; }
  double thrust_m_s() const { return fields[3]; }
};

struct DatasetConfig {
  std::size_t n_effective = 200;
  std::size_t repeat_k = 1;
  std::uint32_t payload_bits = 128;
  // Per-field sampling law: nullopt draws uniformly over the field range,
  // a value pins the field.
  std::array<std::optional<double>, kNumFields> fixed_fields{};
  // When non-empty, the effective packets in order (size must equal
  // n_effective); overrides fixed_fields.
  std::vector<CommandFields> explicit_values;
};

void validate(const DatasetConfig& cfg);

bool within_ranges(const CommandFields& fields);

// Uniform draw within every field range.
CommandFields random_effective_packet(Rng& rng);

// k*N packets: N effective packets, each repeated k times, one per TTI.
// Consecutive effective packets always differ in at least one field.
std::vector<CncPacket> build_stream(const DatasetConfig& cfg, double tti_seconds, Rng& rng);

// Flat text table, one packet per line:
//   seq_index run_id row pitch yaw thrust gen_time
// Values are printed with 17 significant digits so a read-back is exact.
void write_stream(std::ostream& out, const std::vector<CncPacket>& stream);
std::vector<CncPacket> read_stream(std::istream& in, std::uint32_t payload_bits = 128);

}  // namespace tosa
