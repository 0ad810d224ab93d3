#include "tosa/traffic.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tosa {

bool within_ranges(const CommandFields& fields) {
  for (std::size_t i = 0; i < kNumFields; ++i) {
    if (!(fields[i] >= kFieldRanges[i].lo && fields[i] <= kFieldRanges[i].hi)) return false;
  }
  return true;
}

void validate(const DatasetConfig& cfg) {
  if (cfg.n_effective < 1) throw std::invalid_argument("traffic: n_effective must be >= 1");
  if (cfg.repeat_k < 1) throw std::invalid_argument("traffic: repeat_k must be >= 1");
  if (cfg.payload_bits == 0) throw std::invalid_argument("traffic: payload_bits must be > 0");
  if (!cfg.explicit_values.empty()) {
    if (cfg.explicit_values.size() != cfg.n_effective) {
      throw std::invalid_argument("traffic: explicit_values size must equal n_effective");
    }
    for (std::size_t j = 0; j < cfg.explicit_values.size(); ++j) {
      if (!within_ranges(cfg.explicit_values[j])) {
        throw std::invalid_argument("traffic: explicit value out of field range");
      }
      if (j > 0 && cfg.explicit_values[j] == cfg.explicit_values[j - 1]) {
        throw std::invalid_argument("traffic: consecutive explicit packets must differ");
      }
    }
    return;
  }
  bool any_random = false;
  for (std::size_t i = 0; i < kNumFields; ++i) {
    const auto& fixed = cfg.fixed_fields[i];
    if (!fixed) {
      any_random = true;
    } else if (!(*fixed >= kFieldRanges[i].lo && *fixed <= kFieldRanges[i].hi)) {
      throw std::invalid_argument("traffic: fixed field value out of range");
    }
  }
  if (!any_random && cfg.n_effective > 1) {
    throw std::invalid_argument("traffic: all fields fixed leaves no distinct packets");
  }
}

CommandFields random_effective_packet(Rng& rng) {
  CommandFields f;
  for (std::size_t i = 0; i < kNumFields; ++i) {
    f[i] = rng.uniform(kFieldRanges[i].lo, kFieldRanges[i].hi);
  }
  return f;
}

namespace {

CommandFields sample_fields(const DatasetConfig& cfg, Rng& rng) {
  CommandFields f = random_effective_packet(rng);
  for (std::size_t i = 0; i < kNumFields; ++i) {
    if (cfg.fixed_fields[i]) f[i] = *cfg.fixed_fields[i];
  }
  return f;
}

}  // namespace

std::vector<CncPacket> build_stream(const DatasetConfig& cfg, double tti_seconds, Rng& rng) {
  validate(cfg);
  std::vector<CncPacket> stream;
  stream.reserve(cfg.n_effective * cfg.repeat_k);
  CommandFields prev{};
  for (std::size_t run = 0; run < cfg.n_effective; ++run) {
    CommandFields fields;
    if (!cfg.explicit_values.empty()) {
      fields = cfg.explicit_values[run];
    } else {
      do {
        fields = sample_fields(cfg, rng);
      } while (run > 0 && fields == prev);
    }
    prev = fields;
    for (std::size_t rep = 0; rep < cfg.repeat_k; ++rep) {
      CncPacket p;
      p.fields = fields;
      p.seq_index = stream.size();
      p.run_id = run;
      p.gen_time_s = static_cast<double>(p.seq_index) * tti_seconds;
      p.payload_bits = cfg.payload_bits;
      stream.push_back(p);
    }
  }
  return stream;
}

void write_stream(std::ostream& out, const std::vector<CncPacket>& stream) {
  out << "# seq_index\trun_id\trow\tpitch\tyaw\tthrust\tgen_time\n";
  char buf[512];
  for (const auto& p : stream) {
    std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", p.seq_index,
                  p.run_id, p.fields[0], p.fields[1], p.fields[2], p.fields[3], p.gen_time_s);
    out << buf;
  }
}

std::vector<CncPacket> read_stream(std::istream& in, std::uint32_t payload_bits) {
  std::vector<CncPacket> stream;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    CncPacket p;
    p.payload_bits = payload_bits;
    if (!(row >> p.seq_index >> p.run_id >> p.fields[0] >> p.fields[1] >> p.fields[2] >>
          p.fields[3] >> p.gen_time_s)) {
      throw std::runtime_error("read_stream: malformed line: " + line);
    }
    if (p.seq_index != stream.size()) {
      throw std::runtime_error("read_stream: seq_index must be consecutive from 0");
    }
    if (!within_ranges(p.fields)) throw std::runtime_error("read_stream: field out of range");
    if (!stream.empty()) {
      const auto& prev = stream.back();
      const bool same_run = p.run_id == prev.run_id;
      if (same_run != (p.fields == prev.fields)) {
        throw std::runtime_error("read_stream: run structure inconsistent with field values");
      }
      if (!same_run && p.run_id != prev.run_id + 1) {
        throw std::runtime_error("read_stream: run_id must increase by one");
      }
    } else if (p.run_id != 0) {
      throw std::runtime_error("read_stream: first run_id must be 0");
    }
    stream.push_back(p);
  }
  return stream;
}

}  // namespace tosa
