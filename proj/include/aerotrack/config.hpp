#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aerotrack/types.hpp"

namespace aerotrack {

// Dotted-key configuration with a fixed schema: unknown keys are rejected
// and every value is type-checked when set. dump() -> load round-trips.
class PipelineConfig {
public:
  static PipelineConfig defaults();
  static PipelineConfig load(const std::string& path);  // defaults overlaid with the file
  static PipelineConfig parse(const std::string& text, const std::string& origin);

  void set(const std::string& key, const std::string& value);

  bool get_bool(const std::string& key) const;
  long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  std::string dump() const;  // sorted "key = value" lines

private:
  std::map<std::string, std::string> values_;
};

// Config-string helpers for the structured synth values.
std::vector<StampedVec3> parse_waypoints(const std::string& spec);      // "t:x,y,z; t:x,y,z"
std::vector<std::pair<double, double>> parse_gaps(const std::string& spec);  // "a,b; c,d" or ""
std::vector<std::string> split_list(const std::string& csv);            // comma list, trimmed

}  // namespace aerotrack
