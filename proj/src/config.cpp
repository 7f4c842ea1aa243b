#include "aerotrack/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aerotrack/errors.hpp"

namespace aerotrack {

namespace {

enum class Kind { boolean, integer, u64, real, text };

struct SchemaEntry {
  const char* key;
  Kind kind;
  const char* default_value;
};

// Every tunable named by the pipeline, with its artifact default.
const SchemaEntry kSchema[] = {
    {"seed", Kind::u64, "42"},
    {"threads", Kind::integer, "0"},  // 0 = auto (AEROTRACK_THREADS caps it)
    {"io.run_dir", Kind::text, "runs/out"},

    {"synth.sequences", Kind::integer, "1"},
    {"synth.duration", Kind::real, "20"},
    {"synth.uav_class", Kind::text, "m300"},
    {"synth.sensors", Kind::text, "lidar_conic"},
    {"synth.noise_sigma", Kind::real, "0.05"},
    {"synth.dropout_prob", Kind::real, "0.05"},
    {"synth.clutter_rate", Kind::real, "2"},
    {"synth.bias_gain", Kind::real, "0.01"},
    {"synth.gaps", Kind::text, "9,11"},
    {"synth.waypoints", Kind::text, "0:2,-4,20; 5:4,-1,22; 10:2,2,24; 15:-1,1,22.5; 20:0,-2,20.5"},
    {"synth.gt_rate", Kind::real, "10"},

    {"scores.n_real", Kind::integer, "20"},
    {"scores.embed_dim", Kind::integer, "16"},
    {"scores.acc_lo", Kind::real, "0.3"},
    {"scores.acc_hi", Kind::real, "0.9"},

    {"dynpoints.w", Kind::integer, "20"},
    {"dynpoints.stride", Kind::integer, "5"},
    {"dynpoints.eps", Kind::real, "1"},
    {"dynpoints.min_points", Kind::integer, "4"},
    {"dynpoints.r_pos", Kind::real, "1"},
    {"dynpoints.r_neg", Kind::real, "2"},

    {"seqnet.hidden", Kind::integer, "32"},
    {"seqnet.epochs", Kind::integer, "30"},
    {"seqnet.batch", Kind::integer, "32"},
    {"seqnet.lr", Kind::real, "0.05"},
    {"seqnet.momentum", Kind::real, "0.9"},
    {"seqnet.uav_weight", Kind::real, "3"},
    {"seqnet.threshold", Kind::real, "0.3"},
    {"seqnet.holdout", Kind::real, "0.2"},
    {"seqnet.augment", Kind::boolean, "true"},
    {"seqnet.p_drop", Kind::real, "0.1"},
    {"seqnet.p_reverse", Kind::real, "0.5"},
    {"seqnet.p_rotate", Kind::real, "1"},
    {"seqnet.regressor_max_points", Kind::integer, "256"},

    {"train.scenarios", Kind::integer, "4"},
    {"train.max_bg_per_window", Kind::integer, "8"},
    {"train.checkpoint", Kind::text, ""},  // empty = <run_dir>/model.json

    {"centerfix.ridge", Kind::real, "1e-6"},

    {"mot.q", Kind::real, "1"},
    {"mot.r", Kind::real, "0.05"},
    {"mot.gate", Kind::real, "11.34"},
    {"mot.cov_kill", Kind::real, "9"},
    {"mot.n_confirm", Kind::integer, "2"},

    {"trajfinish.knot_spacing", Kind::real, "1"},
    {"trajfinish.smooth_weight", Kind::real, "0.01"},
    {"trajfinish.max_extrap", Kind::real, "3"},

    {"seqcls.tau", Kind::real, "0.9"},
    {"seqcls.k", Kind::integer, "5"},
    {"seqcls.sample_ratio", Kind::real, "0.01"},
    {"seqcls.adjacency_only", Kind::boolean, "true"},
    {"seqcls.cap", Kind::integer, "300"},
};

const SchemaEntry* find_entry(const std::string& key) {
  for (const auto& e : kSchema)
    if (key == e.key) return &e;
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void validate(const SchemaEntry& entry, const std::string& value) {
  const std::string what = std::string("config key '") + entry.key + "'";
  switch (entry.kind) {
    case Kind::boolean:
      if (value != "true" && value != "false")
        throw ConfigError(what + ": expected true|false, got '" + value + "'");
      break;
    case Kind::integer:
    case Kind::u64: {
      if (value.empty()) throw ConfigError(what + ": empty integer");
      std::size_t used = 0;
      try {
        if (entry.kind == Kind::integer)
          (void)std::stol(value, &used);
        else
          (void)std::stoull(value, &used);
      } catch (const std::exception&) {
        throw ConfigError(what + ": not an integer: '" + value + "'");
      }
      if (used != value.size()) throw ConfigError(what + ": trailing junk in '" + value + "'");
      break;
    }
    case Kind::real: {
      if (value.empty()) throw ConfigError(what + ": empty number");
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        throw ConfigError(what + ": not a number: '" + value + "'");
      }
      if (used != value.size()) throw ConfigError(what + ": trailing junk in '" + value + "'");
      if (!std::isfinite(v)) throw ConfigError(what + ": non-finite value");
      break;
    }
    case Kind::text:
      break;
  }
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  for (const auto& e : kSchema) cfg.values_[e.key] = e.default_value;
  return cfg;
}

PipelineConfig PipelineConfig::parse(const std::string& text, const std::string& origin) {
  PipelineConfig cfg = defaults();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const SchemaEntry* entry = find_entry(key);
  if (!entry) throw ConfigError("unknown config key '" + key + "'");
  validate(*entry, value);
  values_[key] = value;
}

bool PipelineConfig::get_bool(const std::string& key) const { return get_string(key) == "true"; }

long PipelineConfig::get_int(const std::string& key) const { return std::stol(get_string(key)); }

std::uint64_t PipelineConfig::get_u64(const std::string& key) const {
  return std::stoull(get_string(key));
}

double PipelineConfig::get_double(const std::string& key) const { return std::stod(get_string(key)); }

const std::string& PipelineConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string PipelineConfig::dump() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

std::vector<StampedVec3> parse_waypoints(const std::string& spec) {
  std::vector<StampedVec3> out;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("waypoint '" + item + "': expected 't:x,y,z'");
    double vals[4];
    try {
      vals[0] = std::stod(trim(item.substr(0, colon)));
      const auto coords = split_list(item.substr(colon + 1));
      if (coords.size() != 3) throw ConfigError("waypoint needs 3 coordinates");
      for (int i = 0; i < 3; ++i) vals[i + 1] = std::stod(coords[static_cast<std::size_t>(i)]);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("waypoint '" + item + "': malformed number");
    }
    out.emplace_back(vals[0], Vec3{vals[1], vals[2], vals[3]});
  }
  if (out.empty()) throw ConfigError("synth.waypoints: empty waypoint list");
  return out;
}

std::vector<std::pair<double, double>> parse_gaps(const std::string& spec) {
  std::vector<std::pair<double, double>> out;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto parts = split_list(item);
    if (parts.size() != 2) throw ConfigError("gap '" + item + "': expected 'start,end'");
    try {
      out.emplace_back(std::stod(parts[0]), std::stod(parts[1]));
    } catch (const std::exception&) {
      throw ConfigError("gap '" + item + "': malformed number");
    }
  }
  return out;
}

}  // namespace aerotrack
