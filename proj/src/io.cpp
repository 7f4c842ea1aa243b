#include "aerotrack/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "aerotrack/errors.hpp"
#include "json.hpp"

namespace aerotrack {

using nlohmann::json;

const char* to_string(SensorId id) {
  switch (id) {
    case SensorId::lidar_conic: return "lidar_conic";
    case SensorId::lidar_peri: return "lidar_peri";
    case SensorId::radar: return "radar";
  }
  return "?";
}

const char* to_string(UavClass c) {
  switch (c) {
    case UavClass::phantom4: return "phantom4";
    case UavClass::m300: return "m300";
    case UavClass::m30t: return "m30t";
    case UavClass::mavic3: return "mavic3";
  }
  return "?";
}

const char* to_string(TrajFlag f) {
  switch (f) {
    case TrajFlag::tracked: return "tracked";
    case TrajFlag::completed: return "completed";
    case TrajFlag::interpolated: return "interpolated";
  }
  return "?";
}

SensorId sensor_from_string(const std::string& s) {
  if (s == "lidar_conic") return SensorId::lidar_conic;
  if (s == "lidar_peri") return SensorId::lidar_peri;
  if (s == "radar") return SensorId::radar;
  throw IoError("unknown sensor id '" + s + "'");
}

UavClass uav_class_from_string(const std::string& s) {
  if (s == "phantom4") return UavClass::phantom4;
  if (s == "m300") return UavClass::m300;
  if (s == "m30t") return UavClass::m30t;
  if (s == "mavic3") return UavClass::mavic3;
  throw IoError("unknown uav class '" + s + "'");
}

TrajFlag traj_flag_from_string(const std::string& s) {
  if (s == "tracked") return TrajFlag::tracked;
  if (s == "completed") return TrajFlag::completed;
  if (s == "interpolated") return TrajFlag::interpolated;
  throw IoError("unknown trajectory flag '" + s + "'");
}

Vec3 GroundTruth::interpolate(Timestamp t) const {
  if (samples.empty()) throw NumericError("GroundTruth::interpolate: no samples");
  if (!covers(t))
    throw NumericError("GroundTruth::interpolate: t=" + std::to_string(t) + " outside span");
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const StampedVec3& s, double v) { return s.first < v; });
  if (it == samples.begin()) return it->second;
  if (it == samples.end()) return samples.back().second;
  const auto& [t1, p1] = *it;
  const auto& [t0, p0] = *(it - 1);
  if (t1 == t0) return p1;
  const double w = (t - t0) / (t1 - t0);
  return p0 + (p1 - p0) * w;
}

bool GroundTruth::covers(Timestamp t) const {
  return !samples.empty() && t >= samples.front().first && t <= samples.back().first;
}

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

[[noreturn]] void bad_line(const std::string& path, std::size_t line_no, const std::string& why) {
  throw IoError(path + ":" + std::to_string(line_no) + ": " + why);
}

double parse_double(const std::string& path, std::size_t line_no, const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) bad_line(path, line_no, "trailing junk in number '" + tok + "'");
    if (!std::isfinite(v)) bad_line(path, line_no, "non-finite number '" + tok + "'");
    return v;
  } catch (const std::invalid_argument&) {
    bad_line(path, line_no, "not a number: '" + tok + "'");
  } catch (const std::out_of_range&) {
    bad_line(path, line_no, "number out of range: '" + tok + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void append_vec3(std::string& s, const Vec3& p) {
  s += '[';
  s += fmt_g9(p.x);
  s += ',';
  s += fmt_g9(p.y);
  s += ',';
  s += fmt_g9(p.z);
  s += ']';
}

Vec3 vec3_from_json(const std::string& path, std::size_t line_no, const json& j) {
  if (!j.is_array() || j.size() != 3) bad_line(path, line_no, "point must be a 3-element array");
  Vec3 p{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!p.finite()) bad_line(path, line_no, "non-finite point");
  return p;
}

json parse_json_line(const std::string& path, std::size_t line_no, const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) bad_line(path, line_no, "malformed JSON");
  return j;
}

}  // namespace

// --- frames.jsonl -----------------------------------------------------------

FrameReader::FrameReader(const std::string& path) : in_(path), path_(path) {
  if (!in_) throw IoError("cannot open '" + path + "' for reading");
}

std::optional<FramePointCloud> FrameReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.empty()) continue;
    const json j = parse_json_line(path_, line_no_, line);
    FramePointCloud f;
    try {
      f.t = j.at("t").get<double>();
      f.sensor = sensor_from_string(j.at("sensor").get<std::string>());
      for (const auto& jp : j.at("points")) f.points.push_back(vec3_from_json(path_, line_no_, jp));
    } catch (const json::exception& e) {
      bad_line(path_, line_no_, e.what());
    }
    if (!std::isfinite(f.t)) bad_line(path_, line_no_, "non-finite timestamp");
    if (saw_any_ && f.t < last_t_) bad_line(path_, line_no_, "non-monotone timestamp");
    last_t_ = f.t;
    saw_any_ = true;
    return f;
  }
  return std::nullopt;
}

FrameWriter::FrameWriter(const std::string& path) : out_(path), path_(path) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
}

void FrameWriter::write(const FramePointCloud& frame) {
  std::string line = "{\"t\":";
  line += fmt_g9(frame.t);
  line += ",\"sensor\":\"";
  line += to_string(frame.sensor);
  line += "\",\"points\":[";
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    if (i) line += ',';
    append_vec3(line, frame.points[i]);
  }
  line += "]}\n";
  out_ << line;
  if (!out_) throw IoError("write failed on '" + path_ + "'");
}

std::vector<FramePointCloud> read_frames(const std::string& path) {
  FrameReader reader(path);
  std::vector<FramePointCloud> out;
  while (auto f = reader.next()) out.push_back(std::move(*f));
  return out;
}

void write_frames(const std::string& path, const std::vector<FramePointCloud>& frames) {
  FrameWriter writer(path);
  for (const auto& f : frames) writer.write(f);
}

// --- gt.csv -------------------------------------------------------------------

GroundTruth read_gt(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "t,x,y,z,class")
    throw IoError(path + ": expected header 't,x,y,z,class'");
  ++line_no;
  GroundTruth gt;
  bool have_class = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != 5) bad_line(path, line_no, "expected 5 fields");
    const double t = parse_double(path, line_no, tok[0]);
    const Vec3 p{parse_double(path, line_no, tok[1]), parse_double(path, line_no, tok[2]),
                 parse_double(path, line_no, tok[3])};
    if (!gt.samples.empty() && t <= gt.samples.back().first)
      bad_line(path, line_no, "timestamps must be strictly increasing");
    gt.samples.emplace_back(t, p);
    const UavClass c = uav_class_from_string(tok[4]);
    if (have_class && c != gt.uav_class) bad_line(path, line_no, "inconsistent class column");
    gt.uav_class = c;
    have_class = true;
  }
  return gt;
}

void write_gt(const std::string& path, const GroundTruth& gt) {
  auto out = open_out(path);
  out << "t,x,y,z,class\n";
  for (const auto& [t, p] : gt.samples) {
    out << fmt_g9(t) << ',' << fmt_g9(p.x) << ',' << fmt_g9(p.y) << ',' << fmt_g9(p.z) << ','
        << to_string(gt.uav_class) << '\n';
  }
}

// --- detections.jsonl -----------------------------------------------------------

std::vector<Detection> read_detections(const std::string& path) {
  auto in = open_in(path);
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_json_line(path, line_no, line);
    Detection d;
    try {
      d.t = j.at("t").get<double>();
      d.center = vec3_from_json(path, line_no, j.at("center"));
      d.score = j.at("score").get<double>();
      d.n_points = j.at("n_points").get<int>();
    } catch (const json::exception& e) {
      bad_line(path, line_no, e.what());
    }
    if (!out.empty() && d.t < out.back().t) bad_line(path, line_no, "non-monotone timestamp");
    out.push_back(d);
  }
  return out;
}

void write_detections(const std::string& path, const std::vector<Detection>& dets) {
  auto out = open_out(path);
  for (const auto& d : dets) {
    std::string line = "{\"t\":";
    line += fmt_g9(d.t);
    line += ",\"center\":";
    append_vec3(line, d.center);
    line += ",\"score\":";
    line += fmt_g9(d.score);
    line += ",\"n_points\":";
    line += std::to_string(d.n_points);
    line += "}\n";
    out << line;
  }
}

// --- tracks.csv -------------------------------------------------------------------

std::vector<TrackDump> read_tracks(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "track_id,t,x,y,z")
    throw IoError(path + ": expected header 'track_id,t,x,y,z'");
  ++line_no;
  std::vector<TrackDump> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != 5) bad_line(path, line_no, "expected 5 fields");
    const int id = static_cast<int>(parse_double(path, line_no, tok[0]));
    const double t = parse_double(path, line_no, tok[1]);
    const Vec3 p{parse_double(path, line_no, tok[2]), parse_double(path, line_no, tok[3]),
                 parse_double(path, line_no, tok[4])};
    if (out.empty() || out.back().track_id != id) out.push_back(TrackDump{id, {}});
    auto& hist = out.back().history;
    if (!hist.empty() && t <= hist.back().first)
      bad_line(path, line_no, "track timestamps must be strictly increasing");
    hist.emplace_back(t, p);
  }
  return out;
}

void write_tracks(const std::string& path, const std::vector<TrackDump>& tracks) {
  auto out = open_out(path);
  out << "track_id,t,x,y,z\n";
  for (const auto& tr : tracks) {
    for (const auto& [t, p] : tr.history) {
      out << tr.track_id << ',' << fmt_g9(t) << ',' << fmt_g9(p.x) << ',' << fmt_g9(p.y) << ','
          << fmt_g9(p.z) << '\n';
    }
  }
}

// --- scores.jsonl ---------------------------------------------------------------

std::vector<FrameRecord> read_scores(const std::string& path) {
  auto in = open_in(path);
  std::vector<FrameRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_json_line(path, line_no, line);
    FrameRecord r;
    try {
      r.seq_id = j.at("seq_id").get<std::string>();
      r.frame = j.at("frame").get<int>();
      r.embedding = j.at("embedding").get<std::vector<double>>();
      r.det_conf = j.at("det_conf").get<double>();
      const auto& sm = j.at("softmax");
      if (!sm.is_array() || sm.size() != 4) bad_line(path, line_no, "softmax must have 4 entries");
      for (int k = 0; k < 4; ++k) r.softmax[static_cast<std::size_t>(k)] = sm[static_cast<std::size_t>(k)].get<double>();
    } catch (const json::exception& e) {
      bad_line(path, line_no, e.what());
    }
    double sum = 0.0;
    for (double p : r.softmax) {
      if (p < 0.0) bad_line(path, line_no, "negative softmax entry");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6) bad_line(path, line_no, "softmax does not sum to 1");
    if (r.embedding.empty()) bad_line(path, line_no, "empty embedding");
    out.push_back(std::move(r));
  }
  return out;
}

void write_scores(const std::string& path, const std::vector<FrameRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records) {
    std::string line = "{\"seq_id\":\"";
    line += r.seq_id;
    line += "\",\"frame\":";
    line += std::to_string(r.frame);
    line += ",\"embedding\":[";
    for (std::size_t i = 0; i < r.embedding.size(); ++i) {
      if (i) line += ',';
      line += fmt_g9(r.embedding[i]);
    }
    line += "],\"det_conf\":";
    line += fmt_g9(r.det_conf);
    line += ",\"softmax\":[";
    for (int k = 0; k < 4; ++k) {
      if (k) line += ',';
      line += fmt_g9(r.softmax[static_cast<std::size_t>(k)]);
    }
    line += "]}\n";
    out << line;
  }
}

// --- traj.csv ----------------------------------------------------------------------

Trajectory read_traj(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "t,x,y,z,flag")
    throw IoError(path + ": expected header 't,x,y,z,flag'");
  ++line_no;
  Trajectory traj;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != 5) bad_line(path, line_no, "expected 5 fields");
    TrajSample s;
    s.t = parse_double(path, line_no, tok[0]);
    s.p = {parse_double(path, line_no, tok[1]), parse_double(path, line_no, tok[2]),
           parse_double(path, line_no, tok[3])};
    s.flag = traj_flag_from_string(tok[4]);
    if (!traj.samples.empty() && s.t <= traj.samples.back().t)
      bad_line(path, line_no, "timestamps must be strictly increasing");
    traj.samples.push_back(s);
  }
  return traj;
}

void write_traj(const std::string& path, const Trajectory& traj) {
  auto out = open_out(path);
  out << "t,x,y,z,flag\n";
  for (const auto& s : traj.samples) {
    out << fmt_g9(s.t) << ',' << fmt_g9(s.p.x) << ',' << fmt_g9(s.p.y) << ',' << fmt_g9(s.p.z)
        << ',' << to_string(s.flag) << '\n';
  }
}

// --- predictions.csv ------------------------------------------------------------------

std::vector<SequencePrediction> read_predictions(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "seq_id,class,score0,score1,score2,score3")
    throw IoError(path + ": expected header 'seq_id,class,score0,score1,score2,score3'");
  ++line_no;
  std::vector<SequencePrediction> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != 6) bad_line(path, line_no, "expected 6 fields");
    SequencePrediction p;
    p.seq_id = tok[0];
    p.cls = uav_class_from_string(tok[1]);
    for (int k = 0; k < 4; ++k)
      p.scores[static_cast<std::size_t>(k)] = parse_double(path, line_no, tok[static_cast<std::size_t>(k) + 2]);
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<SequencePrediction>& preds) {
  auto out = open_out(path);
  out << "seq_id,class,score0,score1,score2,score3\n";
  for (const auto& p : preds) {
    out << p.seq_id << ',' << to_string(p.cls);
    for (int k = 0; k < 4; ++k) out << ',' << fmt_g9(p.scores[static_cast<std::size_t>(k)]);
    out << '\n';
  }
}

// --- seq_labels.csv ---------------------------------------------------------------

std::map<std::string, UavClass> read_seq_labels(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "seq_id,class")
    throw IoError(path + ": expected header 'seq_id,class'");
  ++line_no;
  std::map<std::string, UavClass> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tok = split_csv(line);
    if (tok.size() != 2) bad_line(path, line_no, "expected 2 fields");
    out[tok[0]] = uav_class_from_string(tok[1]);
  }
  return out;
}

void write_seq_labels(const std::string& path,
                      const std::vector<std::pair<std::string, UavClass>>& labels) {
  auto out = open_out(path);
  out << "seq_id,class\n";
  for (const auto& [id, c] : labels) out << id << ',' << to_string(c) << '\n';
}

}  // namespace aerotrack
