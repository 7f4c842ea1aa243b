#pragma once

#include <array>
#include <string>
#include <vector>

#include "aerotrack/geometry.hpp"
#include "aerotrack/metrics.hpp"

namespace aerotrack {

// Merge/tie-break order of sensors is the enum order.
enum class SensorId : int { lidar_conic = 0, lidar_peri = 1, radar = 2 };

enum class UavClass : int { phantom4 = 0, m300 = 1, m30t = 2, mavic3 = 3 };
constexpr int kNumClasses = 4;

const char* to_string(SensorId id);
const char* to_string(UavClass c);
SensorId sensor_from_string(const std::string& s);
UavClass uav_class_from_string(const std::string& s);

// One timestamped sensor sweep.
struct FramePointCloud {
  Timestamp t = 0.0;
  SensorId sensor = SensorId::lidar_conic;
  std::vector<Vec3> points;
};

struct GroundTruth {
  std::vector<StampedVec3> samples;  // strictly increasing timestamps
  UavClass uav_class = UavClass::phantom4;

  // Linear interpolation between neighboring samples; throws when t is
  // outside the covered span.
  Vec3 interpolate(Timestamp t) const;
  bool covers(Timestamp t) const;
};

// One temporal window's UAV hypothesis.
struct Detection {
  Timestamp t = 0.0;
  Vec3 center;
  double score = 0.0;
  int n_points = 0;
};

// Per-frame record from the external image models (seqcls input).
struct FrameRecord {
  std::string seq_id;
  int frame = 0;
  std::vector<double> embedding;
  double det_conf = 0.0;
  std::array<double, 4> softmax{};
};

enum class TrajFlag : int { tracked = 0, completed = 1, interpolated = 2 };
const char* to_string(TrajFlag f);
TrajFlag traj_flag_from_string(const std::string& s);

struct TrajSample {
  Timestamp t = 0.0;
  Vec3 p;
  TrajFlag flag = TrajFlag::tracked;
};

// Dense timestamped polyline, the pipeline's final per-sequence output.
struct Trajectory {
  std::vector<TrajSample> samples;  // strictly increasing timestamps
};

struct SequencePrediction {
  std::string seq_id;
  UavClass cls = UavClass::phantom4;
  std::array<double, 4> scores{};
};

}  // namespace aerotrack
