#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aerotrack/rng.hpp"
#include "aerotrack/types.hpp"

namespace aerotrack {

struct SensorSpec {
  SensorId id = SensorId::lidar_conic;
  double fov_az_deg = 360.0;  // full azimuth width (ignored for the conic lidar)
  double fov_el_deg = 70.0;   // conic: full cone apex angle; others: full vertical width
  double max_range = 300.0;   // m
  double rate_hz = 10.0;
  double noise_sigma = 0.0;   // m, per point
  double dropout_prob = 0.0;
  double point_scale = 1.0;   // radar emits sparser returns

  // Defaults shaped by the published rig: upward 70-degree conic lidar
  // (300 m), 360x59-degree peripheral lidar (70 m), 120x30-degree radar
  // (350 m, 4x noise, 1/3 points).
  static SensorSpec conic_lidar(double noise_sigma, double dropout_prob);
  static SensorSpec peri_lidar(double noise_sigma, double dropout_prob);
  static SensorSpec radar(double noise_sigma, double dropout_prob);

  bool in_fov(const Vec3& p) const;  // FoV and range test
};

struct Scenario {
  std::uint64_t seed = 0;
  double duration = 20.0;  // s
  UavClass uav_class = UavClass::m300;
  std::vector<StampedVec3> waypoints;            // time-sorted, span [0, duration]
  double clutter_rate = 0.0;                     // expected transient clutter clusters per frame
  double bias_gain = 0.0;                        // 1/m, radial bias = bias_gain*range^2/100
  std::vector<std::pair<double, double>> gaps;   // intervals where the UAV return is suppressed
};

struct SyntheticSequence {
  std::vector<FramePointCloud> frames;  // merged across sensors, time-sorted
  GroundTruth truth;
  std::vector<std::string> warnings;
};

// Deterministic multi-sensor sequence: the UAV follows the cubic B-spline
// through the waypoints; each in-FoV frame carries a small UAV cluster
// (symmetric point pattern, so the noiseless centroid equals the spline),
// Gaussian per-point noise, a radial quadratic bias, transient Poisson
// clutter, slow bird-like distractors, and static ground clumps for the
// peripheral lidar.
SyntheticSequence generate_scenario(const Scenario& scenario, const std::vector<SensorSpec>& sensors,
                                    double gt_rate_hz = 10.0);

// UAV position on the waypoint spline at time t.
Vec3 scenario_path(const Scenario& scenario, Timestamp t);

// --- simulated score streams (classifier benchmark input) -------------------

struct ScoreStreamParams {
  std::uint64_t seed = 0;
  int n_real_sequences = 20;
  int min_recordings = 1;  // recording sequences per real sequence
  int max_recordings = 3;
  int min_frames = 80;
  int max_frames = 200;
  int embed_dim = 16;
  double acc_lo = 0.3;  // P(correct | conf=0)
  double acc_hi = 0.9;  // P(correct | conf=1); mean per-frame accuracy = (lo+hi)/2
};

struct ScoreStream {
  std::vector<FrameRecord> records;
  std::vector<std::pair<std::string, UavClass>> labels;  // truth per recording seq_id
};

// Frame records with detector confidence correlated with correctness;
// recordings of the same real sequence share an embedding prototype.
ScoreStream synth_scores(const ScoreStreamParams& params);

}  // namespace aerotrack
