#pragma once

#include <vector>

#include "aerotrack/mat.hpp"
#include "aerotrack/types.hpp"

namespace aerotrack {

// Linear Kalman filtering. The generic Mat-based steps work for any state
// dimension (the test suite drives them as a scalar filter against a
// closed-form oracle); the tracker instantiates the 6-state
// constant-velocity model (position + velocity, white-noise acceleration).

struct KfState {
  Mat x;  // column state vector
  Mat p;  // covariance
  Timestamp t = 0.0;
};

KfState kf_predict_linear(const KfState& s, const Mat& f, const Mat& q, Timestamp t_next);
KfState kf_update_linear(const KfState& s, const Mat& h, const Mat& r, const Mat& z);

// Constant-velocity specialization: state (px, py, pz, vx, vy, vz).
KfState cv_init(const Vec3& z, Timestamp t, double pos_var, double vel_var);
KfState cv_predict(const KfState& s, Timestamp t_next, double q);  // throws if t_next < s.t
KfState cv_update(const KfState& s, const Vec3& z, double r);
double cv_position_cov_trace(const KfState& s);

// Squared Mahalanobis distance of measurement z under the predicted state.
double cv_mahalanobis2(const KfState& s, const Vec3& z, double r);

// Exact min-cost assignment (Hungarian with potentials) for small matrices.
// Returns row -> column (-1 when a row is left unassigned on rectangular
// input). Deterministic for tied costs.
std::vector<int> solve_assignment(const Mat& cost);

struct TrackerConfig {
  double q = 1.0;         // process noise PSD, (m/s^2)^2 * s
  double r = 0.05;        // measurement noise variance, m^2
  double gate = 11.34;    // squared-Mahalanobis gate (chi^2, 3 dof, 0.99)
  double cov_kill = 9.0;  // position-covariance trace termination threshold, m^2
  int n_confirm = 2;
  double init_pos_var_factor = 10.0;  // initial position variance = r * factor
  double init_vel_var = 25.0;         // (m/s)^2
};

enum class TrackStatus { tentative, confirmed, dead };

struct Track {
  int id = 0;
  TrackStatus status = TrackStatus::tentative;
  KfState state;
  std::vector<StampedVec3> history;  // posterior positions of measurement-updated steps
  int hits = 0;
  int misses = 0;
};

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track index, detection index)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

// Global nearest neighbor on squared Mahalanobis cost with gating. Tracks
// must already be predicted to the detection timestamp.
Association associate(const std::vector<Track>& tracks, const std::vector<Detection>& detections,
                      double gate, double r);

class Tracker {
public:
  explicit Tracker(const TrackerConfig& cfg) : cfg_(cfg) {}

  // One association step for all detections sharing timestamp t. Unmatched
  // detections spawn tentative tracks; covariance blow-up kills tracks.
  void step(const std::vector<Detection>& detections, Timestamp t);

  const std::vector<Track>& live_tracks() const { return live_; }
  // Every track that ever reached confirmed status, with its history.
  std::vector<Track> confirmed_tracks() const;

private:
  TrackerConfig cfg_;
  std::vector<Track> live_;
  std::vector<Track> archive_;  // dead tracks that were confirmed
  int next_id_ = 1;
  Timestamp last_t_ = 0.0;
  bool stepped_ = false;
};

// Runs the tracker over a time-sorted detection stream (throws on unsorted
// input) and returns the confirmed tracks.
std::vector<Track> run_tracker(const std::vector<Detection>& detections, const TrackerConfig& cfg);

}  // namespace aerotrack
