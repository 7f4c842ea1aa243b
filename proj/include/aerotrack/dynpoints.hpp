#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aerotrack/mat.hpp"
#include "aerotrack/rng.hpp"
#include "aerotrack/types.hpp"

namespace aerotrack {

constexpr int kFeatureDim = 7;

// W consecutive frames of the merged, time-sorted stream.
struct TemporalWindow {
  std::vector<FramePointCloud> frames;
  Timestamp t_end = 0.0;
};

// Streaming window builder; emits a window every `stride` frames once W
// frames have accumulated.
class WindowBuilder {
public:
  WindowBuilder(int w, int stride);
  std::optional<TemporalWindow> push(const FramePointCloud& frame);

private:
  int w_;
  int stride_;
  long count_ = 0;
  std::vector<FramePointCloud> buffer_;
};

std::vector<TemporalWindow> build_windows(const std::vector<FramePointCloud>& frames, int w, int stride);

// Density-connected point group within one window.
struct Cluster {
  struct Member {
    int frame_idx;  // index into the window's frame list
    Vec3 p;
  };
  std::vector<Member> members;
  Vec3 centroid;               // mean of members
  std::vector<bool> presence;  // per window frame
};

// DBSCAN over the accumulated 3D points of the window. Input order never
// matters: points are canonicalized before seeding, and the returned
// clusters are sorted by centroid (x, y, z).
std::vector<Cluster> cluster_window(const TemporalWindow& window, double eps, int min_points);

// Per-frame 7-dim rows: (vx, vy, vz, n_f/sum_n, mean_z, bbox_diag, range/100).
// Velocity is the finite difference of per-frame centroids against the
// previous present frame (zero for the first). Masked rows are exactly zero.
struct ClusterTrackFeature {
  Mat seq;                 // W x 7
  std::vector<bool> mask;  // present frames
  Timestamp t_end = 0.0;
  Vec3 centroid;
};

ClusterTrackFeature extract_features(const Cluster& cluster, const TemporalWindow& window);

enum class SampleLabel { uav, background };

struct LabeledWindowSample {
  ClusterTrackFeature feature;
  SampleLabel label = SampleLabel::background;
  Vec3 target_center;        // valid iff label == uav
  std::vector<Vec3> points;  // cluster member positions (input to center regression)
};

struct AugmentConfig {
  double p_drop = 0.0;     // per-frame dropout probability
  double p_reverse = 0.5;  // probability of temporal reversal
  double p_rotate = 1.0;   // probability of a global rotation about z
};

// Deterministic augmentation primitives. Reversal reproduces the features
// of the time-reversed raw window (velocities negated and re-anchored);
// rotation spins (vx, vy), the member points, and the regression target
// about the z axis through the origin, leaving height/bbox/range rows
// untouched.
LabeledWindowSample reverse_time(const LabeledWindowSample& sample);
LabeledWindowSample rotate_z(const LabeledWindowSample& sample, double angle_rad);
LabeledWindowSample drop_frames(const LabeledWindowSample& sample, const std::vector<bool>& drop);

// Stochastic composition of the three primitives (dropout, reversal,
// rotation, in that order). Keeps at least one present frame.
LabeledWindowSample augment(const LabeledWindowSample& sample, Rng& rng, const AugmentConfig& cfg);

// Nearest-neighbor labeling against ground truth at the window end time:
// within r_pos and nearest -> uav; within r_neg -> dropped (ignore band);
// beyond r_neg -> background. Windows outside the truth span are skipped.
std::vector<LabeledWindowSample> label_clusters(const std::vector<Cluster>& clusters,
                                                const std::vector<ClusterTrackFeature>& features,
                                                const GroundTruth& gt, double r_pos, double r_neg,
                                                std::vector<std::string>* warnings = nullptr);

}  // namespace aerotrack
