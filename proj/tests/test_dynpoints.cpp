#include <algorithm>
#include <cmath>
#include <set>

#include "aerotrack/dynpoints.hpp"
#include "aerotrack/errors.hpp"
#include "doctest.h"

using namespace aerotrack;

namespace {

TemporalWindow window_from_points(const std::vector<std::vector<Vec3>>& per_frame, double dt = 0.1) {
  TemporalWindow w;
  for (std::size_t f = 0; f < per_frame.size(); ++f) {
    FramePointCloud frame;
    frame.t = dt * static_cast<double>(f);
    frame.sensor = SensorId::lidar_conic;
    frame.points = per_frame[f];
    w.frames.push_back(std::move(frame));
  }
  w.t_end = w.frames.empty() ? 0.0 : w.frames.back().t;
  return w;
}

}  // namespace

TEST_CASE("build_windows: counts and starts") {
  std::vector<FramePointCloud> frames;
  for (int i = 0; i < 100; ++i) frames.push_back({0.1 * i, SensorId::lidar_conic, {}});

  CHECK(build_windows(frames, 20, 20).size() == 5);
  CHECK(build_windows({frames.begin(), frames.begin() + 20}, 20, 1).size() == 1);

  const auto windows = build_windows({frames.begin(), frames.begin() + 25}, 20, 5);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].frames.front().t == doctest::Approx(0.0));
  CHECK(windows[1].frames.front().t == doctest::Approx(0.5));  // start index 5

  CHECK(build_windows({frames.begin(), frames.begin() + 10}, 20, 5).empty());
  CHECK_THROWS_AS(build_windows(frames, 1, 1), NumericError);
  CHECK_THROWS_AS(build_windows(frames, 20, 0), NumericError);
}

TEST_CASE("dbscan: two well-separated blobs") {
  Rng rng(21);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0});
  for (int i = 0; i < 50; ++i) pts.push_back({10 + rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0});
  const auto clusters = cluster_window(window_from_points({pts}), 1.0, 4);
  REQUIRE(clusters.size() == 2);
  CHECK(clusters[0].members.size() == 50);
  CHECK(clusters[1].members.size() == 50);
  CHECK(clusters[0].centroid.x < clusters[1].centroid.x);  // sorted by centroid
}

TEST_CASE("dbscan: isolated point is noise") {
  const auto clusters = cluster_window(window_from_points({{{0, 0, 0}}}), 1.0, 4);
  CHECK(clusters.empty());
}

TEST_CASE("dbscan: chain connects transitively") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({0.9 * i, 0, 0});
  const auto clusters = cluster_window(window_from_points({pts}), 1.0, 2);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].members.size() == 12);
}

TEST_CASE("dbscan: partition property and permutation invariance") {
  Rng rng(33);
  std::vector<Vec3> pts;
  for (int blob = 0; blob < 4; ++blob) {
    const Vec3 center{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0, 10)};
    const int n = 5 + static_cast<int>(rng.next_below(15));
    for (int i = 0; i < n; ++i)
      pts.push_back(center + Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)});
  }
  for (int i = 0; i < 10; ++i)
    pts.push_back({rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(50, 90)});

  const auto win = window_from_points({pts});
  const auto clusters = cluster_window(win, 1.0, 4);

  std::size_t clustered = 0;
  for (const auto& c : clusters) clustered += c.members.size();
  CHECK(clustered <= pts.size());

  // permuted input yields the same member multisets
  auto shuffled = pts;
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
  const auto clusters2 = cluster_window(window_from_points({shuffled}), 1.0, 4);
  REQUIRE(clusters2.size() == clusters.size());
  auto key = [](const Cluster& c) {
    std::multiset<std::tuple<double, double, double>> m;
    for (const auto& mem : c.members) m.insert({mem.p.x, mem.p.y, mem.p.z});
    return m;
  };
  for (std::size_t i = 0; i < clusters.size(); ++i) CHECK(key(clusters[i]) == key(clusters2[i]));
}

TEST_CASE("features: stationary cluster has zero velocity rows") {
  std::vector<std::vector<Vec3>> per_frame(20, {{5, 5, 12}, {5.1, 5, 12}, {5, 5.1, 12}, {5.05, 5.05, 12}});
  const auto win = window_from_points(per_frame);
  const auto clusters = cluster_window(win, 1.0, 4);
  REQUIRE(clusters.size() == 1);
  const auto feat = extract_features(clusters[0], win);
  for (int f = 0; f < 20; ++f) {
    REQUIRE(feat.mask[static_cast<std::size_t>(f)]);
    CHECK(feat.seq(static_cast<std::size_t>(f), 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(feat.seq(static_cast<std::size_t>(f), 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(feat.seq(static_cast<std::size_t>(f), 2) == doctest::Approx(0.0).epsilon(1e-12));
  }
  // count share: 4 points per frame, 80 total
  CHECK(feat.seq(3, 3) == doctest::Approx(4.0 / 80.0));
  CHECK(feat.seq(3, 4) == doctest::Approx(12.0));
}

TEST_CASE("features: translating centroid gives vx = 1 after the first frame") {
  std::vector<std::vector<Vec3>> per_frame;
  for (int f = 0; f < 20; ++f) {
    const double x = 0.1 * f;
    per_frame.push_back({{x, 0, 10}, {x + 0.1, 0, 10}, {x, 0.1, 10}, {x, 0, 10.1}});
  }
  const auto win = window_from_points(per_frame, 0.1);
  const auto clusters = cluster_window(win, 1.0, 4);
  REQUIRE(clusters.size() == 1);
  const auto feat = extract_features(clusters[0], win);
  CHECK(feat.seq(0, 0) == doctest::Approx(0.0));  // no predecessor
  for (std::size_t f = 1; f < 20; ++f) {
    CHECK(feat.seq(f, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(feat.seq(f, 1) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("features: single present frame has one mask bit and zero velocity") {
  std::vector<std::vector<Vec3>> per_frame(20);
  per_frame[5] = {{1, 1, 8}, {1.1, 1, 8}, {1, 1.1, 8}, {1.1, 1.1, 8}};
  const auto win = window_from_points(per_frame);
  const auto clusters = cluster_window(win, 1.0, 4);
  REQUIRE(clusters.size() == 1);
  const auto feat = extract_features(clusters[0], win);
  int present = 0;
  for (bool m : feat.mask) present += m ? 1 : 0;
  CHECK(present == 1);
  REQUIRE(feat.mask[5]);
  CHECK(feat.seq(5, 0) == 0.0);
  CHECK(feat.seq(5, 2) == 0.0);
  // masked rows exactly zero
  for (int k = 0; k < kFeatureDim; ++k) CHECK(feat.seq(4, static_cast<std::size_t>(k)) == 0.0);
}

namespace {

LabeledWindowSample moving_sample(double vx, double vy, double vz) {
  std::vector<std::vector<Vec3>> per_frame;
  const double dt = 0.1;
  for (int f = 0; f < 10; ++f) {
    const Vec3 c{3 + vx * dt * f, -2 + vy * dt * f, 15 + vz * dt * f};
    per_frame.push_back({c + Vec3{0.1, 0, 0}, c + Vec3{-0.1, 0, 0}, c + Vec3{0, 0.1, 0}, c + Vec3{0, -0.1, 0}});
  }
  const auto win = window_from_points(per_frame, dt);
  const auto clusters = cluster_window(win, 1.0, 4);
  REQUIRE(clusters.size() == 1);
  LabeledWindowSample s;
  s.feature = extract_features(clusters[0], win);
  s.label = SampleLabel::uav;
  s.target_center = clusters[0].centroid;
  for (const auto& m : clusters[0].members) s.points.push_back(m.p);
  return s;
}

}  // namespace

TEST_CASE("augment: disabled config is the identity") {
  const auto s = moving_sample(1.0, 0.5, -0.2);
  Rng rng(4);
  const auto out = augment(s, rng, {0.0, 0.0, 0.0});
  CHECK(out.feature.seq.data() == s.feature.seq.data());
  CHECK(out.feature.mask == s.feature.mask);
  CHECK(out.target_center.x == s.target_center.x);
}

TEST_CASE("augment: rotation by pi negates planar velocity, keeps range") {
  const auto s = moving_sample(1.0, 0.5, -0.2);
  const auto out = rotate_z(s, M_PI);
  for (std::size_t f = 1; f < 10; ++f) {
    CHECK(out.feature.seq(f, 0) == doctest::Approx(-s.feature.seq(f, 0)).epsilon(1e-9));
    CHECK(out.feature.seq(f, 1) == doctest::Approx(-s.feature.seq(f, 1)).epsilon(1e-9));
    CHECK(out.feature.seq(f, 2) == doctest::Approx(s.feature.seq(f, 2)).epsilon(1e-12));
    CHECK(out.feature.seq(f, 6) == doctest::Approx(s.feature.seq(f, 6)).epsilon(1e-12));
  }
  CHECK(out.target_center.x == doctest::Approx(-s.target_center.x).epsilon(1e-9));
}

TEST_CASE("augment: rotation preserves speed magnitude to 1e-12") {
  const auto s = moving_sample(1.3, -0.7, 0.4);
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const double angle = rng.uniform(0, 2 * M_PI);
    const auto out = rotate_z(s, angle);
    for (std::size_t f = 0; f < 10; ++f) {
      const double before = std::sqrt(s.feature.seq(f, 0) * s.feature.seq(f, 0) +
                                      s.feature.seq(f, 1) * s.feature.seq(f, 1) +
                                      s.feature.seq(f, 2) * s.feature.seq(f, 2));
      const double after = std::sqrt(out.feature.seq(f, 0) * out.feature.seq(f, 0) +
                                     out.feature.seq(f, 1) * out.feature.seq(f, 1) +
                                     out.feature.seq(f, 2) * out.feature.seq(f, 2));
      CHECK(after == doctest::Approx(before).epsilon(1e-12));
    }
  }
}

TEST_CASE("augment: reversal matches features recomputed on the reversed raw window") {
  // raw window with an absent frame to exercise the present-step bookkeeping
  std::vector<std::vector<Vec3>> per_frame;
  const double dt = 0.1;
  for (int f = 0; f < 8; ++f) {
    if (f == 3) {
      per_frame.push_back({});
      continue;
    }
    const Vec3 c{1 + 0.2 * f, 2 - 0.1 * f, 10 + 0.05 * f};
    per_frame.push_back({c + Vec3{0.1, 0, 0}, c + Vec3{-0.1, 0, 0}, c + Vec3{0, 0.1, 0}, c + Vec3{0, -0.1, 0}});
  }
  const auto win = window_from_points(per_frame, dt);
  const auto clusters = cluster_window(win, 1.5, 4);
  REQUIRE(clusters.size() == 1);
  LabeledWindowSample s;
  s.feature = extract_features(clusters[0], win);
  s.label = SampleLabel::background;

  const auto reversed = reverse_time(s);

  // oracle: reverse the raw frames (times mirrored) and re-extract
  std::vector<std::vector<Vec3>> rev_frames(per_frame.rbegin(), per_frame.rend());
  const auto rev_win = window_from_points(rev_frames, dt);
  const auto rev_clusters = cluster_window(rev_win, 1.5, 4);
  REQUIRE(rev_clusters.size() == 1);
  const auto oracle = extract_features(rev_clusters[0], rev_win);

  for (std::size_t f = 0; f < 8; ++f) {
    REQUIRE(reversed.feature.mask[f] == oracle.mask[f]);
    if (!oracle.mask[f]) continue;
    for (int k = 0; k < kFeatureDim; ++k)
      CHECK(reversed.feature.seq(f, static_cast<std::size_t>(k)) ==
            doctest::Approx(oracle.seq(f, static_cast<std::size_t>(k))).epsilon(1e-9));
  }
}

TEST_CASE("augment: frame dropout zeroes rows and clears mask") {
  const auto s = moving_sample(1.0, 0.0, 0.0);
  std::vector<bool> drop(10, false);
  drop[2] = drop[7] = true;
  const auto out = drop_frames(s, drop);
  CHECK_FALSE(out.feature.mask[2]);
  CHECK_FALSE(out.feature.mask[7]);
  for (int k = 0; k < kFeatureDim; ++k) CHECK(out.feature.seq(2, static_cast<std::size_t>(k)) == 0.0);
  CHECK(out.feature.mask[3]);
}

TEST_CASE("label_clusters: nearest-within-r_pos rule with ignore band") {
  GroundTruth gt;
  gt.samples = {{0.0, {0, 0, 10}}, {10.0, {0, 0, 10}}};

  std::vector<std::vector<Vec3>> per_frame(4);
  auto blob = [](const Vec3& c) {
    return std::vector<Vec3>{c + Vec3{0.1, 0, 0}, c + Vec3{-0.1, 0, 0}, c + Vec3{0, 0.1, 0},
                             c + Vec3{0, -0.1, 0}};
  };
  // three clusters: 0.3 m, 0.8 m, and 100 m from truth
  for (auto& frame : per_frame) {
    auto b1 = blob({0.3, 0, 10});
    auto b2 = blob({0, 0.8, 10});
    auto b3 = blob({100, 0, 10});
    frame.insert(frame.end(), b1.begin(), b1.end());
    frame.insert(frame.end(), b2.begin(), b2.end());
    frame.insert(frame.end(), b3.begin(), b3.end());
  }
  const auto win = window_from_points(per_frame);
  const auto clusters = cluster_window(win, 0.5, 4);
  REQUIRE(clusters.size() == 3);
  std::vector<ClusterTrackFeature> features;
  for (const auto& c : clusters) features.push_back(extract_features(c, win));

  const auto samples = label_clusters(clusters, features, gt, 1.0, 2.0);
  REQUIRE(samples.size() == 2);  // 0.8 m cluster discarded (inside r_neg, not nearest)
  int uav = 0, bg = 0;
  for (const auto& s : samples) {
    if (s.label == SampleLabel::uav) {
      ++uav;
      CHECK(distance(s.feature.centroid, Vec3{0.3, 0, 10}) < 0.05);
      CHECK(s.target_center.z == doctest::Approx(10.0));
      CHECK(!s.points.empty());
    } else {
      ++bg;
      CHECK(s.feature.centroid.x > 50);
    }
  }
  CHECK(uav == 1);
  CHECK(bg == 1);
}

TEST_CASE("label_clusters: window outside gt span is skipped with a warning") {
  GroundTruth gt;
  gt.samples = {{100.0, {0, 0, 10}}, {110.0, {0, 0, 10}}};
  std::vector<std::vector<Vec3>> per_frame(4, {{0, 0, 10}, {0.1, 0, 10}, {0, 0.1, 10}, {0.1, 0.1, 10}});
  const auto win = window_from_points(per_frame);  // t_end ~ 0.3
  const auto clusters = cluster_window(win, 1.0, 4);
  std::vector<ClusterTrackFeature> features;
  for (const auto& c : clusters) features.push_back(extract_features(c, win));
  std::vector<std::string> warnings;
  const auto samples = label_clusters(clusters, features, gt, 1.0, 2.0, &warnings);
  CHECK(samples.empty());
  CHECK(!warnings.empty());
}

TEST_CASE("label_clusters: centroid exactly at truth is uav, far cluster is background") {
  GroundTruth gt;
  gt.samples = {{0.0, {5, 5, 20}}, {1.0, {5, 5, 20}}};
  std::vector<std::vector<Vec3>> per_frame(4);
  for (auto& frame : per_frame)
    frame = {{5.1, 5, 20}, {4.9, 5, 20}, {5, 5.1, 20}, {5, 4.9, 20}};
  const auto win = window_from_points(per_frame);
  const auto clusters = cluster_window(win, 1.0, 4);
  std::vector<ClusterTrackFeature> features;
  for (const auto& c : clusters) features.push_back(extract_features(c, win));
  const auto samples = label_clusters(clusters, features, gt, 1.0, 2.0);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].label == SampleLabel::uav);
}
