#include <cstdio>
#include <fstream>
#include <map>

#include "aerotrack/errors.hpp"
#include "aerotrack/io.hpp"
#include "aerotrack/synth.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aerotrack;
using aerotrack_test::TempDir;
using aerotrack_test::slurp;

TEST_CASE("frames: write one frame, read it back") {
  TempDir dir;
  const std::string path = dir.file("frames.jsonl");
  write_frames(path, {{0.0, SensorId::lidar_conic, {{1, 2, 3}}}});
  const auto frames = read_frames(path);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].t == 0.0);
  CHECK(frames[0].sensor == SensorId::lidar_conic);
  REQUIRE(frames[0].points.size() == 1);
  CHECK(frames[0].points[0].x == 1.0);
  CHECK(frames[0].points[0].z == 3.0);
}

TEST_CASE("frames: empty file yields empty stream") {
  TempDir dir;
  const std::string path = dir.file("frames.jsonl");
  std::ofstream(path).close();
  CHECK(read_frames(path).empty());
}

TEST_CASE("frames: malformed point names line 1") {
  TempDir dir;
  const std::string path = dir.file("frames.jsonl");
  std::ofstream(path) << "{\"t\":0,\"sensor\":\"radar\",\"points\":[[1,2]]}\n";
  CHECK_THROWS_WITH_AS(read_frames(path), doctest::Contains(":1:"), IoError);
}

TEST_CASE("frames: non-monotone timestamps rejected") {
  TempDir dir;
  const std::string path = dir.file("frames.jsonl");
  std::ofstream(path) << "{\"t\":1,\"sensor\":\"radar\",\"points\":[]}\n"
                      << "{\"t\":0.5,\"sensor\":\"radar\",\"points\":[]}\n";
  CHECK_THROWS_WITH_AS(read_frames(path), doctest::Contains("non-monotone"), IoError);
}

TEST_CASE("round trips across all formats") {
  TempDir dir;
  Rng rng(404);
  SUBCASE("frames random round trip") {
    std::vector<FramePointCloud> frames;
    double t = 0.0;
    for (int i = 0; i < 20; ++i) {
      FramePointCloud f;
      t += rng.uniform(0.0, 0.4);
      f.t = t;
      f.sensor = static_cast<SensorId>(rng.next_below(3));
      const int n = static_cast<int>(rng.next_below(6));
      for (int k = 0; k < n; ++k)
        f.points.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 80)});
      frames.push_back(std::move(f));
    }
    const std::string path = dir.file("frames.jsonl");
    write_frames(path, frames);
    // a second write of the read-back bytes is identical (9-digit fixed point)
    const auto again = read_frames(path);
    const std::string path2 = dir.file("frames2.jsonl");
    write_frames(path2, again);
    CHECK(slurp(path) == slurp(path2));
    REQUIRE(again.size() == frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      CHECK(again[i].sensor == frames[i].sensor);
      REQUIRE(again[i].points.size() == frames[i].points.size());
      for (std::size_t k = 0; k < frames[i].points.size(); ++k)
        CHECK(again[i].points[k].x ==
              doctest::Approx(frames[i].points[k].x).epsilon(1e-8));
    }
  }
  SUBCASE("gt round trip") {
    GroundTruth gt;
    gt.uav_class = UavClass::m30t;
    for (int i = 0; i < 30; ++i)
      gt.samples.emplace_back(0.1 * i, Vec3{rng.normal(), rng.normal(), 20 + rng.normal()});
    const std::string path = dir.file("gt.csv");
    write_gt(path, gt);
    const GroundTruth back = read_gt(path);
    CHECK(back.uav_class == gt.uav_class);
    REQUIRE(back.samples.size() == gt.samples.size());
    write_gt(dir.file("gt2.csv"), back);
    CHECK(slurp(path) == slurp(dir.file("gt2.csv")));
  }
  SUBCASE("detections round trip") {
    std::vector<Detection> dets;
    for (int i = 0; i < 15; ++i)
      dets.push_back({0.5 * i, {rng.normal(), rng.normal(), rng.normal()}, rng.uniform(), i});
    const std::string path = dir.file("d.jsonl");
    write_detections(path, dets);
    const auto back = read_detections(path);
    REQUIRE(back.size() == dets.size());
    write_detections(dir.file("d2.jsonl"), back);
    CHECK(slurp(path) == slurp(dir.file("d2.jsonl")));
  }
  SUBCASE("tracks round trip") {
    std::vector<TrackDump> tracks;
    tracks.push_back({3, {{0.0, {1, 2, 3}}, {0.5, {1.1, 2.1, 3.1}}}});
    tracks.push_back({7, {{1.0, {-4, 0, 9}}}});
    const std::string path = dir.file("tracks.csv");
    write_tracks(path, tracks);
    const auto back = read_tracks(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].track_id == 3);
    CHECK(back[1].history[0].second.z == 9.0);
    write_tracks(dir.file("tracks2.csv"), back);
    CHECK(slurp(path) == slurp(dir.file("tracks2.csv")));
  }
  SUBCASE("scores round trip") {
    std::vector<FrameRecord> records;
    for (int i = 0; i < 10; ++i) {
      FrameRecord r;
      r.seq_id = "seq_0001";
      r.frame = i;
      r.embedding = {rng.normal(), rng.normal(), rng.normal()};
      r.det_conf = rng.uniform();
      r.softmax = {0.25, 0.25, 0.25, 0.25};
      records.push_back(std::move(r));
    }
    const std::string path = dir.file("scores.jsonl");
    write_scores(path, records);
    const auto back = read_scores(path);
    REQUIRE(back.size() == records.size());
    write_scores(dir.file("scores2.jsonl"), back);
    CHECK(slurp(path) == slurp(dir.file("scores2.jsonl")));
  }
  SUBCASE("traj round trip") {
    Trajectory traj;
    traj.samples.push_back({0.0, {0, 0, 10}, TrajFlag::tracked});
    traj.samples.push_back({0.5, {0.1, 0, 10}, TrajFlag::completed});
    traj.samples.push_back({1.0, {0.2, 0, 10}, TrajFlag::interpolated});
    const std::string path = dir.file("traj.csv");
    write_traj(path, traj);
    const auto back = read_traj(path);
    REQUIRE(back.samples.size() == 3);
    CHECK(back.samples[1].flag == TrajFlag::completed);
    write_traj(dir.file("traj2.csv"), back);
    CHECK(slurp(path) == slurp(dir.file("traj2.csv")));
  }
  SUBCASE("predictions round trip") {
    std::vector<SequencePrediction> preds;
    preds.push_back({"seq_0000", UavClass::mavic3, {0.1, 0.2, 0.3, 2.4}});
    const std::string path = dir.file("p.csv");
    write_predictions(path, preds);
    const auto back = read_predictions(path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].cls == UavClass::mavic3);
    write_predictions(dir.file("p2.csv"), back);
    CHECK(slurp(path) == slurp(dir.file("p2.csv")));
  }
}

TEST_CASE("gt: strictly increasing timestamps enforced") {
  TempDir dir;
  std::ofstream(dir.file("gt.csv")) << "t,x,y,z,class\n0.5,0,0,10,m300\n0.5,0,0,11,m300\n";
  CHECK_THROWS_AS(read_gt(dir.file("gt.csv")), IoError);
}

// --- scenario generation -----------------------------------------------------

namespace {
Scenario hover_scenario(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.duration = 5.0;
  sc.uav_class = UavClass::phantom4;
  sc.waypoints = {{0.0, {0, 0, 10}}, {5.0, {0, 0, 10}}};
  sc.clutter_rate = 0.0;
  sc.bias_gain = 0.0;
  return sc;
}
}  // namespace

TEST_CASE("synth: noiseless hover puts one exact cluster in every conic frame") {
  const auto seq = generate_scenario(hover_scenario(1), {SensorSpec::conic_lidar(0.0, 0.0)});
  REQUIRE(seq.frames.size() == 51);  // 10 Hz over [0, 5]
  for (const auto& f : seq.frames) {
    REQUIRE(!f.points.empty());
    Vec3 centroid{0, 0, 0};
    for (const auto& p : f.points) centroid += p;
    centroid = centroid / static_cast<double>(f.points.size());
    CHECK(std::fabs(centroid.x - 0.0) < 1e-9);
    CHECK(std::fabs(centroid.y - 0.0) < 1e-9);
    CHECK(std::fabs(centroid.z - 10.0) < 1e-9);
  }
  CHECK(seq.truth.samples.front().second.z == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("synth: same seed, byte-identical files") {
  TempDir dir;
  Scenario sc = hover_scenario(77);
  sc.clutter_rate = 1.5;
  sc.bias_gain = 0.01;
  const std::vector<SensorSpec> sensors{SensorSpec::conic_lidar(0.05, 0.1),
                                        SensorSpec::peri_lidar(0.05, 0.1),
                                        SensorSpec::radar(0.05, 0.1)};
  const auto a = generate_scenario(sc, sensors);
  const auto b = generate_scenario(sc, sensors);
  write_frames(dir.file("a.jsonl"), a.frames);
  write_frames(dir.file("b.jsonl"), b.frames);
  CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
  write_gt(dir.file("a.csv"), a.truth);
  write_gt(dir.file("b.csv"), b.truth);
  CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
}

TEST_CASE("synth: radial bias displaces the centroid by gain*range^2/100") {
  Scenario sc = hover_scenario(3);
  sc.waypoints = {{0.0, {0, 0, 20}}, {5.0, {0, 0, 20}}};  // range 20 on the cone axis
  sc.bias_gain = 0.01;
  const auto seq = generate_scenario(sc, {SensorSpec::conic_lidar(0.0, 0.0)});
  REQUIRE(!seq.frames.empty());
  const auto& f = seq.frames.front();
  Vec3 centroid{0, 0, 0};
  for (const auto& p : f.points) centroid += p;
  centroid = centroid / static_cast<double>(f.points.size());
  // bias = 0.01 * 400 / 100 = 0.04 m, radially (straight up here)
  CHECK(std::fabs(centroid.z - 20.04) < 1e-9);
  CHECK(std::fabs(centroid.x) < 1e-9);
}

TEST_CASE("synth: generated points respect FoV and range") {
  Scenario sc = hover_scenario(5);
  sc.clutter_rate = 3.0;
  sc.waypoints = {{0.0, {2, -4, 20}}, {5.0, {4, 2, 24}}};
  const std::vector<SensorSpec> sensors{SensorSpec::conic_lidar(0.05, 0.0),
                                        SensorSpec::peri_lidar(0.05, 0.0),
                                        SensorSpec::radar(0.05, 0.0)};
  const auto seq = generate_scenario(sc, sensors);
  int checked = 0;
  for (const auto& f : seq.frames) {
    const SensorSpec& spec = f.sensor == SensorId::lidar_conic
                                 ? sensors[0]
                                 : (f.sensor == SensorId::lidar_peri ? sensors[1] : sensors[2]);
    for (const auto& p : f.points) {
      // noise can push points slightly past the nominal bounds
      CHECK(p.norm() <= spec.max_range + 1.0);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("synth: frame streams are time-sorted with sensor-order ties") {
  Scenario sc = hover_scenario(9);
  const std::vector<SensorSpec> sensors{SensorSpec::conic_lidar(0.0, 0.0),
                                        SensorSpec::peri_lidar(0.0, 0.0)};
  const auto seq = generate_scenario(sc, sensors);
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    const auto& a = seq.frames[i - 1];
    const auto& b = seq.frames[i];
    CHECK(a.t <= b.t);
    if (a.t == b.t) CHECK(static_cast<int>(a.sensor) < static_cast<int>(b.sensor));
  }
}

TEST_CASE("synth: out-of-coverage path warns instead of failing") {
  Scenario sc = hover_scenario(2);
  sc.waypoints = {{0.0, {0, 0, -50}}, {5.0, {0, 0, -50}}};  // below every sensor
  const auto seq = generate_scenario(sc, {SensorSpec::conic_lidar(0.0, 0.0)});
  CHECK(!seq.warnings.empty());
  for (const auto& f : seq.frames) CHECK(f.points.empty());
}

TEST_CASE("synth: empty waypoints are an error") {
  Scenario sc = hover_scenario(2);
  sc.waypoints.clear();
  CHECK_THROWS_AS(generate_scenario(sc, {SensorSpec::conic_lidar(0.0, 0.0)}), NumericError);
}

TEST_CASE("synth scores: per-frame accuracy near the configured mean") {
  ScoreStreamParams params;
  params.seed = 11;
  params.n_real_sequences = 40;
  const auto stream = synth_scores(params);
  std::map<std::string, UavClass> labels(stream.labels.begin(), stream.labels.end());
  int correct = 0;
  for (const auto& r : stream.records) {
    const auto truth = static_cast<std::size_t>(labels.at(r.seq_id));
    std::size_t best = 0;
    for (std::size_t k = 1; k < 4; ++k)
      if (r.softmax[k] > r.softmax[best]) best = k;
    if (best == truth) ++correct;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(stream.records.size());
  CHECK(acc == doctest::Approx(0.6).epsilon(0.05));
}
