#include "aerotrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "aerotrack/bspline.hpp"
#include "aerotrack/errors.hpp"

namespace aerotrack {

namespace {
constexpr double kDeg = M_PI / 180.0;

// point count model: round(30*exp(-range/60)), clamped to >= 3 inside range
int uav_point_count(double range, double scale) {
  const int n = static_cast<int>(std::lround(30.0 * std::exp(-range / 60.0) * scale));
  return std::max(3, n);
}
}  // namespace

SensorSpec SensorSpec::conic_lidar(double noise_sigma, double dropout_prob) {
  return {SensorId::lidar_conic, 360.0, 70.0, 300.0, 10.0, noise_sigma, dropout_prob, 1.0};
}

SensorSpec SensorSpec::peri_lidar(double noise_sigma, double dropout_prob) {
  return {SensorId::lidar_peri, 360.0, 59.0, 70.0, 10.0, noise_sigma, dropout_prob, 1.0};
}

SensorSpec SensorSpec::radar(double noise_sigma, double dropout_prob) {
  return {SensorId::radar, 120.0, 30.0, 350.0, 15.0, 4.0 * noise_sigma, dropout_prob, 1.0 / 3.0};
}

bool SensorSpec::in_fov(const Vec3& p) const {
  const double range = p.norm();
  if (range == 0.0 || range > max_range) return false;
  const double horiz = std::hypot(p.x, p.y);
  if (id == SensorId::lidar_conic) {
    // upward cone, apex angle fov_el_deg
    if (p.z <= 0.0) return false;
    return std::atan2(horiz, p.z) <= 0.5 * fov_el_deg * kDeg;
  }
  const double elev = std::atan2(p.z, horiz);
  if (std::fabs(elev) > 0.5 * fov_el_deg * kDeg) return false;
  if (fov_az_deg < 360.0) {
    const double az = std::atan2(p.y, p.x);  // boresight along +x
    if (std::fabs(az) > 0.5 * fov_az_deg * kDeg) return false;
  }
  return true;
}

Vec3 scenario_path(const Scenario& scenario, Timestamp t) {
  if (scenario.waypoints.empty()) throw NumericError("scenario: empty waypoint list");
  if (scenario.waypoints.size() == 1) return scenario.waypoints.front().second;
  std::vector<double> ts, xs, ys, zs;
  for (const auto& [wt, wp] : scenario.waypoints) {
    ts.push_back(wt);
    xs.push_back(wp.x);
    ys.push_back(wp.y);
    zs.push_back(wp.z);
  }
  const BSpline1D sx = interpolate_cubic(ts, xs);
  const BSpline1D sy = interpolate_cubic(ts, ys);
  const BSpline1D sz = interpolate_cubic(ts, zs);
  return {sx.eval(t), sy.eval(t), sz.eval(t)};
}

namespace {

struct PathSpline {
  BSpline1D x, y, z;
  Vec3 at(double t) const { return {x.eval(t), y.eval(t), z.eval(t)}; }
};

PathSpline build_path(const Scenario& sc) {
  if (sc.waypoints.empty()) throw NumericError("generate_scenario: empty waypoint list");
  std::vector<double> ts, xs, ys, zs;
  for (const auto& [wt, wp] : sc.waypoints) {
    if (!ts.empty() && wt <= ts.back())
      throw NumericError("generate_scenario: waypoints must be strictly time-sorted");
    ts.push_back(wt);
    xs.push_back(wp.x);
    ys.push_back(wp.y);
    zs.push_back(wp.z);
  }
  if (ts.size() == 1) {
    // hovering: duplicate the waypoint across the duration
    ts.push_back(sc.duration > ts[0] ? sc.duration : ts[0] + 1.0);
    xs.push_back(xs[0]);
    ys.push_back(ys[0]);
    zs.push_back(zs[0]);
  }
  return {interpolate_cubic(ts, xs), interpolate_cubic(ts, ys), interpolate_cubic(ts, zs)};
}

bool in_gap(const Scenario& sc, double t) {
  for (const auto& [a, b] : sc.gaps)
    if (t >= a && t <= b) return true;
  return false;
}

// Cluster with an exactly centroid-neutral point pattern: mirrored offset
// pairs plus the center when the count is odd. Noise (not mirrored) and the
// shared bias shift are added on top.
void emit_cluster(std::vector<Vec3>& out, Rng& rng, const Vec3& center, int count, double extent,
                  double noise_sigma, const Vec3& bias) {
  std::vector<Vec3> offsets;
  const int pairs = count / 2;
  for (int i = 0; i < pairs; ++i) {
    const Vec3 d{rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                 rng.uniform(-extent, extent)};
    offsets.push_back(d);
    offsets.push_back({-d.x, -d.y, -d.z});
  }
  if (count % 2 == 1) offsets.push_back({0, 0, 0});
  for (const auto& d : offsets) {
    Vec3 p = center + d + bias;
    if (noise_sigma > 0.0) {
      p.x += rng.normal(0.0, noise_sigma);
      p.y += rng.normal(0.0, noise_sigma);
      p.z += rng.normal(0.0, noise_sigma);
    }
    out.push_back(p);
  }
}

struct Bird {
  Vec3 start;
  Vec3 vel;
};

// Direction sampled uniformly inside the sensor's FoV at the given range.
Vec3 random_point_in_fov(Rng& rng, const SensorSpec& sensor, double range) {
  if (sensor.id == SensorId::lidar_conic) {
    const double half = 0.5 * sensor.fov_el_deg * kDeg;
    const double cos_theta = rng.uniform(std::cos(half), 1.0);
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    return {range * sin_theta * std::cos(az), range * sin_theta * std::sin(az), range * cos_theta};
  }
  const double az_half = 0.5 * sensor.fov_az_deg * kDeg;
  const double el_half = 0.5 * sensor.fov_el_deg * kDeg;
  const double az = rng.uniform(-az_half, az_half);
  const double el = rng.uniform(-el_half, el_half);
  const double horiz = range * std::cos(el);
  return {horiz * std::cos(az), horiz * std::sin(az), range * std::sin(el)};
}

}  // namespace

SyntheticSequence generate_scenario(const Scenario& scenario, const std::vector<SensorSpec>& sensors,
                                    double gt_rate_hz) {
  if (scenario.duration <= 0.0) throw NumericError("generate_scenario: duration must be positive");
  if (scenario.clutter_rate < 0.0) throw NumericError("generate_scenario: negative clutter_rate");
  const PathSpline path = build_path(scenario);

  SyntheticSequence out;
  out.truth.uav_class = scenario.uav_class;
  const int n_gt = static_cast<int>(std::floor(scenario.duration * gt_rate_hz + 1e-9));
  for (int k = 0; k <= n_gt; ++k) {
    const double t = static_cast<double>(k) / gt_rate_hz;
    out.truth.samples.emplace_back(t, path.at(t));
  }

  // scene furniture shared by all sensors, fixed per scenario
  Rng scene_rng(Rng::derive_seed(scenario.seed, "synth.scene"));
  std::vector<Bird> birds;
  const int n_birds = static_cast<int>(std::lround(scenario.clutter_rate));
  for (int b = 0; b < n_birds; ++b) {
    const Vec3 start{scene_rng.uniform(-40.0, 40.0), scene_rng.uniform(-40.0, 40.0),
                     scene_rng.uniform(12.0, 35.0)};
    const double speed = scene_rng.uniform(6.0, 12.0);
    const double heading = scene_rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 vel{speed * std::cos(heading), speed * std::sin(heading),
                   scene_rng.uniform(-0.5, 0.5)};
    birds.push_back({start, vel});
  }
  std::vector<Vec3> ground_clumps;
  for (int c = 0; c < 6; ++c) {
    const double r = scene_rng.uniform(10.0, 50.0);
    const double az = scene_rng.uniform(0.0, 2.0 * M_PI);
    ground_clumps.push_back({r * std::cos(az), r * std::sin(az), scene_rng.uniform(0.0, 0.4)});
  }

  bool uav_ever_covered = false;
  for (const auto& sensor : sensors) {
    Rng rng(Rng::derive_seed(scenario.seed, std::string("synth.") + to_string(sensor.id)));
    const int n_frames = static_cast<int>(std::floor(scenario.duration * sensor.rate_hz + 1e-9));
    for (int k = 0; k <= n_frames; ++k) {
      const double t = static_cast<double>(k) / sensor.rate_hz;
      const bool dropped = sensor.dropout_prob > 0.0 && rng.uniform() < sensor.dropout_prob;

      FramePointCloud frame;
      frame.t = t;
      frame.sensor = sensor.id;

      // static ground returns for the peripheral lidar
      if (sensor.id == SensorId::lidar_peri) {
        for (const auto& clump : ground_clumps) {
          if (!sensor.in_fov(clump)) continue;
          emit_cluster(frame.points, rng, clump, 8, 0.3, sensor.noise_sigma, {0, 0, 0});
        }
      }

      // UAV return
      const Vec3 p = path.at(t);
      if (sensor.in_fov(p)) {
        uav_ever_covered = true;
        if (!in_gap(scenario, t)) {
          const double range = p.norm();
          const int count = uav_point_count(range, sensor.point_scale);
          Vec3 bias{0, 0, 0};
          if (scenario.bias_gain != 0.0 && range > 0.0) {
            const double mag = scenario.bias_gain * range * range / 100.0;
            bias = p * (mag / range);
          }
          emit_cluster(frame.points, rng, p, count, 0.2, sensor.noise_sigma, bias);
        }
      }

      // bird-like distractors
      for (const auto& bird : birds) {
        const Vec3 bp = bird.start + bird.vel * t;
        if (!sensor.in_fov(bp)) continue;
        emit_cluster(frame.points, rng, bp, std::max(3, static_cast<int>(8 * sensor.point_scale)),
                     0.8, sensor.noise_sigma, {0, 0, 0});
      }

      // transient clutter
      if (scenario.clutter_rate > 0.0) {
        const int n_clutter = rng.poisson(scenario.clutter_rate);
        for (int c = 0; c < n_clutter; ++c) {
          const double range = rng.uniform(8.0, std::min(100.0, sensor.max_range));
          const Vec3 cp = random_point_in_fov(rng, sensor, range);
          const int count = 4 + static_cast<int>(rng.next_below(8));
          emit_cluster(frame.points, rng, cp, count, 0.25, sensor.noise_sigma, {0, 0, 0});
        }
      }

      if (!dropped) out.frames.push_back(std::move(frame));
    }
  }

  // merge sensors by time; ties broken by sensor id order
  std::stable_sort(out.frames.begin(), out.frames.end(),
                   [](const FramePointCloud& a, const FramePointCloud& b) {
                     if (a.t != b.t) return a.t < b.t;
                     return static_cast<int>(a.sensor) < static_cast<int>(b.sensor);
                   });

  if (!uav_ever_covered)
    out.warnings.push_back("UAV path is outside all sensor coverage for the entire duration");
  return out;
}

ScoreStream synth_scores(const ScoreStreamParams& params) {
  if (params.n_real_sequences < 1) throw NumericError("synth_scores: need at least one sequence");
  if (params.embed_dim < 2) throw NumericError("synth_scores: embed_dim too small");
  Rng rng(Rng::derive_seed(params.seed, "synth.scores"));
  ScoreStream out;
  int seq_counter = 0;
  for (int r = 0; r < params.n_real_sequences; ++r) {
    const auto cls = static_cast<UavClass>(rng.next_below(4));
    // per-real-sequence embedding prototype (scene appearance, not class)
    std::vector<double> proto(static_cast<std::size_t>(params.embed_dim));
    double norm = 0.0;
    for (auto& v : proto) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : proto) v /= norm;

    const int n_rec = params.min_recordings +
                      static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(params.max_recordings - params.min_recordings + 1)));
    for (int m = 0; m < n_rec; ++m) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "seq_%04d", seq_counter++);
      const std::string seq_id = buf;
      out.labels.emplace_back(seq_id, cls);
      const int n_frames = params.min_frames +
                           static_cast<int>(rng.next_below(
                               static_cast<std::uint64_t>(params.max_frames - params.min_frames + 1)));
      for (int f = 0; f < n_frames; ++f) {
        FrameRecord rec;
        rec.seq_id = seq_id;
        rec.frame = f;
        rec.embedding.resize(proto.size());
        for (std::size_t i = 0; i < proto.size(); ++i) rec.embedding[i] = proto[i] + 0.05 * rng.normal();

        const double q = rng.uniform();
        rec.det_conf = q;
        const bool correct = rng.uniform() < params.acc_lo + (params.acc_hi - params.acc_lo) * q;
        std::array<double, 4> logits{};
        for (auto& l : logits) l = 0.4 * rng.normal();
        int winner = static_cast<int>(cls);
        if (!correct) {
          int w = static_cast<int>(rng.next_below(3));
          if (w >= static_cast<int>(cls)) ++w;
          winner = w;
        }
        double max_other = -1e30;
        for (int k = 0; k < 4; ++k)
          if (k != winner) max_other = std::max(max_other, logits[static_cast<std::size_t>(k)]);
        logits[static_cast<std::size_t>(winner)] = max_other + 0.5 + 1.5 * q;

        double denom = 0.0;
        std::array<double, 4> sm{};
        const double mx = *std::max_element(logits.begin(), logits.end());
        for (int k = 0; k < 4; ++k) {
          sm[static_cast<std::size_t>(k)] = std::exp(logits[static_cast<std::size_t>(k)] - mx);
          denom += sm[static_cast<std::size_t>(k)];
        }
        for (auto& v : sm) v /= denom;
        rec.softmax = sm;
        out.records.push_back(std::move(rec));
      }
    }
  }
  return out;
}

}  // namespace aerotrack
