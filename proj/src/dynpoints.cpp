#include "aerotrack/dynpoints.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <unordered_map>

#include "aerotrack/errors.hpp"

namespace aerotrack {

WindowBuilder::WindowBuilder(int w, int stride) : w_(w), stride_(stride) {
  if (w < 2) throw NumericError("build_windows: W must be >= 2");
  if (stride < 1) throw NumericError("build_windows: stride must be >= 1");
}

std::optional<TemporalWindow> WindowBuilder::push(const FramePointCloud& frame) {
  buffer_.push_back(frame);
  ++count_;
  if (static_cast<int>(buffer_.size()) > w_) buffer_.erase(buffer_.begin());
  // window i covers frames [i*stride, i*stride + W)
  if (count_ >= w_ && (count_ - w_) % stride_ == 0) {
    TemporalWindow win;
    win.frames = buffer_;
    win.t_end = buffer_.back().t;
    return win;
  }
  return std::nullopt;
}

std::vector<TemporalWindow> build_windows(const std::vector<FramePointCloud>& frames, int w, int stride) {
  WindowBuilder builder(w, stride);
  std::vector<TemporalWindow> out;
  for (const auto& f : frames) {
    if (auto win = builder.push(f)) out.push_back(std::move(*win));
  }
  return out;
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full;
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

}  // namespace

std::vector<Cluster> cluster_window(const TemporalWindow& window, double eps, int min_points) {
  if (eps <= 0.0) throw NumericError("cluster_window: eps must be positive");
  if (min_points < 1) throw NumericError("cluster_window: min_points must be >= 1");

  std::vector<Cluster::Member> pts;
  for (std::size_t f = 0; f < window.frames.size(); ++f)
    for (const auto& p : window.frames[f].points) pts.push_back({static_cast<int>(f), p});
  if (pts.empty()) return {};

  // canonical order makes the result independent of input permutation
  std::sort(pts.begin(), pts.end(), [](const Cluster::Member& a, const Cluster::Member& b) {
    if (a.p.x != b.p.x) return a.p.x < b.p.x;
    if (a.p.y != b.p.y) return a.p.y < b.p.y;
    if (a.p.z != b.p.z) return a.p.z < b.p.z;
    return a.frame_idx < b.frame_idx;
  });

  const std::size_t n = pts.size();
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid;
  grid.reserve(n);
  auto cell_of = [eps](const Vec3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x / eps)),
                   static_cast<std::int64_t>(std::floor(p.y / eps)),
                   static_cast<std::int64_t>(std::floor(p.z / eps))};
  };
  for (std::size_t i = 0; i < n; ++i) grid[cell_of(pts[i].p)].push_back(static_cast<std::uint32_t>(i));

  const double eps2 = eps * eps;
  std::vector<std::uint32_t> neigh;
  auto region_query = [&](std::size_t i) {
    neigh.clear();
    const CellKey c = cell_of(pts[i].p);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t j : it->second) {
            const Vec3 d = pts[i].p - pts[j].p;
            if (d.norm2() <= eps2) neigh.push_back(j);
          }
        }
  };

  constexpr int kUnvisited = -2, kNoise = -1;
  std::vector<int> assign(n, kUnvisited);
  int n_clusters = 0;
  std::deque<std::uint32_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (assign[i] != kUnvisited) continue;
    region_query(i);
    if (static_cast<int>(neigh.size()) < min_points) {
      assign[i] = kNoise;
      continue;
    }
    const int cid = n_clusters++;
    assign[i] = cid;
    frontier.assign(neigh.begin(), neigh.end());
    while (!frontier.empty()) {
      const std::uint32_t j = frontier.front();
      frontier.pop_front();
      if (assign[j] == kNoise) assign[j] = cid;  // border point
      if (assign[j] != kUnvisited) continue;
      assign[j] = cid;
      region_query(j);
      if (static_cast<int>(neigh.size()) >= min_points)
        frontier.insert(frontier.end(), neigh.begin(), neigh.end());
    }
  }

  std::vector<Cluster> clusters(static_cast<std::size_t>(n_clusters));
  for (auto& c : clusters) c.presence.assign(window.frames.size(), false);
  for (std::size_t i = 0; i < n; ++i) {
    if (assign[i] < 0) continue;
    auto& c = clusters[static_cast<std::size_t>(assign[i])];
    c.members.push_back(pts[i]);
    c.presence[static_cast<std::size_t>(pts[i].frame_idx)] = true;
  }
  for (auto& c : clusters) {
    Vec3 sum{0, 0, 0};
    for (const auto& m : c.members) sum += m.p;
    c.centroid = sum / static_cast<double>(c.members.size());
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.centroid.x != b.centroid.x) return a.centroid.x < b.centroid.x;
    if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
    return a.centroid.z < b.centroid.z;
  });
  return clusters;
}

ClusterTrackFeature extract_features(const Cluster& cluster, const TemporalWindow& window) {
  if (cluster.members.empty()) throw NumericError("extract_features: empty cluster");
  const std::size_t w = window.frames.size();
  ClusterTrackFeature out;
  out.seq = Mat(w, kFeatureDim);
  out.mask.assign(w, false);
  out.t_end = window.t_end;
  out.centroid = cluster.centroid;

  struct FrameStat {
    int n = 0;
    Vec3 sum{0, 0, 0};
    Vec3 lo{0, 0, 0}, hi{0, 0, 0};
  };
  std::vector<FrameStat> stats(w);
  for (const auto& m : cluster.members) {
    auto& s = stats[static_cast<std::size_t>(m.frame_idx)];
    if (s.n == 0) {
      s.lo = s.hi = m.p;
    } else {
      s.lo = {std::min(s.lo.x, m.p.x), std::min(s.lo.y, m.p.y), std::min(s.lo.z, m.p.z)};
      s.hi = {std::max(s.hi.x, m.p.x), std::max(s.hi.y, m.p.y), std::max(s.hi.z, m.p.z)};
    }
    s.sum += m.p;
    ++s.n;
  }
  const double total = static_cast<double>(cluster.members.size());

  bool have_prev = false;
  Vec3 prev_centroid;
  double prev_t = 0.0;
  for (std::size_t f = 0; f < w; ++f) {
    const auto& s = stats[f];
    if (s.n == 0) continue;
    out.mask[f] = true;
    const Vec3 c = s.sum / static_cast<double>(s.n);
    const double t = window.frames[f].t;
    Vec3 v{0, 0, 0};
    if (have_prev) {
      const double dt = t - prev_t;
      if (dt > 1e-12) v = (c - prev_centroid) / dt;
    }
    out.seq(f, 0) = v.x;
    out.seq(f, 1) = v.y;
    out.seq(f, 2) = v.z;
    out.seq(f, 3) = static_cast<double>(s.n) / total;
    out.seq(f, 4) = s.sum.z / static_cast<double>(s.n);
    out.seq(f, 5) = (s.hi - s.lo).norm();
    out.seq(f, 6) = c.norm() / 100.0;
    prev_centroid = c;
    prev_t = t;
    have_prev = true;
  }
  return out;
}

LabeledWindowSample drop_frames(const LabeledWindowSample& sample, const std::vector<bool>& drop) {
  LabeledWindowSample out = sample;
  const std::size_t w = out.feature.mask.size();
  if (drop.size() != w) throw NumericError("drop_frames: mask length mismatch");
  for (std::size_t f = 0; f < w; ++f) {
    if (!drop[f]) continue;
    out.feature.mask[f] = false;
    for (int k = 0; k < kFeatureDim; ++k) out.feature.seq(f, static_cast<std::size_t>(k)) = 0.0;
  }
  return out;
}

LabeledWindowSample reverse_time(const LabeledWindowSample& sample) {
  const auto& src = sample.feature;
  const std::size_t w = src.mask.size();
  LabeledWindowSample out = sample;
  ClusterTrackFeature rev = src;
  for (std::size_t f = 0; f < w; ++f) {
    const std::size_t g = w - 1 - f;
    rev.mask[f] = src.mask[g];
    for (int k = 0; k < kFeatureDim; ++k)
      rev.seq(f, static_cast<std::size_t>(k)) = src.seq(g, static_cast<std::size_t>(k));
  }
  // In the reversed sequence, present step i (original present index
  // p_{m-1-i}) carries -v(p_{m-i}); the first present step carries 0.
  std::vector<std::size_t> present;
  for (std::size_t f = 0; f < w; ++f)
    if (src.mask[f]) present.push_back(f);
  const std::size_t m = present.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t row = w - 1 - present[m - 1 - i];
    for (int k = 0; k < 3; ++k) {
      const double v = (i == 0) ? 0.0 : -src.seq(present[m - i], static_cast<std::size_t>(k));
      rev.seq(row, static_cast<std::size_t>(k)) = v;
    }
  }
  out.feature = std::move(rev);
  return out;
}

LabeledWindowSample rotate_z(const LabeledWindowSample& sample, double angle_rad) {
  LabeledWindowSample out = sample;
  const std::size_t w = out.feature.mask.size();
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  auto rot = [&](const Vec3& p) { return Vec3{ca * p.x - sa * p.y, sa * p.x + ca * p.y, p.z}; };
  for (std::size_t f = 0; f < w; ++f) {
    if (!out.feature.mask[f]) continue;
    const double vx = out.feature.seq(f, 0), vy = out.feature.seq(f, 1);
    out.feature.seq(f, 0) = ca * vx - sa * vy;
    out.feature.seq(f, 1) = sa * vx + ca * vy;
  }
  out.feature.centroid = rot(out.feature.centroid);
  for (auto& p : out.points) p = rot(p);
  if (out.label == SampleLabel::uav) out.target_center = rot(out.target_center);
  return out;
}

LabeledWindowSample augment(const LabeledWindowSample& sample, Rng& rng, const AugmentConfig& cfg) {
  LabeledWindowSample out = sample;
  const std::size_t w = out.feature.mask.size();

  if (cfg.p_drop > 0.0) {
    std::vector<bool> drop(w, false);
    bool any_left = false;
    for (std::size_t f = 0; f < w; ++f) {
      if (!out.feature.mask[f]) continue;
      drop[f] = rng.uniform() < cfg.p_drop;
      if (!drop[f]) any_left = true;
    }
    if (any_left) out = drop_frames(out, drop);
  }
  if (cfg.p_reverse > 0.0 && rng.uniform() < cfg.p_reverse) out = reverse_time(out);
  if (cfg.p_rotate > 0.0 && rng.uniform() < cfg.p_rotate)
    out = rotate_z(out, rng.uniform(0.0, 2.0 * M_PI));
  return out;
}

std::vector<LabeledWindowSample> label_clusters(const std::vector<Cluster>& clusters,
                                                const std::vector<ClusterTrackFeature>& features,
                                                const GroundTruth& gt, double r_pos, double r_neg,
                                                std::vector<std::string>* warnings) {
  if (clusters.size() != features.size())
    throw NumericError("label_clusters: clusters/features size mismatch");
  if (!(r_pos > 0.0) || r_neg < r_pos) throw NumericError("label_clusters: need r_neg >= r_pos > 0");
  std::vector<LabeledWindowSample> out;
  if (clusters.empty()) return out;

  const Timestamp t_end = features.front().t_end;
  if (!gt.covers(t_end)) {
    if (warnings)
      warnings->push_back("window at t_end=" + std::to_string(t_end) + " outside ground-truth span; skipped");
    return out;
  }
  const Vec3 gt_pos = gt.interpolate(t_end);

  // the single nearest cluster inside r_pos is the uav; distance ties go to
  // the earlier cluster in centroid order
  int best = -1;
  double best_d = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const double d = distance(clusters[i].centroid, gt_pos);
    if (d <= r_pos && (best == -1 || d < best_d)) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }

  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const double d = distance(clusters[i].centroid, gt_pos);
    LabeledWindowSample s;
    s.feature = features[i];
    s.points.reserve(clusters[i].members.size());
    for (const auto& m : clusters[i].members) s.points.push_back(m.p);
    if (static_cast<int>(i) == best) {
      s.label = SampleLabel::uav;
      s.target_center = gt_pos;
      out.push_back(std::move(s));
    } else if (d > r_neg) {
      s.label = SampleLabel::background;
      out.push_back(std::move(s));
    }
    // (r_pos, r_neg] or a non-nearest cluster inside r_pos: ignore band
  }
  return out;
}

}  // namespace aerotrack
