#include "aerotrack/mot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aerotrack/errors.hpp"

namespace aerotrack {

namespace {
constexpr double kForbidden = 1e9;  // gated-out / padding cost

Mat symmetrized(const Mat& p) {
  Mat s = p;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) s(i, j) = 0.5 * (p(i, j) + p(j, i));
  return s;
}
}  // namespace

KfState kf_predict_linear(const KfState& s, const Mat& f, const Mat& q, Timestamp t_next) {
  KfState out;
  out.x = f * s.x;
  out.p = symmetrized(f * s.p * f.transpose() + q);
  out.t = t_next;
  return out;
}

KfState kf_update_linear(const KfState& s, const Mat& h, const Mat& r, const Mat& z) {
  const Mat y = z - h * s.x;                       // innovation
  const Mat sc = h * s.p * h.transpose() + r;      // innovation covariance
  const Mat k = cholesky_solve(sc, h * s.p).transpose();  // gain = P H^T S^-1
  KfState out;
  out.x = s.x + k * y;
  const Mat ikh = Mat::identity(s.x.rows()) - k * h;
  // Joseph form keeps the covariance PSD under roundoff
  out.p = symmetrized(ikh * s.p * ikh.transpose() + k * r * k.transpose());
  out.t = s.t;
  return out;
}

KfState cv_init(const Vec3& z, Timestamp t, double pos_var, double vel_var) {
  KfState s;
  s.x = Mat(6, 1);
  s.x(0, 0) = z.x;
  s.x(1, 0) = z.y;
  s.x(2, 0) = z.z;
  s.p = Mat(6, 6);
  for (int a = 0; a < 3; ++a) {
    s.p(static_cast<std::size_t>(a), static_cast<std::size_t>(a)) = pos_var;
    s.p(static_cast<std::size_t>(a + 3), static_cast<std::size_t>(a + 3)) = vel_var;
  }
  s.t = t;
  return s;
}

KfState cv_predict(const KfState& s, Timestamp t_next, double q) {
  if (t_next < s.t) throw NumericError("cv_predict: t_next precedes state time");
  const double dt = t_next - s.t;
  Mat f = Mat::identity(6);
  for (int a = 0; a < 3; ++a) f(static_cast<std::size_t>(a), static_cast<std::size_t>(a + 3)) = dt;
  // white-noise-acceleration Q per axis: [[dt^4/4, dt^3/2], [dt^3/2, dt^2]] * q
  Mat qm(6, 6);
  const double dt2 = dt * dt;
  for (int a = 0; a < 3; ++a) {
    const auto i = static_cast<std::size_t>(a);
    const auto j = static_cast<std::size_t>(a + 3);
    qm(i, i) = 0.25 * dt2 * dt2 * q;
    qm(i, j) = qm(j, i) = 0.5 * dt2 * dt * q;
    qm(j, j) = dt2 * q;
  }
  return kf_predict_linear(s, f, qm, t_next);
}

namespace {
Mat cv_measurement_matrix() {
  Mat h(3, 6);
  h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
  return h;
}
}  // namespace

KfState cv_update(const KfState& s, const Vec3& z, double r) {
  if (!z.finite()) throw NumericError("cv_update: non-finite measurement");
  Mat zm(3, 1);
  zm(0, 0) = z.x;
  zm(1, 0) = z.y;
  zm(2, 0) = z.z;
  return kf_update_linear(s, cv_measurement_matrix(), Mat::identity(3).scaled(r), zm);
}

double cv_position_cov_trace(const KfState& s) { return s.p(0, 0) + s.p(1, 1) + s.p(2, 2); }

double cv_mahalanobis2(const KfState& s, const Vec3& z, double r) {
  const Mat h = cv_measurement_matrix();
  const Mat sc = h * s.p * h.transpose() + Mat::identity(3).scaled(r);
  Mat y(3, 1);
  y(0, 0) = z.x - s.x(0, 0);
  y(1, 0) = z.y - s.x(1, 0);
  y(2, 0) = z.z - s.x(2, 0);
  const Mat solved = cholesky_solve(sc, y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) d2 += y(i, 0) * solved(i, 0);
  return d2;
}

std::vector<int> solve_assignment(const Mat& cost) {
  // Hungarian algorithm with potentials on a square padded matrix.
  const std::size_t n_rows = cost.rows();
  const std::size_t n_cols = cost.cols();
  if (n_rows == 0 || n_cols == 0) return std::vector<int>(n_rows, -1);
  const std::size_t n = std::max(n_rows, n_cols);
  auto at = [&](std::size_t r, std::size_t c) {
    return (r < n_rows && c < n_cols) ? cost(r, c) : kForbidden;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0);  // column -> row (1-based, 0 = free)
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n_rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = match[j];
    if (i >= 1 && i <= n_rows && j <= n_cols) row_to_col[i - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

Association associate(const std::vector<Track>& tracks, const std::vector<Detection>& detections,
                      double gate, double r) {
  Association out;
  if (tracks.empty() || detections.empty()) {
    for (std::size_t i = 0; i < tracks.size(); ++i) out.unmatched_tracks.push_back(i);
    for (std::size_t j = 0; j < detections.size(); ++j) out.unmatched_detections.push_back(j);
    return out;
  }

  Mat cost(tracks.size(), detections.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double d2 = cv_mahalanobis2(tracks[i].state, detections[j].center, r);
      cost(i, j) = d2 <= gate ? d2 : kForbidden;
    }
  }
  const auto row_to_col = solve_assignment(cost);
  std::vector<bool> det_used(detections.size(), false);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const int j = row_to_col[i];
    if (j >= 0 && cost(i, static_cast<std::size_t>(j)) < kForbidden * 0.5) {
      out.matches.emplace_back(i, static_cast<std::size_t>(j));
      det_used[static_cast<std::size_t>(j)] = true;
    } else {
      out.unmatched_tracks.push_back(i);
    }
  }
  for (std::size_t j = 0; j < detections.size(); ++j)
    if (!det_used[j]) out.unmatched_detections.push_back(j);
  return out;
}

void Tracker::step(const std::vector<Detection>& detections, Timestamp t) {
  if (stepped_ && t <= last_t_)
    throw NumericError("tracker step: timestamp must be strictly increasing");
  last_t_ = t;
  stepped_ = true;

  for (auto& track : live_) track.state = cv_predict(track.state, t, cfg_.q);

  const Association assoc = associate(live_, detections, cfg_.gate, cfg_.r);
  for (const auto& [ti, di] : assoc.matches) {
    auto& track = live_[ti];
    track.state = cv_update(track.state, detections[di].center, cfg_.r);
    track.hits += 1;
    track.misses = 0;
    if (track.status == TrackStatus::tentative && track.hits >= cfg_.n_confirm)
      track.status = TrackStatus::confirmed;
    if (track.status == TrackStatus::confirmed) {
      const Vec3 pos{track.state.x(0, 0), track.state.x(1, 0), track.state.x(2, 0)};
      track.history.emplace_back(t, pos);
    }
  }
  for (const std::size_t ti : assoc.unmatched_tracks) live_[ti].misses += 1;

  // covariance-based termination
  std::vector<Track> still_live;
  for (auto& track : live_) {
    if (cv_position_cov_trace(track.state) > cfg_.cov_kill) {
      track.status = TrackStatus::dead;
      if (track.hits >= cfg_.n_confirm) archive_.push_back(std::move(track));
    } else {
      still_live.push_back(std::move(track));
    }
  }
  live_ = std::move(still_live);

  // initiation from unassociated measurements
  for (const std::size_t di : assoc.unmatched_detections) {
    Track track;
    track.id = next_id_++;
    track.status = cfg_.n_confirm <= 1 ? TrackStatus::confirmed : TrackStatus::tentative;
    track.state = cv_init(detections[di].center, t, cfg_.r * cfg_.init_pos_var_factor, cfg_.init_vel_var);
    track.hits = 1;
    if (track.status == TrackStatus::confirmed)
      track.history.emplace_back(t, detections[di].center);
    live_.push_back(std::move(track));
  }
}

std::vector<Track> Tracker::confirmed_tracks() const {
  std::vector<Track> out;
  for (const auto& track : archive_) out.push_back(track);
  for (const auto& track : live_)
    if (track.status == TrackStatus::confirmed) out.push_back(track);
  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

std::vector<Track> run_tracker(const std::vector<Detection>& detections, const TrackerConfig& cfg) {
  for (std::size_t i = 1; i < detections.size(); ++i)
    if (detections[i].t < detections[i - 1].t)
      throw NumericError("run_tracker: detections must be time-sorted");

  Tracker tracker(cfg);
  std::size_t i = 0;
  while (i < detections.size()) {
    std::size_t j = i;
    while (j < detections.size() && detections[j].t == detections[i].t) ++j;
    tracker.step(std::vector<Detection>(detections.begin() + static_cast<long>(i),
                                        detections.begin() + static_cast<long>(j)),
                 detections[i].t);
    i = j;
  }
  return tracker.confirmed_tracks();
}

}  // namespace aerotrack
