#include "aerotrack/trajfinish.hpp"

#include <algorithm>
#include <cmath>

#include "aerotrack/errors.hpp"
#include "aerotrack/mat.hpp"

namespace aerotrack {

UniformSeries resample_uniform(const std::vector<StampedVec3>& history, double dt) {
  if (dt <= 0.0) throw NumericError("resample_uniform: dt must be positive");
  if (history.size() < 2) throw NumericError("resample_uniform: history shorter than 2 points");
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].first <= history[i - 1].first)
      throw NumericError("resample_uniform: history must be strictly time-sorted");

  UniformSeries s;
  s.t0 = history.front().first;
  s.dt = dt;
  const double t_last = history.back().first;
  const auto n = static_cast<std::size_t>(std::floor((t_last - s.t0) / dt + 1e-9)) + 1;

  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = s.time_at(i);
    while (cursor + 1 < history.size() && history[cursor + 1].first < t) ++cursor;
    // history[cursor] <= t < history[cursor+1] (approximately)
    const auto& [ta, pa] = history[cursor];
    const auto& [tb, pb] = history[std::min(cursor + 1, history.size() - 1)];
    Vec3 v;
    if (tb == ta) {
      v = pa;
    } else {
      const double w = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
      v = pa + (pb - pa) * w;
    }
    s.values.push_back(v);
    const double nearest = std::min(std::fabs(t - ta), std::fabs(tb - t));
    s.gap.push_back(nearest > dt);
  }
  return s;
}

Vec3 ArModel::predict(const Vec3& m1, const Vec3& m2, const Vec3& m3) const {
  Vec3 out;
  const double in[3][3] = {{m1.x, m2.x, m3.x}, {m1.y, m2.y, m3.y}, {m1.z, m2.z, m3.z}};
  double* res[3] = {&out.x, &out.y, &out.z};
  for (int a = 0; a < 3; ++a) {
    const auto& c = coef[static_cast<std::size_t>(a)];
    *res[a] = c[0] * in[a][0] + c[1] * in[a][1] + c[2] * in[a][2] + c[3];
  }
  return out;
}

ArModel ar_fit(const std::vector<Vec3>& series, double dt, double ridge) {
  if (static_cast<int>(series.size()) < kArMinSamples)
    throw NumericError("ar_fit: insufficient samples (need >= " + std::to_string(kArMinSamples) +
                       ", got " + std::to_string(series.size()) + ")");
  ArModel model;
  model.dt = dt;
  const std::size_t n = series.size();
  for (int axis = 0; axis < 3; ++axis) {
    auto value = [&](std::size_t i) {
      return axis == 0 ? series[i].x : (axis == 1 ? series[i].y : series[i].z);
    };
    // standardize so the ridge acts on an O(1)-scaled problem
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += value(i);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = value(i) - mean;
      var += d * d;
    }
    double sigma = std::sqrt(var / static_cast<double>(n));
    if (sigma < 1e-12) sigma = 1.0;

    const std::size_t rows = n - 3;
    Mat design(rows, 4);
    Mat target(rows, 1);
    for (std::size_t t = 3; t < n; ++t) {
      const std::size_t r = t - 3;
      design(r, 0) = (value(t - 1) - mean) / sigma;
      design(r, 1) = (value(t - 2) - mean) / sigma;
      design(r, 2) = (value(t - 3) - mean) / sigma;
      design(r, 3) = 1.0;
      target(r, 0) = (value(t) - mean) / sigma;
    }
    const Mat beta = solve_least_squares(design, target, ridge);
    auto& c = model.coef[static_cast<std::size_t>(axis)];
    c[0] = beta(0, 0);
    c[1] = beta(1, 0);
    c[2] = beta(2, 0);
    // fold the standardization back into the intercept
    c[3] = mean * (1.0 - beta(0, 0) - beta(1, 0) - beta(2, 0)) + sigma * beta(3, 0);
  }
  return model;
}

namespace {

struct Run {
  std::size_t begin = 0;  // inclusive grid index
  std::size_t end = 0;    // inclusive
  std::size_t size() const { return end - begin + 1; }
};

std::vector<Run> non_gap_runs(const UniformSeries& s) {
  std::vector<Run> runs;
  std::size_t i = 0;
  while (i < s.values.size()) {
    if (s.gap[i]) {
      ++i;
      continue;
    }
    Run r{i, i};
    while (r.end + 1 < s.values.size() && !s.gap[r.end + 1]) ++r.end;
    runs.push_back(r);
    i = r.end + 1;
  }
  return runs;
}

std::vector<Vec3> run_values(const UniformSeries& s, const Run& r) {
  return {s.values.begin() + static_cast<long>(r.begin), s.values.begin() + static_cast<long>(r.end) + 1};
}

// Recursive AR rollout; seeds are the last three values before the gap,
// most recent first.
std::vector<Vec3> ar_rollout(const ArModel& model, Vec3 m1, Vec3 m2, Vec3 m3, std::size_t steps) {
  std::vector<Vec3> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec3 next = model.predict(m1, m2, m3);
    out.push_back(next);
    m3 = m2;
    m2 = m1;
    m1 = next;
  }
  return out;
}

}  // namespace

Trajectory complete(const std::vector<std::vector<StampedVec3>>& track_histories, double dt,
                    double t_lo, double t_hi, double max_extrap,
                    std::vector<std::string>* warnings) {
  Trajectory traj;
  // fragments ordered by span length; later (shorter) fragments contribute
  // only samples outside the time ranges already claimed
  std::vector<std::size_t> order(track_histories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return track_histories[a].size() > track_histories[b].size();
  });
  std::vector<std::pair<double, double>> claimed;
  std::vector<StampedVec3> merged;
  for (const std::size_t idx : order) {
    const auto& hist = track_histories[idx];
    if (hist.empty()) continue;
    for (const auto& sample : hist) {
      bool inside = false;
      for (const auto& [a, b] : claimed)
        if (sample.first >= a && sample.first <= b) {
          inside = true;
          break;
        }
      if (!inside) merged.push_back(sample);
    }
    claimed.emplace_back(hist.front().first, hist.back().first);
  }
  if (merged.empty()) {
    if (warnings) warnings->push_back("no confirmed tracks; trajectory left empty");
    return traj;
  }
  std::sort(merged.begin(), merged.end(),
            [](const StampedVec3& a, const StampedVec3& b) { return a.first < b.first; });
  // collapse duplicate stamps (overlap boundaries)
  std::vector<StampedVec3> dedup;
  for (const auto& s : merged) {
    if (!dedup.empty() && s.first - dedup.back().first < 1e-9) continue;
    dedup.push_back(s);
  }
  merged = std::move(dedup);

  for (const auto& [t, p] : merged) traj.samples.push_back({t, p, TrajFlag::tracked});
  if (merged.size() < 2) return traj;

  const UniformSeries grid = resample_uniform(merged, dt);
  const auto runs = non_gap_runs(grid);
  std::vector<TrajSample> generated;

  // interior gaps: cross-fade forward and backward AR predictions
  for (std::size_t ri = 0; ri + 1 < runs.size(); ++ri) {
    const Run& left = runs[ri];
    const Run& right = runs[ri + 1];
    const std::size_t gs = left.end + 1;
    const std::size_t ge = right.begin - 1;
    if (gs > ge) continue;
    const std::size_t len = ge - gs + 1;

    std::vector<Vec3> fwd, bwd;
    if (left.size() >= static_cast<std::size_t>(kArMinSamples)) {
      const ArModel m = ar_fit(run_values(grid, left), dt);
      fwd = ar_rollout(m, grid.values[left.end], grid.values[left.end - 1],
                       grid.values[left.end - 2], len);
    }
    if (right.size() >= static_cast<std::size_t>(kArMinSamples)) {
      auto rv = run_values(grid, right);
      std::reverse(rv.begin(), rv.end());
      const ArModel m = ar_fit(rv, dt);
      bwd = ar_rollout(m, grid.values[right.begin], grid.values[right.begin + 1],
                       grid.values[right.begin + 2], len);  // bwd[k] sits at index ge - k
    }
    for (std::size_t i = 0; i < len; ++i) {
      const double t = grid.time_at(gs + i);
      Vec3 v;
      if (!fwd.empty() && !bwd.empty()) {
        const double w = static_cast<double>(i + 1) / static_cast<double>(len + 1);
        v = fwd[i] * (1.0 - w) + bwd[len - 1 - i] * w;
      } else if (!fwd.empty()) {
        v = fwd[i];
      } else if (!bwd.empty()) {
        v = bwd[len - 1 - i];
      } else {
        // both fragments too short for AR: linear bridge
        const Vec3 a = grid.values[left.end];
        const Vec3 b = grid.values[right.begin];
        const double w = static_cast<double>(i + 1) / static_cast<double>(len + 1);
        v = a + (b - a) * w;
      }
      generated.push_back({t, v, TrajFlag::completed});
    }
  }

  // head/tail extensions, capped at max_extrap and clipped to [t_lo, t_hi]
  if (!runs.empty() && max_extrap > 0.0) {
    const Run& first = runs.front();
    if (first.size() >= static_cast<std::size_t>(kArMinSamples)) {
      const double t_first = grid.time_at(first.begin);
      const double reach = std::min(max_extrap, t_first - t_lo);
      const auto steps = reach > 0 ? static_cast<std::size_t>(std::floor(reach / dt + 1e-9)) : 0;
      if (steps > 0) {
        auto rv = run_values(grid, first);
        std::reverse(rv.begin(), rv.end());
        const ArModel m = ar_fit(rv, dt);
        const auto pred = ar_rollout(m, grid.values[first.begin], grid.values[first.begin + 1],
                                     grid.values[first.begin + 2], steps);
        for (std::size_t k = 0; k < steps; ++k)
          generated.push_back({t_first - dt * static_cast<double>(k + 1), pred[k], TrajFlag::completed});
      }
    }
    const Run& last = runs.back();
    if (last.size() >= static_cast<std::size_t>(kArMinSamples)) {
      const double t_last = grid.time_at(last.end);
      const double reach = std::min(max_extrap, t_hi - t_last);
      const auto steps = reach > 0 ? static_cast<std::size_t>(std::floor(reach / dt + 1e-9)) : 0;
      if (steps > 0) {
        const ArModel m = ar_fit(run_values(grid, last), dt);
        const auto pred = ar_rollout(m, grid.values[last.end], grid.values[last.end - 1],
                                     grid.values[last.end - 2], steps);
        for (std::size_t k = 0; k < steps; ++k)
          generated.push_back({t_last + dt * static_cast<double>(k + 1), pred[k], TrajFlag::completed});
      }
    }
  }

  for (const auto& g : generated) traj.samples.push_back(g);
  std::sort(traj.samples.begin(), traj.samples.end(),
            [](const TrajSample& a, const TrajSample& b) { return a.t < b.t; });
  // keep strictly increasing stamps; tracked samples win collisions
  std::vector<TrajSample> clean;
  for (const auto& s : traj.samples) {
    if (!clean.empty() && s.t - clean.back().t < 1e-9) {
      if (clean.back().flag != TrajFlag::tracked && s.flag == TrajFlag::tracked) clean.back() = s;
      continue;
    }
    clean.push_back(s);
  }
  traj.samples = std::move(clean);
  return traj;
}

SplineFit smooth_bspline(const Trajectory& traj, double knot_spacing, double smooth_weight) {
  if (traj.samples.size() < 5) throw NumericError("smooth_bspline: need at least 5 samples");
  if (knot_spacing <= 0.0) throw NumericError("smooth_bspline: knot_spacing must be positive");
  if (smooth_weight < 0.0) throw NumericError("smooth_bspline: negative smooth_weight");
  const double t0 = traj.samples.front().t;
  const double t1 = traj.samples.back().t;
  if (!(t1 > t0)) throw NumericError("smooth_bspline: degenerate time span");

  const auto knots = clamped_uniform_knots(t0, t1, knot_spacing);
  const std::size_t n_ctrl = knots.size() - 4;
  const std::size_t n = traj.samples.size();

  Mat design(n, n_ctrl);
  Mat rhs(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = traj.samples[i].t;
    const std::size_t span = find_span(knots, 3, t);
    const auto b = basis_funs_ders(knots, 3, span, t, 0);
    for (int j = 0; j <= 3; ++j)
      design(i, span - 3 + static_cast<std::size_t>(j)) = b[0][static_cast<std::size_t>(j)];
    rhs(i, 0) = traj.samples[i].p.x;
    rhs(i, 1) = traj.samples[i].p.y;
    rhs(i, 2) = traj.samples[i].p.z;
  }

  Mat normal = design.transpose() * design;
  if (smooth_weight > 0.0 && n_ctrl >= 3) {
    // Greville abscissae; penalizing divided second differences leaves
    // straight lines unpenalized even at the clamped ends
    std::vector<double> greville(n_ctrl);
    for (std::size_t i = 0; i < n_ctrl; ++i)
      greville[i] = (knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0;
    Mat penalty(n_ctrl - 2, n_ctrl);
    for (std::size_t i = 0; i + 2 < n_ctrl; ++i) {
      const double h1 = greville[i + 1] - greville[i];
      const double h2 = greville[i + 2] - greville[i + 1];
      penalty(i, i) = 1.0 / h1;
      penalty(i, i + 1) = -(1.0 / h1 + 1.0 / h2);
      penalty(i, i + 2) = 1.0 / h2;
    }
    normal = normal + (penalty.transpose() * penalty).scaled(smooth_weight);
  }
  const Mat sol = cholesky_solve(normal, design.transpose() * rhs);

  SplineFit fit;
  BSpline1D* axes[3] = {&fit.x, &fit.y, &fit.z};
  for (int a = 0; a < 3; ++a) {
    axes[a]->degree = 3;
    axes[a]->knots = knots;
    axes[a]->ctrl.resize(n_ctrl);
    for (std::size_t i = 0; i < n_ctrl; ++i)
      axes[a]->ctrl[i] = sol(i, static_cast<std::size_t>(a));
  }
  return fit;
}

Trajectory eval_at(const SplineFit& spline, const std::vector<Timestamp>& stamps,
                   const Trajectory& source) {
  for (std::size_t i = 1; i < stamps.size(); ++i)
    if (stamps[i] <= stamps[i - 1]) throw NumericError("eval_at: stamps must be strictly increasing");

  const double lo = spline.t_min();
  const double hi = spline.t_max();
  const Vec3 v_lo = spline.eval(lo);
  const Vec3 v_hi = spline.eval(hi);
  const Vec3 d_lo{spline.x.eval(lo, 1), spline.y.eval(lo, 1), spline.z.eval(lo, 1)};
  const Vec3 d_hi{spline.x.eval(hi, 1), spline.y.eval(hi, 1), spline.z.eval(hi, 1)};

  Trajectory out;
  std::size_t cursor = 0;
  for (const double t : stamps) {
    TrajSample s;
    s.t = t;
    if (t < lo) {
      s.p = v_lo + d_lo * (t - lo);
      s.flag = TrajFlag::interpolated;
    } else if (t > hi) {
      s.p = v_hi + d_hi * (t - hi);
      s.flag = TrajFlag::interpolated;
    } else {
      s.p = spline.eval(t);
      // inherit the provenance of the nearest source sample
      while (cursor + 1 < source.samples.size() &&
             std::fabs(source.samples[cursor + 1].t - t) <= std::fabs(source.samples[cursor].t - t))
        ++cursor;
      s.flag = source.samples.empty() ? TrajFlag::interpolated : source.samples[cursor].flag;
    }
    out.samples.push_back(s);
  }
  return out;
}

}  // namespace aerotrack
