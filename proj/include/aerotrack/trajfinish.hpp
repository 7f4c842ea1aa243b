#pragma once

#include <array>
#include <string>
#include <vector>

#include "aerotrack/bspline.hpp"
#include "aerotrack/types.hpp"

namespace aerotrack {

// Trajectory completion (per-axis AR(3) over a uniform resampling of the
// tracker fragments) and B-spline smoothing.

struct UniformSeries {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Vec3> values;
  std::vector<bool> gap;  // true when no observation lies within dt of the grid point

  double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
};

// Linear interpolation of a time-sorted history onto a uniform grid.
UniformSeries resample_uniform(const std::vector<StampedVec3>& history, double dt);

// x_t ~ a1*x_{t-1} + a2*x_{t-2} + a3*x_{t-3} + c per axis, fitted by ridge
// least squares on a standardized copy of the series (coefficients are
// folded back to raw units). Annihilates polynomials of degree <= 2.
struct ArModel {
  std::array<std::array<double, 4>, 3> coef{};  // per axis: a1, a2, a3, c
  double dt = 0.0;

  // m1 is the most recent value.
  Vec3 predict(const Vec3& m1, const Vec3& m2, const Vec3& m3) const;
};

constexpr int kArMinSamples = 8;

ArModel ar_fit(const std::vector<Vec3>& series, double dt, double ridge = 1e-9);

// Fragment stitching: interior gaps are filled by cross-fading a forward
// AR prediction from the preceding fragment with a backward AR prediction
// from the following one; head/tail are extended by AR alone, capped at
// max_extrap seconds and clipped to [t_lo, t_hi]. Original samples pass
// through untouched (flag tracked); generated ones are flagged completed.
Trajectory complete(const std::vector<std::vector<StampedVec3>>& track_histories, double dt,
                    double t_lo, double t_hi, double max_extrap,
                    std::vector<std::string>* warnings = nullptr);

struct SplineFit {
  BSpline1D x, y, z;

  Vec3 eval(double t) const { return {x.eval(t), y.eval(t), z.eval(t)}; }
  double t_min() const { return x.t_min(); }
  double t_max() const { return x.t_max(); }
};

// Per-axis least-squares cubic B-spline with clamped uniform knots every
// knot_spacing seconds plus a second-difference penalty on the control
// points (measured against Greville abscissae, so straight lines are never
// penalized).
SplineFit smooth_bspline(const Trajectory& traj, double knot_spacing, double smooth_weight);

// De Boor evaluation at the requested stamps. Stamps beyond the knot range
// continue the endpoint tangent linearly and are flagged interpolated;
// in-range stamps inherit the flag of the nearest source sample.
Trajectory eval_at(const SplineFit& spline, const std::vector<Timestamp>& stamps,
                   const Trajectory& source);

}  // namespace aerotrack
