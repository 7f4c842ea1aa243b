#pragma once

#include <cstddef>
#include <vector>

namespace aerotrack {

// B-spline basis machinery shared by the scenario generator (interpolating
// spline through waypoints) and trajectory smoothing (least-squares fit).

// Clamped knot vector of the given degree over [t0, t1] with interior knots
// every `spacing` seconds. Control point count is knots.size() - degree - 1.
std::vector<double> clamped_uniform_knots(double t0, double t1, double spacing, int degree = 3);

// Clamped knot vector whose interior knots are the interior sample times
// (used for interpolation through waypoints).
std::vector<double> clamped_knots_at(const std::vector<double>& times, int degree = 3);

// Index s with knots[s] <= t < knots[s+1], clamped to the valid span range.
std::size_t find_span(const std::vector<double>& knots, int degree, double t);

// Nonzero basis functions N_{s-degree..s, degree}(t) and their derivatives up
// to max_der. Result[d][j] is the d-th derivative of N_{s-degree+j}.
std::vector<std::vector<double>> basis_funs_ders(const std::vector<double>& knots, int degree,
                                                 std::size_t span, double t, int max_der);

// One scalar-valued spline: value/derivative evaluation with clamped input.
struct BSpline1D {
  int degree = 3;
  std::vector<double> knots;
  std::vector<double> ctrl;

  double t_min() const { return knots[static_cast<std::size_t>(degree)]; }
  double t_max() const { return knots[knots.size() - 1 - static_cast<std::size_t>(degree)]; }

  // d-th derivative at t (t clamped into [t_min, t_max]).
  double eval(double t, int der = 0) const;
};

// Interpolating cubic B-spline through (times, values) with natural end
// conditions (zero second derivative at both ends). times strictly increasing.
BSpline1D interpolate_cubic(const std::vector<double>& times, const std::vector<double>& values);

}  // namespace aerotrack
