#include "aerotrack/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "aerotrack/errors.hpp"
#include "aerotrack/mat.hpp"

namespace aerotrack {

std::vector<double> clamped_uniform_knots(double t0, double t1, double spacing, int degree) {
  if (!(t1 > t0)) throw NumericError("clamped_uniform_knots: empty span");
  if (!(spacing > 0.0)) throw NumericError("clamped_uniform_knots: spacing must be positive");
  std::vector<double> knots;
  for (int i = 0; i <= degree; ++i) knots.push_back(t0);
  // interior knots strictly inside (t0, t1)
  const int n_interior = static_cast<int>(std::floor((t1 - t0) / spacing - 1e-12));
  for (int i = 1; i <= n_interior; ++i) {
    const double k = t0 + spacing * i;
    if (k < t1 - 1e-12) knots.push_back(k);
  }
  for (int i = 0; i <= degree; ++i) knots.push_back(t1);
  return knots;
}

std::vector<double> clamped_knots_at(const std::vector<double>& times, int degree) {
  if (times.size() < 2) throw NumericError("clamped_knots_at: need at least two times");
  std::vector<double> knots;
  for (int i = 0; i <= degree; ++i) knots.push_back(times.front());
  for (std::size_t i = 1; i + 1 < times.size(); ++i) knots.push_back(times[i]);
  for (int i = 0; i <= degree; ++i) knots.push_back(times.back());
  return knots;
}

std::size_t find_span(const std::vector<double>& knots, int degree, double t) {
  const std::size_t p = static_cast<std::size_t>(degree);
  const std::size_t lo = p;
  const std::size_t hi = knots.size() - p - 2;  // last valid span start
  if (t >= knots[hi + 1]) return hi;
  if (t <= knots[lo]) return lo;
  auto it = std::upper_bound(knots.begin() + static_cast<long>(lo), knots.begin() + static_cast<long>(hi + 1), t);
  return static_cast<std::size_t>(it - knots.begin()) - 1;
}

// The Cox-de Boor recursion with derivatives (NURBS book A2.3).
std::vector<std::vector<double>> basis_funs_ders(const std::vector<double>& knots, int degree,
                                                 std::size_t span, double t, int max_der) {
  const int p = degree;
  const int n = std::min(max_der, p);
  std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> left(p + 1, 0.0), right(p + 1, 0.0);
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots[span + 1 - j];
    right[j] = knots[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  std::vector<std::vector<double>> ders(max_der + 1, std::vector<double>(p + 1, 0.0));
  for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

  std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double f = p;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= p; ++j) ders[k][j] *= f;
    f *= (p - k);
  }
  return ders;
}

double BSpline1D::eval(double t, int der) const {
  const double tc = std::clamp(t, t_min(), t_max());
  const std::size_t span = find_span(knots, degree, tc);
  const auto ders = basis_funs_ders(knots, degree, span, tc, der);
  double v = 0.0;
  for (int j = 0; j <= degree; ++j) {
    v += ders[der][static_cast<std::size_t>(j)] * ctrl[span - static_cast<std::size_t>(degree) + static_cast<std::size_t>(j)];
  }
  return v;
}

BSpline1D interpolate_cubic(const std::vector<double>& times, const std::vector<double>& values) {
  if (times.size() != values.size()) throw NumericError("interpolate_cubic: size mismatch");
  const std::size_t n = times.size();
  if (n < 2) throw NumericError("interpolate_cubic: need at least two points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(times[i] > times[i - 1])) throw NumericError("interpolate_cubic: times must be strictly increasing");

  BSpline1D s;
  s.degree = 3;
  s.knots = clamped_knots_at(times, 3);
  const std::size_t n_ctrl = s.knots.size() - 4;  // n + 2

  // Collocation rows at every waypoint plus natural end conditions.
  Mat design(n + 2, n_ctrl);
  Mat rhs(n + 2, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t span = find_span(s.knots, 3, times[i]);
    const auto b = basis_funs_ders(s.knots, 3, span, times[i], 0);
    for (int j = 0; j <= 3; ++j) design(i, span - 3 + static_cast<std::size_t>(j)) = b[0][static_cast<std::size_t>(j)];
    rhs(i, 0) = values[i];
  }
  for (int e = 0; e < 2; ++e) {
    const double t = (e == 0) ? times.front() : times.back();
    const std::size_t span = find_span(s.knots, 3, t);
    const auto b = basis_funs_ders(s.knots, 3, span, t, 2);
    for (int j = 0; j <= 3; ++j)
      design(n + static_cast<std::size_t>(e), span - 3 + static_cast<std::size_t>(j)) = b[2][static_cast<std::size_t>(j)];
    rhs(n + static_cast<std::size_t>(e), 0) = 0.0;
  }

  const Mat c = solve_least_squares(design, rhs, 0.0);
  s.ctrl.resize(n_ctrl);
  for (std::size_t i = 0; i < n_ctrl; ++i) s.ctrl[i] = c(i, 0);
  return s;
}

}  // namespace aerotrack
