#include <cmath>
#include <set>

#include "aerotrack/errors.hpp"
#include "aerotrack/bspline.hpp"
#include "aerotrack/mat.hpp"
#include "aerotrack/metrics.hpp"
#include "aerotrack/rng.hpp"
#include "doctest.h"

using namespace aerotrack;

TEST_CASE("least squares: mean of targets under constant design") {
  const Mat design(2, 1, {1, 1});
  const Mat targets(2, 1, {2, 4});
  const Mat beta = solve_least_squares(design, targets, 0.0);
  CHECK(beta(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("least squares: identity design returns targets") {
  const Mat design = Mat::identity(2);
  const Mat targets(2, 1, {-1.5, 7.25});
  const Mat beta = solve_least_squares(design, targets, 0.0);
  CHECK(beta(0, 0) == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(beta(1, 0) == doctest::Approx(7.25).epsilon(1e-12));
}

TEST_CASE("least squares: line fit via normal equations oracle") {
  // design [[1,1],[1,2],[1,3]], targets [1,2,3] -> beta [0,1] (by hand:
  // A^T A = [[3,6],[6,14]], A^T y = [6,14])
  const Mat design(3, 2, {1, 1, 1, 2, 1, 3});
  const Mat targets(3, 1, {1, 2, 3});
  const Mat beta = solve_least_squares(design, targets, 0.0);
  CHECK(beta(0, 0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(beta(1, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("least squares: residual orthogonal to design columns") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 6 + trial % 5;
    const std::size_t cols = 2 + trial % 3;
    Mat design(rows, cols);
    Mat targets(rows, 1);
    for (auto& v : design.data()) v = rng.normal();
    for (auto& v : targets.data()) v = rng.normal();
    const Mat beta = solve_least_squares(design, targets, 0.0);
    const Mat residual = targets - design * beta;
    for (std::size_t c = 0; c < cols; ++c) {
      double dot = 0.0, col_norm = 0.0, res_norm = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        dot += design(r, c) * residual(r, 0);
        col_norm += design(r, c) * design(r, c);
        res_norm += residual(r, 0) * residual(r, 0);
      }
      CHECK(std::fabs(dot) < 1e-8 * std::sqrt(col_norm * res_norm) + 1e-12);
    }
  }
}

TEST_CASE("least squares: rank-deficient design names a column") {
  const Mat design(3, 2, {1, 2, 2, 4, 3, 6});  // second column = 2 * first
  const Mat targets(3, 1, {1, 2, 3});
  CHECK_THROWS_WITH_AS(solve_least_squares(design, targets, 0.0),
                       doctest::Contains("column"), NumericError);
  // ridge removes the failure
  CHECK_NOTHROW(solve_least_squares(design, targets, 1e-9));
}

TEST_CASE("cholesky: identity and scaling") {
  const Mat rhs(3, 1, {4, -2, 9});
  const Mat x = cholesky_solve(Mat::identity(3), rhs);
  CHECK(x(0, 0) == 4.0);
  CHECK(x(2, 0) == 9.0);

  const Mat x2 = cholesky_solve(Mat::identity(2).scaled(2.0), Mat(2, 1, {4, 6}));
  CHECK(x2(0, 0) == doctest::Approx(2.0));
  CHECK(x2(1, 0) == doctest::Approx(3.0));
}

TEST_CASE("cholesky: verified by multiplying back") {
  const Mat spd(2, 2, {4, 2, 2, 3});
  const Mat rhs(2, 1, {2, 5});
  const Mat x = cholesky_solve(spd, rhs);
  CHECK(x(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(x(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cholesky: random SPD round trip up to 12x12") {
  Rng rng(7);
  for (std::size_t n = 1; n <= 12; ++n) {
    Mat a(n, n);
    for (auto& v : a.data()) v = rng.normal();
    Mat spd = a * a.transpose();
    for (std::size_t i = 0; i < n; ++i) spd(i, i) += 0.5;  // safely positive definite
    Mat rhs(n, 2);
    for (auto& v : rhs.data()) v = rng.normal();
    const Mat x = cholesky_solve(spd, rhs);
    const Mat back = spd * x;
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < rhs.data().size(); ++i) {
      err = std::max(err, std::fabs(back.data()[i] - rhs.data()[i]));
      norm = std::max(norm, std::fabs(rhs.data()[i]));
    }
    CHECK(err <= 1e-10 * std::max(norm, 1.0));
  }
}

TEST_CASE("cholesky: non-SPD reports the pivot index") {
  const Mat bad(2, 2, {1, 2, 2, 1});  // indefinite
  CHECK_THROWS_WITH_AS(cholesky_solve(bad, Mat(2, 1, {1, 1})), doctest::Contains("index 1"),
                       NumericError);
}

TEST_CASE("mse_3d basics") {
  std::vector<StampedVec3> truth{{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}};
  SUBCASE("exact match is zero") { CHECK(mse_3d(truth, truth) == 0.0); }
  SUBCASE("constant offset") {
    std::vector<StampedVec3> pred{{0.0, {1, 0, 0}}, {1.0, {2, 0, 0}}};
    CHECK(mse_3d(pred, truth) == doctest::Approx(1.0));
  }
  SUBCASE("offset on half the stamps") {
    // (1,1,0) off on one stamp, exact on the other: mean of {2, 0} = 1
    std::vector<StampedVec3> pred{{0.0, {1, 1, 0}}, {1.0, {1, 0, 0}}};
    CHECK(mse_3d(pred, truth) == doctest::Approx(1.0));
  }
  SUBCASE("missing stamp is an error naming it") {
    std::vector<StampedVec3> pred{{0.0, {0, 0, 0}}};
    CHECK_THROWS_WITH_AS(mse_3d(pred, truth), doctest::Contains("1.0"), NumericError);
  }
  SUBCASE("invariant under rigid translation of both") {
    Rng rng(3);
    std::vector<StampedVec3> pred;
    std::vector<StampedVec3> gt;
    for (int i = 0; i < 10; ++i) {
      const Vec3 p{rng.normal(), rng.normal(), rng.normal()};
      const Vec3 q{rng.normal(), rng.normal(), rng.normal()};
      pred.emplace_back(i, p);
      gt.emplace_back(i, q);
    }
    const double base = mse_3d(pred, gt);
    const Vec3 shift{13.5, -2.25, 8.0};
    for (auto& [t, p] : pred) p += shift;
    for (auto& [t, p] : gt) p += shift;
    CHECK(mse_3d(pred, gt) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("rng: determinism and seed separation") {
  SUBCASE("equal seeds, equal draws") {
    Rng a(123456789), b(123456789);
    for (int i = 0; i < 10000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  }
  SUBCASE("different seeds diverge within 16 draws") {
    Rng seeds(99);
    for (int pair = 0; pair < 100; ++pair) {
      const std::uint64_t s1 = seeds.next_u64();
      const std::uint64_t s2 = s1 + 1 + seeds.next_below(1000);
      Rng a(s1), b(s2);
      bool diverged = false;
      for (int i = 0; i < 16 && !diverged; ++i) diverged = a.next_u64() != b.next_u64();
      CHECK(diverged);
    }
  }
  SUBCASE("uniform stays in range") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double u = rng.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }
  SUBCASE("poisson mean roughly lambda") {
    Rng rng(17);
    double sum = 0.0;
    for (int i = 0; i < 4000; ++i) sum += rng.poisson(2.0);
    CHECK(sum / 4000.0 == doctest::Approx(2.0).epsilon(0.1));
  }
  SUBCASE("derive_seed separates labels") {
    CHECK(Rng::derive_seed(42, "a") != Rng::derive_seed(42, "b"));
    CHECK(Rng::derive_seed(42, std::uint64_t{0}) != Rng::derive_seed(42, std::uint64_t{1}));
  }
}

TEST_CASE("bspline: interpolation hits the waypoints with natural ends") {
  const std::vector<double> ts{0, 1, 2.5, 4, 6};
  const std::vector<double> vs{1.0, -2.0, 0.5, 3.0, 2.0};
  const BSpline1D s = interpolate_cubic(ts, vs);
  for (std::size_t i = 0; i < ts.size(); ++i)
    CHECK(s.eval(ts[i]) == doctest::Approx(vs[i]).epsilon(1e-9));
  CHECK(s.eval(ts.front(), 2) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(s.eval(ts.back(), 2) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("bspline: two-point interpolation is the straight line") {
  const BSpline1D s = interpolate_cubic({0, 10}, {5, 25});
  for (double t = 0; t <= 10; t += 1.25) CHECK(s.eval(t) == doctest::Approx(5 + 2 * t).epsilon(1e-9));
  CHECK(s.eval(3.0, 1) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("bspline: constant waypoints reproduce the constant") {
  const BSpline1D s = interpolate_cubic({0, 5, 10, 20}, {7, 7, 7, 7});
  for (double t = 0; t <= 20; t += 0.5) CHECK(s.eval(t) == doctest::Approx(7.0).epsilon(1e-12));
}
