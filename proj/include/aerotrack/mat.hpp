#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace aerotrack {

// Small dense row-major matrix of doubles. Sized for the systems this
// pipeline solves (Kalman covariances, AR design matrices, spline normal
// equations); nothing here is tuned for large problems.
class Mat {
public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  static Mat identity(std::size_t n);
  static Mat col_vec(const std::vector<double>& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Mat transpose() const;
  Mat operator*(const Mat& o) const;
  Mat operator+(const Mat& o) const;
  Mat operator-(const Mat& o) const;
  Mat scaled(double s) const;

  double max_abs() const;
  bool all_finite() const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Solves spd * x = rhs via Cholesky. Throws NumericError naming the pivot
// index when a non-positive pivot is hit.
Mat cholesky_solve(const Mat& spd, const Mat& rhs);

// argmin_beta ||design*beta - targets||^2 + ridge*||beta||^2 through the
// normal equations. With ridge == 0 a singular normal matrix raises a
// rank-deficiency error naming the offending column.
Mat solve_least_squares(const Mat& design, const Mat& targets, double ridge);

}  // namespace aerotrack
