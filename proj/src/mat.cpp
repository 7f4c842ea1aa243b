#include "aerotrack/mat.hpp"

#include <cmath>
#include <string>

#include "aerotrack/errors.hpp"

namespace aerotrack {

Mat::Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
    : rows_(rows), cols_(cols), data_(values) {
  if (data_.size() != rows * cols) {
    throw NumericError("Mat: initializer size " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::col_vec(const std::vector<double>& v) {
  Mat m(v.size(), 1);
  m.data_ = v;
  return m;
}

Mat Mat::transpose() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Mat Mat::operator*(const Mat& o) const {
  if (cols_ != o.rows_) throw NumericError("Mat multiply: inner dimensions disagree");
  Mat out(rows_, o.cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(r, k);
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < o.cols_; ++c) out(r, c) += a * o(k, c);
    }
  }
  return out;
}

Mat Mat::operator+(const Mat& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw NumericError("Mat add: shape mismatch");
  Mat out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += o.data_[i];
  return out;
}

Mat Mat::operator-(const Mat& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw NumericError("Mat subtract: shape mismatch");
  Mat out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= o.data_[i];
  return out;
}

Mat Mat::scaled(double s) const {
  Mat out = *this;
  for (double& v : out.data_) v *= s;
  return out;
}

double Mat::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

bool Mat::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

// Lower-triangular Cholesky factor; pivot_context names the caller for errors.
Mat cholesky_factor(const Mat& spd, const char* pivot_context) {
  const std::size_t n = spd.rows();
  if (spd.cols() != n) throw NumericError("cholesky: matrix not square");
  Mat L(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0)) {
      throw NumericError(std::string(pivot_context) + ": non-positive pivot " +
                         std::to_string(d) + " at index " + std::to_string(j));
    }
    L(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

Mat cholesky_solve_factored(const Mat& L, const Mat& rhs) {
  const std::size_t n = L.rows();
  Mat x = rhs;
  // forward substitution L y = rhs
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * x(k, c);
      x(i, c) = s / L(i, i);
    }
    // back substitution L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x(k, c);
      x(ii, c) = s / L(ii, ii);
    }
  }
  return x;
}

}  // namespace

Mat cholesky_solve(const Mat& spd, const Mat& rhs) {
  if (spd.rows() != rhs.rows()) throw NumericError("cholesky_solve: rhs row count mismatch");
  const Mat L = cholesky_factor(spd, "cholesky_solve: matrix not SPD");
  return cholesky_solve_factored(L, rhs);
}

Mat solve_least_squares(const Mat& design, const Mat& targets, double ridge) {
  if (design.rows() != targets.rows())
    throw NumericError("solve_least_squares: design and targets row counts disagree");
  if (design.rows() < 1) throw NumericError("solve_least_squares: empty design");
  if (ridge < 0.0) throw NumericError("solve_least_squares: negative ridge");

  const Mat at = design.transpose();
  Mat normal = at * design;
  for (std::size_t i = 0; i < normal.rows(); ++i) normal(i, i) += ridge;
  const Mat rhs = at * targets;

  try {
    const Mat L = cholesky_factor(normal, "solve_least_squares");
    return cholesky_solve_factored(L, rhs);
  } catch (const NumericError& e) {
    if (ridge == 0.0) {
      // Recover the failing pivot index for a rank-deficiency message.
      std::string what = e.what();
      const auto pos = what.rfind("index ");
      const std::string col = pos == std::string::npos ? "?" : what.substr(pos + 6);
      throw NumericError("solve_least_squares: rank-deficient design, column " + col +
                         " (use ridge > 0 for degenerate inputs)");
    }
    throw;
  }
}

}  // namespace aerotrack
