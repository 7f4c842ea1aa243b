#pragma once

#include <array>
#include <string>
#include <vector>

#include "aerotrack/geometry.hpp"
#include "aerotrack/mat.hpp"

namespace aerotrack {

// Monomial basis x^i * y^j * z^k in graded lexicographic order.
struct PolyBasis {
  std::vector<std::array<int, 3>> exponents;

  // All 20 monomials with i+j+k <= 3.
  static PolyBasis full_cubic();
  static PolyBasis from_exponents(const std::vector<std::array<int, 3>>& exps);

  std::size_t dim() const { return exponents.size(); }
};

std::vector<double> poly_features(const Vec3& p, const PolyBasis& basis);

// coefficients: dim x 3, one column per output axis.
struct BiasModel {
  PolyBasis basis;
  Mat coefficients;

  Vec3 apply(const Vec3& pred) const;  // pred + model^T features(pred)
};

struct BiasFitReport {
  std::array<double, 3> residual_rms{};  // per-axis residual after the fit
  double mse_before = 0.0;               // mean ||pred-true||^2
  double mse_after = 0.0;
};

// Least-squares fit of (true - pred) against poly_features(pred); the fit
// input is the predicted center because only predictions exist at inference.
BiasModel fit_bias(const std::vector<Vec3>& pred_centers, const std::vector<Vec3>& true_centers,
                   const PolyBasis& basis, double ridge, BiasFitReport* report = nullptr);

void save_bias_model(const std::string& path, const BiasModel& model);
BiasModel load_bias_model(const std::string& path);

}  // namespace aerotrack
