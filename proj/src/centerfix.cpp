#include "aerotrack/centerfix.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "aerotrack/errors.hpp"
#include "json.hpp"

namespace aerotrack {

using nlohmann::json;

PolyBasis PolyBasis::full_cubic() {
  PolyBasis b;
  for (int total = 0; total <= 3; ++total)
    for (int i = total; i >= 0; --i)
      for (int j = total - i; j >= 0; --j) b.exponents.push_back({i, j, total - i - j});
  return b;
}

PolyBasis PolyBasis::from_exponents(const std::vector<std::array<int, 3>>& exps) {
  std::set<std::array<int, 3>> seen;
  for (const auto& e : exps) {
    if (e[0] < 0 || e[1] < 0 || e[2] < 0 || e[0] + e[1] + e[2] > 3)
      throw ConfigError("PolyBasis: exponents must be non-negative with total degree <= 3");
    if (!seen.insert(e).second) throw ConfigError("PolyBasis: duplicate exponent triple");
  }
  if (!seen.count({0, 0, 0})) throw ConfigError("PolyBasis: constant term (0,0,0) is required");
  PolyBasis b;
  b.exponents = exps;
  return b;
}

std::vector<double> poly_features(const Vec3& p, const PolyBasis& basis) {
  // powers up to 3 per axis, computed once
  double px[4] = {1.0, p.x, p.x * p.x, p.x * p.x * p.x};
  double py[4] = {1.0, p.y, p.y * p.y, p.y * p.y * p.y};
  double pz[4] = {1.0, p.z, p.z * p.z, p.z * p.z * p.z};
  std::vector<double> out(basis.dim());
  for (std::size_t d = 0; d < basis.dim(); ++d) {
    const auto& e = basis.exponents[d];
    out[d] = px[e[0]] * py[e[1]] * pz[e[2]];
  }
  return out;
}

Vec3 BiasModel::apply(const Vec3& pred) const {
  const auto f = poly_features(pred, basis);
  Vec3 corr{0, 0, 0};
  for (std::size_t d = 0; d < f.size(); ++d) {
    corr.x += coefficients(d, 0) * f[d];
    corr.y += coefficients(d, 1) * f[d];
    corr.z += coefficients(d, 2) * f[d];
  }
  return pred + corr;
}

BiasModel fit_bias(const std::vector<Vec3>& pred_centers, const std::vector<Vec3>& true_centers,
                   const PolyBasis& basis, double ridge, BiasFitReport* report) {
  if (pred_centers.size() != true_centers.size())
    throw NumericError("fit_bias: pred/true length mismatch");
  if (pred_centers.empty()) throw NumericError("fit_bias: empty input");
  if (ridge <= 0.0 && pred_centers.size() < basis.dim())
    throw NumericError("fit_bias: need at least " + std::to_string(basis.dim()) +
                       " samples (or ridge > 0)");

  const std::size_t n = pred_centers.size();
  Mat design(n, basis.dim());
  Mat targets(n, 3);
  for (std::size_t r = 0; r < n; ++r) {
    const auto f = poly_features(pred_centers[r], basis);
    for (std::size_t d = 0; d < basis.dim(); ++d) design(r, d) = f[d];
    const Vec3 bias = true_centers[r] - pred_centers[r];
    targets(r, 0) = bias.x;
    targets(r, 1) = bias.y;
    targets(r, 2) = bias.z;
  }

  BiasModel model;
  model.basis = basis;
  model.coefficients = solve_least_squares(design, targets, ridge);

  if (report) {
    double before = 0.0, after = 0.0;
    std::array<double, 3> res{0.0, 0.0, 0.0};
    for (std::size_t r = 0; r < n; ++r) {
      before += (true_centers[r] - pred_centers[r]).norm2();
      const Vec3 corrected = model.apply(pred_centers[r]);
      const Vec3 e = true_centers[r] - corrected;
      after += e.norm2();
      res[0] += e.x * e.x;
      res[1] += e.y * e.y;
      res[2] += e.z * e.z;
    }
    report->mse_before = before / static_cast<double>(n);
    report->mse_after = after / static_cast<double>(n);
    for (int a = 0; a < 3; ++a)
      report->residual_rms[static_cast<std::size_t>(a)] =
          std::sqrt(res[static_cast<std::size_t>(a)] / static_cast<double>(n));
  }
  return model;
}

void save_bias_model(const std::string& path, const BiasModel& model) {
  json j;
  j["basis"] = json::array();
  for (const auto& e : model.basis.exponents) j["basis"].push_back({e[0], e[1], e[2]});
  j["coeffs"] = json::array();
  for (std::size_t d = 0; d < model.basis.dim(); ++d)
    j["coeffs"].push_back({model.coefficients(d, 0), model.coefficients(d, 1), model.coefficients(d, 2)});
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
}

BiasModel load_bias_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError("bias model '" + path + "': malformed JSON");
  std::vector<std::array<int, 3>> exps;
  for (const auto& e : j.at("basis")) {
    if (!e.is_array() || e.size() != 3) throw IoError("bias model: basis entries must be triples");
    exps.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
  }
  BiasModel model;
  model.basis = PolyBasis::from_exponents(exps);
  const auto& coeffs = j.at("coeffs");
  if (coeffs.size() != model.basis.dim()) throw IoError("bias model: coefficient row count mismatch");
  model.coefficients = Mat(model.basis.dim(), 3);
  for (std::size_t d = 0; d < model.basis.dim(); ++d)
    for (int a = 0; a < 3; ++a)
      model.coefficients(d, static_cast<std::size_t>(a)) = coeffs[d][static_cast<std::size_t>(a)].get<double>();
  if (!model.coefficients.all_finite()) throw IoError("bias model: non-finite coefficients");
  return model;
}

}  // namespace aerotrack
