#include "aerotrack/metrics.hpp"

#include <string>
#include <unordered_map>

#include "aerotrack/errors.hpp"

namespace aerotrack {

double mse_3d(const std::vector<StampedVec3>& pred, const std::vector<StampedVec3>& truth) {
  if (truth.empty()) throw NumericError("mse_3d: empty truth");
  std::unordered_map<double, Vec3> by_stamp;
  by_stamp.reserve(pred.size());
  for (const auto& [t, p] : pred) by_stamp[t] = p;

  double sum = 0.0;
  for (const auto& [t, g] : truth) {
    const auto it = by_stamp.find(t);
    if (it == by_stamp.end())
      throw NumericError("mse_3d: truth timestamp " + std::to_string(t) + " absent from prediction");
    sum += (it->second - g).norm2();
  }
  return sum / static_cast<double>(truth.size());
}

}  // namespace aerotrack
