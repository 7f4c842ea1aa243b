#pragma once

#include <utility>
#include <vector>

#include "aerotrack/geometry.hpp"

namespace aerotrack {

using StampedVec3 = std::pair<Timestamp, Vec3>;

// Mean over truth timestamps of the squared Euclidean distance (m^2).
// Matching is by exact timestamp: upstream trajectory finishing evaluates
// at the truth stamps, so every truth stamp must be present in pred.
double mse_3d(const std::vector<StampedVec3>& pred, const std::vector<StampedVec3>& truth);

}  // namespace aerotrack
