#pragma once

#include <string>

#include "aerotrack/types.hpp"

namespace aerotrack {

// Deterministic SVG with two panels (x-y and t-z): ground truth as a line,
// trajectory samples as markers styled by provenance flag. Byte-stable for
// fixed input.
std::string emit_plot(const Trajectory& traj, const GroundTruth& gt);

}  // namespace aerotrack
