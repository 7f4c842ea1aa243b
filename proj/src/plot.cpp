#include "aerotrack/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace aerotrack {

namespace {

struct Panel {
  double x0, y0, w, h;          // pixel rect
  double dx0, dx1, dy0, dy1;    // data range (y grows upward)

  double px(double x) const { return x0 + (x - dx0) / (dx1 - dx0) * w; }
  double py(double y) const { return y0 + h - (y - dy0) / (dy1 - dy0) * h; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
    return;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

const char* flag_class(TrajFlag f) {
  switch (f) {
    case TrajFlag::tracked: return "tracked";
    case TrajFlag::completed: return "completed";
    case TrajFlag::interpolated: return "interpolated";
  }
  return "tracked";
}

}  // namespace

std::string emit_plot(const Trajectory& traj, const GroundTruth& gt) {
  const bool empty = traj.samples.empty() && gt.samples.empty();

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1, t_lo = 0, t_hi = 1, z_lo = 0, z_hi = 1;
  bool first = true;
  auto extend = [&](double t, const Vec3& p) {
    if (first) {
      x_lo = x_hi = p.x;
      y_lo = y_hi = p.y;
      t_lo = t_hi = t;
      z_lo = z_hi = p.z;
      first = false;
      return;
    }
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
    t_lo = std::min(t_lo, t);
    t_hi = std::max(t_hi, t);
    z_lo = std::min(z_lo, p.z);
    z_hi = std::max(z_hi, p.z);
  };
  for (const auto& [t, p] : gt.samples) extend(t, p);
  for (const auto& s : traj.samples) extend(s.t, s.p);
  pad_range(x_lo, x_hi);
  pad_range(y_lo, y_hi);
  pad_range(t_lo, t_hi);
  pad_range(z_lo, z_hi);

  const Panel xy{40, 20, 360, 360, x_lo, x_hi, y_lo, y_hi};
  const Panel tz{470, 20, 360, 360, t_lo, t_hi, z_lo, z_hi};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"880\" height=\"420\" "
         "viewBox=\"0 0 880 420\">\n";
  svg += "<style>.gt{fill:none;stroke:#222;stroke-width:1.5}"
         ".tracked{fill:#d03030}.completed{fill:#3050d0}.interpolated{fill:#909090}"
         ".frame{fill:none;stroke:#aaa}.label{font:12px sans-serif;fill:#333}</style>\n";
  if (empty) svg += "<!-- warning: empty trajectory -->\n";

  for (const Panel* panel : {&xy, &tz}) {
    svg += "<rect class=\"frame\" x=\"" + num(panel->x0) + "\" y=\"" + num(panel->y0) + "\" width=\"" +
           num(panel->w) + "\" height=\"" + num(panel->h) + "\"/>\n";
  }
  svg += "<text class=\"label\" x=\"200\" y=\"400\">x-y (m)</text>\n";
  svg += "<text class=\"label\" x=\"630\" y=\"400\">t (s) - z (m)</text>\n";

  auto polyline = [&](const Panel& panel, auto get_xy) {
    if (gt.samples.empty()) return;
    svg += "<polyline class=\"gt\" points=\"";
    for (std::size_t i = 0; i < gt.samples.size(); ++i) {
      const auto [px, py] = get_xy(gt.samples[i]);
      if (i) svg += ' ';
      svg += num(panel.px(px)) + "," + num(panel.py(py));
    }
    svg += "\"/>\n";
  };
  polyline(xy, [](const StampedVec3& s) { return std::pair<double, double>{s.second.x, s.second.y}; });
  polyline(tz, [](const StampedVec3& s) { return std::pair<double, double>{s.first, s.second.z}; });

  // one marker per sample (x-y panel); the t-z panel shows per-flag runs
  for (const auto& s : traj.samples) {
    svg += std::string("<circle class=\"") + flag_class(s.flag) + "\" cx=\"" + num(xy.px(s.p.x)) +
           "\" cy=\"" + num(xy.py(s.p.y)) + "\" r=\"2\"/>\n";
  }
  std::size_t i = 0;
  while (i < traj.samples.size()) {
    std::size_t j = i;
    while (j < traj.samples.size() && traj.samples[j].flag == traj.samples[i].flag) ++j;
    svg += std::string("<polyline class=\"gt\" style=\"stroke:") +
           (traj.samples[i].flag == TrajFlag::tracked
                ? "#d03030"
                : traj.samples[i].flag == TrajFlag::completed ? "#3050d0" : "#909090") +
           "\" points=\"";
    for (std::size_t k = i; k < j; ++k) {
      if (k > i) svg += ' ';
      svg += num(tz.px(traj.samples[k].t)) + "," + num(tz.py(traj.samples[k].p.z));
    }
    svg += "\"/>\n";
    i = j;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace aerotrack
