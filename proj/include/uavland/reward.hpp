#pragma once

#include <cmath>
#include <stdexcept>

#include "uavland/types.hpp"

namespace uavland::reward {

struct ShapingInput {
  double p_x = 0.0, p_y = 0.0, p_z = 0.0;
  double v_x = 0.0, v_y = 0.0, v_z = 0.0;
  double a_x = 0.0, a_y = 0.0;
  double C = 0.0;  // landed indicator, 0 unless the step ended on the pad
};

inline ShapingInput make_input(const VehicleState& s, const ActionCmd& a, double C) {
  return {s.p_x, s.p_y, s.p_z, s.v_x, s.v_y, s.v_z, a.a_x, a.a_y, C};
}

// Shaping potential: distance, speed and control effort penalties plus a
// touchdown bonus that is largest when the horizontal command is zero.
inline double shaping(const ShapingInput& in) {
  const double vals[] = {in.p_x, in.p_y, in.p_z, in.v_x, in.v_y,
                         in.v_z, in.a_x, in.a_y, in.C};
  for (double v : vals) {
    if (!std::isfinite(v)) throw std::domain_error("shaping: non-finite input");
  }
  const double pos = std::sqrt(in.p_x * in.p_x + in.p_y * in.p_y + in.p_z * in.p_z);
  const double vel = std::sqrt(in.v_x * in.v_x + in.v_y * in.v_y + in.v_z * in.v_z);
  const double act = std::sqrt(in.a_x * in.a_x + in.a_y * in.a_y);
  return -100.0 * pos - 10.0 * vel - act + 10.0 * in.C * (1.0 - std::abs(in.a_x)) +
         10.0 * in.C * (1.0 - std::abs(in.a_y));
}

inline double step_reward(double shaping_t, double shaping_prev) {
  return shaping_t - shaping_prev;
}

inline double landed_bonus_C(Zone zone) {
  switch (zone) {
    case Zone::Red: return 2.0;
    case Zone::Green: return 1.0;
    case Zone::Off:
    case Zone::None: return 0.0;
  }
  return 0.0;
}

}  // namespace uavland::reward
