#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uavland {

using Rng = std::mt19937_64;

inline constexpr std::size_t kStateDim = 6;
inline constexpr std::size_t kActionDim = 2;

using Observation = std::array<double, kStateDim>;

// Drone position and velocity relative to the landmark top-center.
struct VehicleState {
  double p_x = 0.0, p_y = 0.0, p_z = 0.0;
  double v_x = 0.0, v_y = 0.0, v_z = 0.0;

  bool finite() const {
    return std::isfinite(p_x) && std::isfinite(p_y) && std::isfinite(p_z) &&
           std::isfinite(v_x) && std::isfinite(v_y) && std::isfinite(v_z);
  }
  bool operator==(const VehicleState&) const = default;
};

// Horizontal velocity command in m/s.
struct ActionCmd {
  double a_x = 0.0, a_y = 0.0;

  bool operator==(const ActionCmd&) const = default;
};

enum class Termination { Running, Landed, TimeOut, OutOfRange };
enum class Zone { None, Red, Green, Off };

struct StepOutcome {
  VehicleState next_state;
  double reward = 0.0;
  bool done = false;
  Termination termination = Termination::Running;
  Zone zone = Zone::None;

  bool operator==(const StepOutcome&) const = default;
};

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Running: return "Running";
    case Termination::Landed: return "Landed";
    case Termination::TimeOut: return "TimeOut";
    case Termination::OutOfRange: return "OutOfRange";
  }
  return "?";
}

inline std::string_view to_string(Zone z) {
  switch (z) {
    case Zone::None: return "None";
    case Zone::Red: return "Red";
    case Zone::Green: return "Green";
    case Zone::Off: return "Off";
  }
  return "?";
}

inline Termination termination_from_string(std::string_view s) {
  if (s == "Running") return Termination::Running;
  if (s == "Landed") return Termination::Landed;
  if (s == "TimeOut") return Termination::TimeOut;
  if (s == "OutOfRange") return Termination::OutOfRange;
  throw std::invalid_argument("unknown termination '" + std::string(s) + "'");
}

inline Zone zone_from_string(std::string_view s) {
  if (s == "None") return Zone::None;
  if (s == "Red") return Zone::Red;
  if (s == "Green") return Zone::Green;
  if (s == "Off") return Zone::Off;
  throw std::invalid_argument("unknown zone '" + std::string(s) + "'");
}

inline bool is_pad_landing(Zone z) { return z == Zone::Red || z == Zone::Green; }

}  // namespace uavland
