#include "titrate/pid.hpp"

#include <algorithm>
#include <cmath>

#include "titrate/errors.hpp"

namespace titrate {

std::pair<double, double> PidParams::clamp_bounds() const {
  if (integral_clamp) return *integral_clamp;
  return {0.0, ki > 0.0 ? 1.0 / ki : 0.0};
}

void PidParams::validate() const {
  if (!(kp >= 0.0) || !(ki >= 0.0) || !(kd >= 0.0)) throw ValidationError("PID gains must be non-negative");
  const auto [lo, hi] = clamp_bounds();
  if (!(lo <= hi)) throw ValidationError("PID integral clamp requires lo <= hi");
}

PidOutput pid_step(const PidState& state, double y_tilde, double y_star, const PidParams& params) {
  const auto [lo, hi] = params.clamp_bounds();
  const double e = y_star - y_tilde;

  PidOutput out;
  PidState& next = out.state;
  next = state;
  if (state.k == 0) next.first_error = e;
  const auto slot = static_cast<std::size_t>(state.k % 7);
  next.errors[slot] = e;
  const double lagged =
      state.k >= 6 ? next.errors[static_cast<std::size_t>((state.k - 6) % 7)] : next.first_error;
  next.integral = std::clamp(state.integral + e, lo, hi);
  next.k = state.k + 1;

  const double raw = params.kp * e + params.ki * next.integral + params.kd * (e - lagged) / 6.0;
  out.action = std::clamp(raw, 0.0, 1.0);
  return out;
}

}  // namespace titrate
