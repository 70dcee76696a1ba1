#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

namespace titrate {

// Discrete PID with a clamped error sum and a 6-step (30 s) lagged derivative.
struct PidParams {
  double kp = 9.0;
  double ki = 0.9;
  double kd = 22.5;
  // Bounds on the accumulated error sum. When unset the sum is clamped so that
  // ki * sum lies in [0, 1], the full actuator range.
  std::optional<std::pair<double, double>> integral_clamp;

  std::pair<double, double> clamp_bounds() const;
  void validate() const;  // throws ValidationError
};

struct PidState {
  double integral = 0.0;         // clamped sum of errors
  std::array<double, 7> errors{};  // ring of e_{k-6}..e_k
  double first_error = 0.0;
  std::int64_t k = 0;
};

struct PidOutput {
  double action = 0.0;  // normalized infusion in [0, 1]
  PidState state;
};

PidOutput pid_step(const PidState& state, double y_tilde, double y_star, const PidParams& params);

}  // namespace titrate
