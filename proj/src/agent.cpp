#include "titrate/agent.hpp"

namespace titrate {

void update_internal_model(InternalModel& internal, double action) {
  PatientState s{internal.x_hat, internal.xe_hat, 0};
  s = step_patient(internal.generic_model, s, action);
  internal.x_hat = s.x;
  internal.xe_hat = s.xe;
}

double predict_effect_site_delta(const InternalModel& internal) {
  PatientState s{internal.x_hat, internal.xe_hat, 0};
  for (std::size_t i = 0; i < kLookSteps; ++i) s = step_patient(internal.generic_model, s, 0.0);
  return s.xe - internal.xe_hat;
}

Observation build_observation(std::span<const double> y_tilde_history, double target,
                              const InternalModel& internal) {
  const double current = y_tilde_history.empty() ? 0.0 : y_tilde_history.back();
  const std::size_t n = y_tilde_history.size();
  const double lagged = n > kLookSteps ? y_tilde_history[n - 1 - kLookSteps]
                                       : (y_tilde_history.empty() ? 0.0 : y_tilde_history.front());
  return {current - target, predict_effect_site_delta(internal), current - lagged, target};
}

}  // namespace titrate
