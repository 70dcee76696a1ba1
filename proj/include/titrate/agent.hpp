#pragma once

#include <cstddef>
#include <span>

#include "titrate/pkpd.hpp"
#include "titrate/policy.hpp"

namespace titrate {

inline constexpr std::size_t kLookSteps = 6;  // 30 s at 5 s steps

// The agent's own generic-patient PK model, driven only by emitted actions.
struct InternalModel {
  DiscretePatientModel generic_model;
  Vec3 x_hat{};
  double xe_hat = 0.0;

  explicit InternalModel(DiscretePatientModel model) : generic_model(model) {}
};

void update_internal_model(InternalModel& internal, double action);

// x_e_hat after kLookSteps steps of zero infusion minus x_e_hat now.
double predict_effect_site_delta(const InternalModel& internal);

// `y_tilde_history` holds measurements y~_0..y~_k (last element is current).
// Entries older than the history start are taken as y~_0.
Observation build_observation(std::span<const double> y_tilde_history, double target,
                              const InternalModel& internal);

}  // namespace titrate
