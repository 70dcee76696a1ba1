#pragma once

#include <array>
#include <cstdint>

#include "titrate/seeding.hpp"

// Virtual patient: three-compartment propofol PK, first-order effect-site link,
// Hill pharmacodynamics and a noisy, clipped LoU measurement.

namespace titrate {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;  // row-major: m[row][col]

enum class Sex { male, female };

struct PatientDemographics {
  double age = 30.0;      // yr
  double height = 170.0;  // cm
  double weight = 70.0;   // kg
  Sex sex = Sex::male;

  friend bool operator==(const PatientDemographics&, const PatientDemographics&) = default;
};

struct PatientParams {
  PatientDemographics demographics;
  double ke0 = 0.17;  // 1/min
  double gamma = 5.0;
  double c50 = 2.5;  // state units (mg)

  friend bool operator==(const PatientParams&, const PatientParams&) = default;
};

struct ParamRange {
  double generic = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Generic values and sampling ranges for the randomized patient population.
struct PatientRanges {
  ParamRange height{170.0, 160.0, 190.0};
  ParamRange weight{70.0, 50.0, 100.0};
  ParamRange age{30.0, 18.0, 90.0};
  ParamRange ke0{0.17, 0.128, 0.213};
  ParamRange gamma{5.0, 5.0, 9.0};
  ParamRange c50{2.5, 2.0, 6.0};
  Sex generic_sex = Sex::male;
  double female_probability = 0.5;

  PatientParams generic() const;
  // Throws ValidationError unless every range satisfies min <= generic <= max
  // (generic may fall outside only if it is still physically valid) and min <= max.
  void validate() const;
};

// Compartment 1 central, 2 slow peripheral, 3 rapid peripheral. Units 1/min.
struct RateConstants {
  double k10 = 0.0;
  double k12 = 0.0;
  double k13 = 0.0;
  double k21 = 0.0;
  double k31 = 0.0;
};

double lean_body_mass(const PatientDemographics& d);

// Throws ParameterError for non-physical demographics or covariates that drive
// a volume/clearance to a non-positive value.
RateConstants schnider_rates(const PatientDemographics& d);

// Continuous-time dx/dt = rate_matrix * x, acting on compartment amounts.
Mat3 rate_matrix(const RateConstants& k);

enum class LinkBeta {
  per_second,  // beta = (ke0/60) * exp(-ke0 * dt / 60)
  steady_state,   // beta = 1 - alpha, so x_e -> x_1 at equilibrium
};

enum class Discretization {
  exact,  // matrix exponential
  euler,  // composed forward-Euler sub-steps
};

struct ModelOptions {
  double delta_t = 5.0;         // s
  double infusion_rate = 1.67;  // mg/s at full action
  LinkBeta link_beta = LinkBeta::per_second;
  Discretization discretization = Discretization::exact;
  int euler_substeps = 5;
};

struct DiscretePatientModel {
  Mat3 a{};
  Vec3 b{};  // {delta_t * infusion_rate, 0, 0}
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 5.0;
  double c50 = 2.5;
  double delta_t = 5.0;

  double bolus_mg() const { return b[0]; }
};

Mat3 mat_exp(const Mat3& m);
Mat3 discretize_rates(const Mat3& continuous, double dt_minutes, const ModelOptions& opts);

DiscretePatientModel discretize(const RateConstants& rates, double ke0, double gamma, double c50,
                                const ModelOptions& opts = {});
DiscretePatientModel build_discrete_model(const PatientParams& params, const ModelOptions& opts = {});

struct PatientState {
  Vec3 x{};
  double xe = 0.0;
  std::int64_t k = 0;
};

// x' = A x + B a, x_e' = alpha x_e + beta x_1. Fractional actions are allowed.
PatientState step_patient(const DiscretePatientModel& model, const PatientState& state, double action);

double hill_response(double xe, double gamma, double c50);

struct MeasurementModel {
  double noise_variance = 0.0003;
};

// Exactly one standard-normal draw per call, even when the variance is zero, so
// noise streams stay aligned across controllers.
double measure(double y, const MeasurementModel& model, Rng& rng);

PatientParams sample_patient(Rng& rng, const PatientRanges& ranges);

}  // namespace titrate
