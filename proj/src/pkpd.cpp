#include "titrate/pkpd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "titrate/errors.hpp"
#include "titrate/schnider.hpp"

namespace titrate {

namespace {

Mat3 identity() {
  Mat3 m{};
  for (int i = 0; i < 3; ++i) m[i][i] = 1.0;
  return m;
}

Mat3 multiply(const Mat3& l, const Mat3& r) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) out[i][j] += l[i][k] * r[k][j];
  return out;
}

void check_range(const char* name, const ParamRange& r) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max) || !std::isfinite(r.generic))
    throw ValidationError(std::string("patient range '") + name + "' is not finite");
  if (r.min > r.max) throw ValidationError(std::string("patient range '") + name + "' has min > max");
  if (r.min <= 0.0) throw ValidationError(std::string("patient range '") + name + "' must be positive");
}

}  // namespace

PatientParams PatientRanges::generic() const {
  PatientParams p;
  p.demographics = {age.generic, height.generic, weight.generic, generic_sex};
  p.ke0 = ke0.generic;
  p.gamma = gamma.generic;
  p.c50 = c50.generic;
  return p;
}

void PatientRanges::validate() const {
  check_range("height", height);
  check_range("weight", weight);
  check_range("age", age);
  check_range("ke0", ke0);
  check_range("gamma", gamma);
  check_range("c50", c50);
  if (!(female_probability >= 0.0 && female_probability <= 1.0))
    throw ValidationError("female_probability must lie in [0, 1]");
}

double lean_body_mass(const PatientDemographics& d) {
  const double ratio = d.weight / d.height;
  if (d.sex == Sex::male) return schnider::kLbmMaleWeight * d.weight - schnider::kLbmMaleRatio * ratio * ratio;
  return schnider::kLbmFemaleWeight * d.weight - schnider::kLbmFemaleRatio * ratio * ratio;
}

RateConstants schnider_rates(const PatientDemographics& d) {
  if (!(d.age > 0.0 && d.age <= 120.0)) throw ParameterError("age out of physical range: " + std::to_string(d.age));
  if (!(d.height >= 50.0 && d.height <= 250.0))
    throw ParameterError("height out of physical range: " + std::to_string(d.height));
  if (!(d.weight >= 10.0 && d.weight <= 300.0))
    throw ParameterError("weight out of physical range: " + std::to_string(d.weight));

  using namespace schnider;
  const double lbm = lean_body_mass(d);
  const double v1 = kV1;
  const double v2 = kV2 + kV2AgeSlope * (d.age - kRefAge);
  const double v3 = kV3;
  const double cl1 = kCl1 + kCl1WeightSlope * (d.weight - kRefWeight) +
                     kCl1LeanBodyMassSlope * (lbm - kRefLeanBodyMass) + kCl1HeightSlope * (d.height - kRefHeight);
  const double cl2 = kCl2 + kCl2AgeSlope * (d.age - kRefAge);
  const double cl3 = kCl3;
  if (lbm <= 0.0 || v2 <= 0.0 || cl1 <= 0.0 || cl2 <= 0.0)
    throw ParameterError("demographics give a non-positive Schnider volume or clearance");

  // Schnider's compartment 3 (large, slow) is our x2; compartment 2 is our x3.
  RateConstants k;
  k.k10 = cl1 / v1;
  k.k12 = cl3 / v1;
  k.k13 = cl2 / v1;
  k.k21 = cl3 / v3;
  k.k31 = cl2 / v2;
  return k;
}

Mat3 rate_matrix(const RateConstants& k) {
  Mat3 m{};
  m[0] = {-(k.k10 + k.k12 + k.k13), k.k21, k.k31};
  m[1] = {k.k12, -k.k21, 0.0};
  m[2] = {k.k13, 0.0, -k.k31};
  return m;
}

Mat3 mat_exp(const Mat3& m) {
  double norm = 0.0;
  for (const auto& row : m) norm = std::max(norm, std::abs(row[0]) + std::abs(row[1]) + std::abs(row[2]));
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const double scale = std::ldexp(1.0, -squarings);

  Mat3 scaled = m;
  for (auto& row : scaled)
    for (auto& v : row) v *= scale;

  // Taylor series; ||scaled|| <= 0.5 so 20 terms is far below rounding.
  Mat3 result = identity();
  Mat3 term = identity();
  for (int n = 1; n <= 20; ++n) {
    term = multiply(term, scaled);
    for (auto& row : term)
      for (auto& v : row) v /= n;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) result[i][j] += term[i][j];
  }
  for (int s = 0; s < squarings; ++s) result = multiply(result, result);
  return result;
}

Mat3 discretize_rates(const Mat3& continuous, double dt_minutes, const ModelOptions& opts) {
  if (opts.discretization == Discretization::exact) {
    Mat3 scaled = continuous;
    for (auto& row : scaled)
      for (auto& v : row) v *= dt_minutes;
    return mat_exp(scaled);
  }
  if (opts.euler_substeps < 1) throw ValidationError("euler_substeps must be >= 1");
  const double h = dt_minutes / opts.euler_substeps;
  Mat3 step = identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) step[i][j] += h * continuous[i][j];
  Mat3 out = identity();
  for (int s = 0; s < opts.euler_substeps; ++s) out = multiply(step, out);
  return out;
}

DiscretePatientModel discretize(const RateConstants& rates, double ke0, double gamma, double c50,
                                const ModelOptions& opts) {
  if (!(opts.delta_t > 0.0)) throw ParameterError("delta_t must be positive");
  if (!(opts.infusion_rate >= 0.0)) throw ParameterError("infusion_rate must be non-negative");
  if (!(ke0 > 0.0) || !(gamma > 0.0) || !(c50 > 0.0))
    throw ParameterError("ke0, gamma and c50 must be positive");

  DiscretePatientModel model;
  model.delta_t = opts.delta_t;
  model.a = discretize_rates(rate_matrix(rates), opts.delta_t / 60.0, opts);
  model.b = {opts.delta_t * opts.infusion_rate, 0.0, 0.0};
  model.alpha = std::exp(-ke0 * opts.delta_t / 60.0);
  model.beta = opts.link_beta == LinkBeta::per_second ? (ke0 / 60.0) * model.alpha : 1.0 - model.alpha;
  model.gamma = gamma;
  model.c50 = c50;
  return model;
}

DiscretePatientModel build_discrete_model(const PatientParams& params, const ModelOptions& opts) {
  return discretize(schnider_rates(params.demographics), params.ke0, params.gamma, params.c50, opts);
}

PatientState step_patient(const DiscretePatientModel& model, const PatientState& state, double action) {
  PatientState next;
  for (int i = 0; i < 3; ++i) {
    next.x[i] = model.a[i][0] * state.x[0] + model.a[i][1] * state.x[1] + model.a[i][2] * state.x[2] +
                model.b[i] * action;
  }
  next.xe = model.alpha * state.xe + model.beta * state.x[0];
  next.k = state.k + 1;
  return next;
}

double hill_response(double xe, double gamma, double c50) {
  if (xe <= 0.0) return 0.0;
  return 1.0 / (1.0 + std::pow(c50 / xe, gamma));
}

double measure(double y, const MeasurementModel& model, Rng& rng) {
  std::normal_distribution<double> standard(0.0, 1.0);
  const double v = standard(rng) * std::sqrt(model.noise_variance);
  return std::clamp(y + v, 0.0, 1.0);
}

PatientParams sample_patient(Rng& rng, const PatientRanges& ranges) {
  auto draw = [&rng](const ParamRange& r) {
    if (r.min == r.max) {
      rng.discard(1);
      return r.min;
    }
    return std::uniform_real_distribution<double>(r.min, r.max)(rng);
  };
  PatientParams p;
  p.demographics.height = draw(ranges.height);
  p.demographics.weight = draw(ranges.weight);
  p.demographics.age = draw(ranges.age);
  p.ke0 = draw(ranges.ke0);
  p.gamma = draw(ranges.gamma);
  p.c50 = draw(ranges.c50);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  p.demographics.sex = u < ranges.female_probability ? Sex::female : Sex::male;
  return p;
}

}  // namespace titrate
