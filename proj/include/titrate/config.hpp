#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "titrate/eval.hpp"
#include "titrate/pid.hpp"
#include "titrate/trainer.hpp"

namespace titrate {

// Everything a workbench run needs, loaded from one JSON document. Every key
// is optional; unknown keys are rejected.
struct WorkbenchConfig {
  TrainConfig train;  // train.env is the shared environment
  PidParams pid;
  int eval_patients = 100;
  std::uint64_t eval_seed = 1;
  std::vector<std::string> eval_modes{"stochastic", "deterministic", "continuous", "pid"};
  PolicyMapGrid grid;

  EnvironmentConfig& env() { return train.env; }
  const EnvironmentConfig& env() const { return train.env; }
  CampaignConfig campaign() const;
  void validate() const;  // throws ValidationError
};

WorkbenchConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const WorkbenchConfig& config);
WorkbenchConfig load_config(const std::filesystem::path& path);

// Applies "key=value" patient overrides (age, height, weight, sex, ke0, gamma, c50).
PatientParams apply_patient_overrides(PatientParams base, const std::vector<std::string>& overrides);

// Whether every sampled-parameter of `p` lies inside the configured ranges.
bool within_ranges(const PatientParams& p, const PatientRanges& ranges);

std::string to_string(Sex s);
std::string to_string(LinkBeta b);
std::string to_string(Discretization d);

}  // namespace titrate
