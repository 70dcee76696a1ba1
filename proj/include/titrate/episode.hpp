#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "titrate/agent.hpp"
#include "titrate/pid.hpp"
#include "titrate/pkpd.hpp"
#include "titrate/policy.hpp"
#include "titrate/seeding.hpp"

namespace titrate {

// Everything about the simulated environment that is not the controller.
struct EnvironmentConfig {
  PatientRanges ranges;
  ModelOptions model;
  MeasurementModel measurement;
  int episode_steps = 2000;
  int targets_per_episode = 4;
  double target_min = 0.25;
  double target_max = 0.75;

  void validate() const;  // throws ValidationError
};

// `targets_per_episode` uniform draws, each held for episode_steps / targets_per_episode steps.
std::vector<double> generate_episode_targets(Rng& rng, const EnvironmentConfig& env);

struct EpisodeLog {
  PatientParams patient;
  std::vector<double> target;
  std::vector<double> y;        // true LoU
  std::vector<double> y_tilde;  // measured LoU
  std::vector<Observation> observation;
  std::vector<double> action;   // normalized infusion
  std::vector<double> mass_mg;  // delivered this step
  std::vector<Vec3> x;          // PK state at the start of each step
  std::vector<double> xe;
  double reward = 0.0;

  std::size_t steps() const { return target.size(); }
  void reserve(std::size_t n);

  friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

// sum_k -|y*_k - y_k|
double episode_reward(std::span<const double> target, std::span<const double> y);

// What the controller may see at step k. The true patient fields are only
// meant for test oracles; neither the RL agent nor the PID reads them.
struct StepContext {
  std::int64_t k = 0;
  double y_tilde = 0.0;
  double target = 0.0;
  const Observation* observation = nullptr;
  const PatientState* true_state = nullptr;
  const DiscretePatientModel* true_model = nullptr;
};

struct ControllerSpec {
  enum class Kind { policy, pid, custom };
  Kind kind = Kind::policy;
  ActionMode mode = ActionMode::stochastic;
  const PolicyWeights* weights = nullptr;
  PidParams pid;
  std::function<double(const StepContext&)> custom;

  static ControllerSpec policy(const PolicyWeights& w, ActionMode m) {
    ControllerSpec c;
    c.kind = Kind::policy;
    c.mode = m;
    c.weights = &w;
    return c;
  }
  static ControllerSpec pid_controller(const PidParams& p) {
    ControllerSpec c;
    c.kind = Kind::pid;
    c.pid = p;
    return c;
  }
  static ControllerSpec custom_controller(std::function<double(const StepContext&)> f) {
    ControllerSpec c;
    c.kind = Kind::custom;
    c.custom = std::move(f);
    return c;
  }
};

std::string controller_name(const ControllerSpec& c);

struct EpisodeSeeds {
  std::uint64_t noise = 0;
  std::uint64_t action = 0;
};

struct EpisodeSetup {
  PatientParams patient;
  DiscretePatientModel model;          // the true patient
  DiscretePatientModel generic_model;  // the agent's internal model
  std::vector<double> targets;
  MeasurementModel measurement;
};

EpisodeSetup make_episode_setup(const PatientParams& patient, std::vector<double> targets,
                                const EnvironmentConfig& env);

// One closed-loop rollout: measure -> observe -> act -> step, once per target entry.
// Throws NumericError if the policy produces non-finite probabilities.
EpisodeLog run_episode(const EpisodeSetup& setup, const ControllerSpec& controller, EpisodeSeeds seeds);

// N independent rollouts sharing one setup; episode n uses seeds[n].
// The parallel kernel distributes episodes over OpenMP threads; the serial
// one is the reference it is tested against.
std::vector<EpisodeLog> run_episodes_parallel(const EpisodeSetup& setup, const ControllerSpec& controller,
                                              std::span<const EpisodeSeeds> seeds);
std::vector<EpisodeLog> run_episodes_serial(const EpisodeSetup& setup, const ControllerSpec& controller,
                                            std::span<const EpisodeSeeds> seeds);

}  // namespace titrate
