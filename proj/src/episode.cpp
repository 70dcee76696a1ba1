#include "titrate/episode.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "titrate/errors.hpp"

namespace titrate {

void EnvironmentConfig::validate() const {
  ranges.validate();
  if (!(model.delta_t > 0.0)) throw ValidationError("delta_t must be positive");
  if (!(model.infusion_rate >= 0.0)) throw ValidationError("infusion_rate must be non-negative");
  if (model.euler_substeps < 1) throw ValidationError("euler_substeps must be >= 1");
  if (!(measurement.noise_variance >= 0.0)) throw ValidationError("noise_variance must be non-negative");
  if (episode_steps < 1) throw ValidationError("episode_steps must be >= 1");
  if (targets_per_episode < 1) throw ValidationError("targets_per_episode must be >= 1");
  if (episode_steps % targets_per_episode != 0)
    throw ValidationError("episode_steps must be divisible by targets_per_episode");
  if (!(target_min <= target_max) || !(target_min >= 0.0) || !(target_max <= 1.0))
    throw ValidationError("target range must satisfy 0 <= min <= max <= 1");
}

std::vector<double> generate_episode_targets(Rng& rng, const EnvironmentConfig& env) {
  const int segment = env.episode_steps / env.targets_per_episode;
  std::vector<double> schedule;
  schedule.reserve(static_cast<std::size_t>(env.episode_steps));
  std::uniform_real_distribution<double> dist(env.target_min, env.target_max);
  for (int i = 0; i < env.targets_per_episode; ++i) {
    const double t = env.target_min == env.target_max ? env.target_min : dist(rng);
    schedule.insert(schedule.end(), static_cast<std::size_t>(segment), t);
  }
  return schedule;
}

void EpisodeLog::reserve(std::size_t n) {
  target.reserve(n);
  y.reserve(n);
  y_tilde.reserve(n);
  observation.reserve(n);
  action.reserve(n);
  mass_mg.reserve(n);
  x.reserve(n);
  xe.reserve(n);
}

double episode_reward(std::span<const double> target, std::span<const double> y) {
  double r = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) r -= std::abs(target[k] - y[k]);
  return r;
}

std::string controller_name(const ControllerSpec& c) {
  switch (c.kind) {
    case ControllerSpec::Kind::pid:
      return "pid";
    case ControllerSpec::Kind::custom:
      return "custom";
    case ControllerSpec::Kind::policy:
      break;
  }
  switch (c.mode) {
    case ActionMode::stochastic:
      return "stochastic";
    case ActionMode::deterministic:
      return "deterministic";
    case ActionMode::continuous:
      return "continuous";
  }
  return "policy";
}

EpisodeSetup make_episode_setup(const PatientParams& patient, std::vector<double> targets,
                                const EnvironmentConfig& env) {
  EpisodeSetup setup;
  setup.patient = patient;
  setup.model = build_discrete_model(patient, env.model);
  setup.generic_model = build_discrete_model(env.ranges.generic(), env.model);
  setup.targets = std::move(targets);
  setup.measurement = env.measurement;
  return setup;
}

EpisodeLog run_episode(const EpisodeSetup& setup, const ControllerSpec& controller, EpisodeSeeds seeds) {
  if (controller.kind == ControllerSpec::Kind::policy) {
    if (controller.weights == nullptr) throw ValidationError("policy controller has no weights");
    if (!controller.weights->all_finite()) throw NumericError("policy weights contain non-finite values");
  }

  Rng noise_rng(seeds.noise);
  Rng action_rng(seeds.action);
  const std::size_t steps = setup.targets.size();

  EpisodeLog log;
  log.patient = setup.patient;
  log.reserve(steps);

  PatientState state;
  InternalModel internal(setup.generic_model);
  PidState pid_state;
  std::vector<double> history;
  history.reserve(steps);

  for (std::size_t k = 0; k < steps; ++k) {
    const double target = setup.targets[k];
    const double y = hill_response(state.xe, setup.model.gamma, setup.model.c50);
    const double y_tilde = measure(y, setup.measurement, noise_rng);
    history.push_back(y_tilde);
    const Observation obs = build_observation(history, target, internal);

    double action = 0.0;
    switch (controller.kind) {
      case ControllerSpec::Kind::policy: {
        const ActionProbs probs = policy_forward_unchecked(*controller.weights, obs);
        if (!std::isfinite(probs.infuse) || !std::isfinite(probs.no_infuse))
          throw NumericError("policy output is not finite at step " + std::to_string(k));
        action = select_action(probs, controller.mode, action_rng);
        break;
      }
      case ControllerSpec::Kind::pid: {
        const PidOutput out = pid_step(pid_state, y_tilde, target, controller.pid);
        pid_state = out.state;
        action = out.action;
        break;
      }
      case ControllerSpec::Kind::custom: {
        StepContext ctx{static_cast<std::int64_t>(k), y_tilde, target, &obs, &state, &setup.model};
        action = std::clamp(controller.custom(ctx), 0.0, 1.0);
        break;
      }
    }

    log.target.push_back(target);
    log.y.push_back(y);
    log.y_tilde.push_back(y_tilde);
    log.observation.push_back(obs);
    log.action.push_back(action);
    log.mass_mg.push_back(action * setup.model.bolus_mg());
    log.x.push_back(state.x);
    log.xe.push_back(state.xe);

    state = step_patient(setup.model, state, action);
    update_internal_model(internal, action);
  }
  log.reward = episode_reward(log.target, log.y);
  return log;
}

std::vector<EpisodeLog> run_episodes_serial(const EpisodeSetup& setup, const ControllerSpec& controller,
                                            std::span<const EpisodeSeeds> seeds) {
  std::vector<EpisodeLog> logs;
  logs.reserve(seeds.size());
  for (const auto& s : seeds) logs.push_back(run_episode(setup, controller, s));
  return logs;
}

std::vector<EpisodeLog> run_episodes_parallel(const EpisodeSetup& setup, const ControllerSpec& controller,
                                              std::span<const EpisodeSeeds> seeds) {
  std::vector<EpisodeLog> logs(seeds.size());
  const auto n = static_cast<std::int64_t>(seeds.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      logs[static_cast<std::size_t>(i)] = run_episode(setup, controller, seeds[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(titrate_episode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return logs;
}

}  // namespace titrate
