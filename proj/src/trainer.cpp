#include "titrate/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <numeric>

namespace titrate {

void TrainConfig::validate() const {
  env.validate();
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(elite_percentile > 0.0 && elite_percentile < 100.0))
    throw ValidationError("elite_percentile must lie strictly between 0 and 100");
  if (max_batches < 0) throw ValidationError("max_batches must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be positive");
  if (final_learning_rate && (!(*final_learning_rate > 0.0) || !std::isfinite(*final_learning_rate)))
    throw ValidationError("final_learning_rate must be positive");
  if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be >= 1");
}

double TrainConfig::learning_rate_at(int batch) const {
  if (!final_learning_rate || max_batches < 2) return learning_rate;
  const double t = static_cast<double>(std::clamp(batch, 0, max_batches - 1)) / (max_batches - 1);
  return learning_rate * std::pow(*final_learning_rate / learning_rate, t);
}

std::size_t elite_count(std::size_t n, double percentile) {
  const double exact = (100.0 - percentile) * static_cast<double>(n) / 100.0;
  const auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(count, 1, std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> select_elite(std::span<const double> rewards, double percentile) {
  std::vector<std::size_t> order(rewards.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&rewards](std::size_t a, std::size_t b) { return rewards[a] > rewards[b]; });
  order.resize(std::min(order.size(), elite_count(rewards.size(), percentile)));
  std::sort(order.begin(), order.end());
  return order;
}

LossResult cross_entropy_loss_serial(std::span<const EpisodeLog* const> elite, const PolicyWeights& weights) {
  LossResult out;
  for (const EpisodeLog* log : elite)
    for (std::size_t k = 0; k < log->steps(); ++k)
      out.loss += sample_cross_entropy(weights, log->observation[k], log->action[k], &out.gradient);
  return out;
}

LossResult cross_entropy_loss(std::span<const EpisodeLog* const> elite, const PolicyWeights& weights) {
  const auto n = static_cast<std::int64_t>(elite.size());
  std::vector<LossResult> partial(elite.size());
#pragma omp parallel for schedule(static, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const EpisodeLog& log = *elite[static_cast<std::size_t>(i)];
    LossResult& p = partial[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < log.steps(); ++k)
      p.loss += sample_cross_entropy(weights, log.observation[k], log.action[k], &p.gradient);
  }
  LossResult out;
  for (const auto& p : partial) {
    out.loss += p.loss;
    for (std::size_t j = 0; j < kParamCount; ++j) out.gradient[j] += p.gradient[j];
  }
  return out;
}

PolicyWeights sgd_step(const PolicyWeights& weights, const Gradient& gradient, double learning_rate) {
  PolicyWeights next = weights;
  for (std::size_t j = 0; j < kParamCount; ++j) {
    if (!std::isfinite(gradient[j])) throw NumericError("non-finite gradient at parameter " + std::to_string(j));
    next.params[j] -= learning_rate * gradient[j];
  }
  if (!next.all_finite()) throw NumericError("SGD step produced non-finite weights");
  return next;
}

PolicyWeights initial_weights(std::uint64_t master_seed) {
  Rng rng = make_rng(master_seed, {stream::kInit});
  return PolicyWeights::initialize(rng);
}

BatchResult run_batch(const TrainConfig& config, const PolicyWeights& weights, int batch_index,
                      LossResult* loss_out) {
  const auto b = static_cast<std::uint64_t>(batch_index);
  Rng env_rng = make_rng(config.master_seed, {stream::kBatch, b, stream::kEnvironment});
  const PatientParams patient = sample_patient(env_rng, config.env.ranges);
  std::vector<double> targets = generate_episode_targets(env_rng, config.env);
  const EpisodeSetup setup = make_episode_setup(patient, std::move(targets), config.env);

  std::vector<EpisodeSeeds> seeds(static_cast<std::size_t>(config.batch_size));
  for (std::size_t n = 0; n < seeds.size(); ++n) {
    seeds[n].noise = derive_seed(config.master_seed, {stream::kBatch, b, stream::kNoise, n});
    seeds[n].action = derive_seed(config.master_seed, {stream::kBatch, b, stream::kAction, n});
  }

  BatchResult result;
  result.episodes = run_episodes_parallel(setup, ControllerSpec::policy(weights, ActionMode::stochastic), seeds);

  std::vector<double> rewards;
  rewards.reserve(result.episodes.size());
  for (const auto& e : result.episodes) rewards.push_back(e.reward);
  result.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  result.elite = select_elite(rewards, config.elite_percentile);

  std::vector<const EpisodeLog*> elite_logs;
  for (std::size_t i : result.elite) elite_logs.push_back(&result.episodes[i]);
  LossResult loss = cross_entropy_loss(elite_logs, weights);
  result.loss = loss.loss;
  if (loss_out != nullptr) *loss_out = std::move(loss);
  return result;
}

TrainResult train(const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  TrainResult result;
  result.weights = initial_weights(config.master_seed);

  double mean_reward = -std::numeric_limits<double>::infinity();
  int i = 0;
  while (i < config.max_batches && (!config.min_mean_reward || mean_reward < *config.min_mean_reward)) {
    LossResult loss;
    try {
      const BatchResult batch = run_batch(config, result.weights, i, &loss);
      result.weights = sgd_step(result.weights, loss.gradient, config.learning_rate_at(i));
      mean_reward = batch.mean_reward;
    } catch (const NumericError& e) {
      throw TrainingAborted("training aborted at batch " + std::to_string(i) + ": " + e.what(), result);
    }
    ++i;
    result.batches = i;
    const TraceRow row{i - 1, mean_reward, loss.loss};
    result.trace.push_back(row);
    if (callbacks.on_batch) callbacks.on_batch(row);
    if (callbacks.on_checkpoint && i % config.checkpoint_every == 0)
      callbacks.on_checkpoint(i, result.weights, mean_reward);
  }
  return result;
}

}  // namespace titrate
