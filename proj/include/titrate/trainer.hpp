#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "titrate/episode.hpp"
#include "titrate/errors.hpp"
#include "titrate/policy.hpp"

namespace titrate {

struct TrainConfig {
  EnvironmentConfig env;
  int batch_size = 16;
  double elite_percentile = 70.0;
  int max_batches = 4000;
  std::optional<double> min_mean_reward;  // unset: run until max_batches
  double learning_rate = 7e-5;
  // When set, the step size decays geometrically from learning_rate at the
  // first batch to final_learning_rate at batch max_batches - 1.
  std::optional<double> final_learning_rate;
  std::uint64_t master_seed = 0;
  int checkpoint_every = 100;

  void validate() const;  // throws ValidationError
  double learning_rate_at(int batch) const;
};

struct TraceRow {
  int batch = 0;
  double mean_reward = 0.0;
  double loss = 0.0;
};

struct LossResult {
  double loss = 0.0;
  Gradient gradient{};
};

// ceil((1 - p/100) * n), at least 1.
std::size_t elite_count(std::size_t n, double percentile);

// Indices of the highest-reward episodes, ties to the lower index; returned in
// ascending index order.
std::vector<std::size_t> select_elite(std::span<const double> rewards, double percentile);

// Summed cross-entropy of the logged actions under `weights`. The parallel
// kernel computes one partial gradient per episode and reduces them in episode
// order, so its result does not depend on the thread count.
LossResult cross_entropy_loss(std::span<const EpisodeLog* const> elite, const PolicyWeights& weights);
LossResult cross_entropy_loss_serial(std::span<const EpisodeLog* const> elite, const PolicyWeights& weights);

// w - lr * grad. Throws NumericError on a non-finite gradient or result.
PolicyWeights sgd_step(const PolicyWeights& weights, const Gradient& gradient, double learning_rate);

struct BatchResult {
  std::vector<EpisodeLog> episodes;
  std::vector<std::size_t> elite;
  double mean_reward = 0.0;
  double loss = 0.0;
};

// Samples the batch's patient and target schedule, rolls out N stochastic
// episodes, and computes the elite loss/gradient at `weights` (no update).
BatchResult run_batch(const TrainConfig& config, const PolicyWeights& weights, int batch_index,
                      LossResult* loss_out = nullptr);

PolicyWeights initial_weights(std::uint64_t master_seed);

struct TrainResult {
  PolicyWeights weights;
  std::vector<TraceRow> trace;
  int batches = 0;
};

struct TrainCallbacks {
  // Called every `checkpoint_every` batches with the weights after that batch.
  std::function<void(int batches_done, const PolicyWeights&, double mean_reward)> on_checkpoint;
  std::function<void(const TraceRow&)> on_batch;
};

// Cross-entropy training loop. On a numeric failure a TrainingAborted carrying
// the last good weights is thrown.
TrainResult train(const TrainConfig& config, const TrainCallbacks& callbacks = {});

class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, TrainResult partial)
      : NumericError(what), partial_(std::move(partial)) {}
  const TrainResult& partial() const { return partial_; }

 private:
  TrainResult partial_;
};

}  // namespace titrate
