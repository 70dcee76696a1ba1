#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "titrate/seeding.hpp"

namespace titrate {

inline constexpr std::size_t kObsDim = 4;
inline constexpr std::size_t kHidden = 128;
inline constexpr std::size_t kActions = 2;
inline constexpr std::size_t kParamCount = (kObsDim + 1) * kHidden + (kHidden + 1) * kActions;
static_assert(kParamCount == 898);

using Observation = std::array<double, kObsDim>;

// Single-hidden-layer ReLU network with a two-way softmax head. All parameters
// live in one flat buffer laid out as
//   hidden_weights (kHidden x kObsDim, row-major) | hidden_bias |
//   output_weights (kActions x kHidden, row-major) | output_bias
struct PolicyWeights {
  static constexpr std::size_t kHiddenWeightsOffset = 0;
  static constexpr std::size_t kHiddenBiasOffset = kHidden * kObsDim;
  static constexpr std::size_t kOutputWeightsOffset = kHiddenBiasOffset + kHidden;
  static constexpr std::size_t kOutputBiasOffset = kOutputWeightsOffset + kActions * kHidden;

  std::array<double, kParamCount> params{};

  std::span<double> hidden_weights() { return std::span(params).subspan(kHiddenWeightsOffset, kHidden * kObsDim); }
  std::span<double> hidden_bias() { return std::span(params).subspan(kHiddenBiasOffset, kHidden); }
  std::span<double> output_weights() { return std::span(params).subspan(kOutputWeightsOffset, kActions * kHidden); }
  std::span<double> output_bias() { return std::span(params).subspan(kOutputBiasOffset, kActions); }
  std::span<const double> hidden_weights() const {
    return std::span(params).subspan(kHiddenWeightsOffset, kHidden * kObsDim);
  }
  std::span<const double> hidden_bias() const { return std::span(params).subspan(kHiddenBiasOffset, kHidden); }
  std::span<const double> output_weights() const {
    return std::span(params).subspan(kOutputWeightsOffset, kActions * kHidden);
  }
  std::span<const double> output_bias() const { return std::span(params).subspan(kOutputBiasOffset, kActions); }

  static constexpr std::size_t size() { return kParamCount; }
  bool all_finite() const;

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  static PolicyWeights initialize(Rng& rng);
  static PolicyWeights zeros() { return {}; }

  friend bool operator==(const PolicyWeights&, const PolicyWeights&) = default;
};

using Gradient = std::array<double, kParamCount>;

struct ActionProbs {
  double no_infuse = 0.5;
  double infuse = 0.5;
};

// Throws NumericError on non-finite weights, observation or logits.
ActionProbs policy_forward(const PolicyWeights& w, const Observation& obs);

// Unchecked forward pass used inside rollouts once weights were validated.
ActionProbs policy_forward_unchecked(const PolicyWeights& w, const Observation& obs);

// Probability clamp inside the log loss.
inline constexpr double kProbEpsilon = 1e-7;

// -[a log pi(1|o) + (1-a) log(1 - pi(1|o))] at one sample; accumulates its
// gradient into `grad` when non-null. Returns the loss term.
double sample_cross_entropy(const PolicyWeights& w, const Observation& obs, double action, Gradient* grad);

enum class ActionMode { stochastic, deterministic, continuous };

// stochastic: a ~ Bernoulli(p_infuse); deterministic: argmax, tie -> 0;
// continuous: a = p_infuse.
double select_action(const ActionProbs& probs, ActionMode mode, Rng& rng);

}  // namespace titrate
