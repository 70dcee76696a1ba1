#include "titrate/policy.hpp"

#include <algorithm>
#include <cmath>

#include "titrate/errors.hpp"

namespace titrate {

namespace {

// Hidden activations and both logits; relu output written into `hidden`.
void forward_logits(const PolicyWeights& w, const Observation& obs, std::array<double, kHidden>& hidden,
                    double& z0, double& z1) {
  const double* hw = w.params.data() + PolicyWeights::kHiddenWeightsOffset;
  const double* hb = w.params.data() + PolicyWeights::kHiddenBiasOffset;
  const double* ow = w.params.data() + PolicyWeights::kOutputWeightsOffset;
  const double* ob = w.params.data() + PolicyWeights::kOutputBiasOffset;
  double s0 = ob[0];
  double s1 = ob[1];
  for (std::size_t j = 0; j < kHidden; ++j) {
    const double* row = hw + j * kObsDim;
    double h = hb[j] + row[0] * obs[0] + row[1] * obs[1] + row[2] * obs[2] + row[3] * obs[3];
    h = h > 0.0 ? h : 0.0;
    hidden[j] = h;
    s0 += ow[j] * h;
    s1 += ow[kHidden + j] * h;
  }
  z0 = s0;
  z1 = s1;
}

ActionProbs softmax2(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  const double total = e0 + e1;
  return {e0 / total, e1 / total};
}

}  // namespace

bool PolicyWeights::all_finite() const {
  return std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); });
}

PolicyWeights PolicyWeights::initialize(Rng& rng) {
  PolicyWeights w;
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(kObsDim));
  const double output_bound = 1.0 / std::sqrt(static_cast<double>(kHidden));
  std::uniform_real_distribution<double> hidden_dist(-hidden_bound, hidden_bound);
  std::uniform_real_distribution<double> output_dist(-output_bound, output_bound);
  for (auto& v : w.hidden_weights()) v = hidden_dist(rng);
  for (auto& v : w.hidden_bias()) v = hidden_dist(rng);
  for (auto& v : w.output_weights()) v = output_dist(rng);
  for (auto& v : w.output_bias()) v = output_dist(rng);
  return w;
}

ActionProbs policy_forward_unchecked(const PolicyWeights& w, const Observation& obs) {
  std::array<double, kHidden> hidden;
  double z0 = 0.0;
  double z1 = 0.0;
  forward_logits(w, obs, hidden, z0, z1);
  return softmax2(z0, z1);
}

ActionProbs policy_forward(const PolicyWeights& w, const Observation& obs) {
  if (!w.all_finite()) throw NumericError("policy weights contain non-finite values");
  for (double o : obs)
    if (!std::isfinite(o)) throw NumericError("observation contains non-finite values");
  std::array<double, kHidden> hidden;
  double z0 = 0.0;
  double z1 = 0.0;
  forward_logits(w, obs, hidden, z0, z1);
  if (!std::isfinite(z0) || !std::isfinite(z1)) throw NumericError("policy logits overflowed");
  return softmax2(z0, z1);
}

double sample_cross_entropy(const PolicyWeights& w, const Observation& obs, double action, Gradient* grad) {
  std::array<double, kHidden> hidden;
  double z0 = 0.0;
  double z1 = 0.0;
  forward_logits(w, obs, hidden, z0, z1);
  const double p_raw = softmax2(z0, z1).infuse;
  const double p = std::clamp(p_raw, kProbEpsilon, 1.0 - kProbEpsilon);
  const double loss = -(action * std::log(p) + (1.0 - action) * std::log(1.0 - p));
  if (grad == nullptr) return loss;

  // dL/dz1 = p - a, dL/dz0 = a - p; zero where the clamp is active.
  if (p != p_raw) return loss;
  const double d1 = p - action;
  const double d0 = -d1;

  double* g = grad->data();
  const double* ow = w.params.data() + PolicyWeights::kOutputWeightsOffset;
  double* g_hw = g + PolicyWeights::kHiddenWeightsOffset;
  double* g_hb = g + PolicyWeights::kHiddenBiasOffset;
  double* g_ow = g + PolicyWeights::kOutputWeightsOffset;
  double* g_ob = g + PolicyWeights::kOutputBiasOffset;
  g_ob[0] += d0;
  g_ob[1] += d1;
  for (std::size_t j = 0; j < kHidden; ++j) {
    const double h = hidden[j];
    if (h <= 0.0) continue;
    g_ow[j] += d0 * h;
    g_ow[kHidden + j] += d1 * h;
    const double dh = ow[j] * d0 + ow[kHidden + j] * d1;
    g_hb[j] += dh;
    double* row = g_hw + j * kObsDim;
    row[0] += dh * obs[0];
    row[1] += dh * obs[1];
    row[2] += dh * obs[2];
    row[3] += dh * obs[3];
  }
  return loss;
}

double select_action(const ActionProbs& probs, ActionMode mode, Rng& rng) {
  switch (mode) {
    case ActionMode::stochastic:
      return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < probs.infuse ? 1.0 : 0.0;
    case ActionMode::deterministic:
      return probs.infuse > probs.no_infuse ? 1.0 : 0.0;
    case ActionMode::continuous:
      return std::clamp(probs.infuse, 0.0, 1.0);
  }
  return 0.0;
}

}  // namespace titrate
