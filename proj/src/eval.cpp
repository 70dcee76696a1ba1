#include "titrate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "titrate/errors.hpp"

namespace titrate {

double performance_error(double y, double y_star) {
  if (y_star == 0.0) throw std::domain_error("performance error is undefined for a zero target");
  return 100.0 * (y - y_star) / y_star;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::size_t settle_step(std::span<const double> pe, std::size_t begin, std::size_t end) {
  std::size_t run = 0;
  for (std::size_t k = begin; k < end; ++k) {
    run = std::abs(pe[k]) < kBandPercent ? run + 1 : 0;
    if (run == kSettleSteps) return k + 1 - kSettleSteps;
  }
  return end;
}

EpisodeMetrics episode_metrics(const EpisodeLog& log, double delta_t, std::size_t expected_steps) {
  const std::size_t n = log.target.size();
  if (n == 0 || log.y.size() != n || log.action.size() != n || log.mass_mg.size() != n)
    throw ValidationError("episode log is empty or ragged");
  if (expected_steps != 0 && n != expected_steps)
    throw ValidationError("episode log has " + std::to_string(n) + " steps, expected " +
                          std::to_string(expected_steps));

  std::vector<double> pe(n);
  for (std::size_t k = 0; k < n; ++k) pe[k] = performance_error(log.y[k], log.target[k]);
  std::vector<double> abs_pe(n);
  std::transform(pe.begin(), pe.end(), abs_pe.begin(), [](double v) { return std::abs(v); });

  EpisodeMetrics m;
  m.mape = median(abs_pe);
  m.mpe = median(pe);
  const auto out = std::count_if(abs_pe.begin(), abs_pe.end(), [](double v) { return v >= kBandPercent; });
  m.oob_fraction = 100.0 * static_cast<double>(out) / static_cast<double>(n);
  m.total_mass = std::accumulate(log.mass_mg.begin(), log.mass_mg.end(), 0.0);

  // Segment boundaries: every step where the target changes.
  std::vector<std::size_t> starts{0};
  for (std::size_t k = 1; k < n; ++k)
    if (log.target[k] != log.target[k - 1]) starts.push_back(k);
  starts.push_back(n);

  auto mass_between = [&log](std::size_t a, std::size_t b) {
    return std::accumulate(log.mass_mg.begin() + static_cast<std::ptrdiff_t>(a),
                           log.mass_mg.begin() + static_cast<std::ptrdiff_t>(b), 0.0);
  };

  const std::size_t induction_end = settle_step(pe, 0, starts[1]);
  m.induction_steps = induction_end;
  m.induction_mass = mass_between(0, induction_end);

  double transient_mass = m.induction_mass;
  std::size_t transient_steps = induction_end;
  for (std::size_t s = 1; s + 1 < starts.size(); ++s) {
    const std::size_t end = settle_step(pe, starts[s], starts[s + 1]);
    transient_mass += mass_between(starts[s], end);
    transient_steps += end - starts[s];
  }
  m.maintenance_steps = n - transient_steps;
  const double minutes = static_cast<double>(m.maintenance_steps) * delta_t / 60.0;
  m.maintenance_rate = minutes > 0.0 ? (m.total_mass - transient_mass) / minutes : 0.0;
  return m;
}

ComparisonResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired t-test needs samples of equal length");
  if (a.size() < 2) throw ValidationError("paired t-test needs at least two pairs");
  ComparisonResult r;
  r.n = a.size();
  r.differences.resize(r.n);
  for (std::size_t i = 0; i < r.n; ++i) r.differences[i] = a[i] - b[i];
  const double nd = static_cast<double>(r.n);
  r.mean_difference = std::accumulate(r.differences.begin(), r.differences.end(), 0.0) / nd;
  double ss = 0.0;
  for (double d : r.differences) ss += (d - r.mean_difference) * (d - r.mean_difference);
  const double sd = std::sqrt(ss / (nd - 1.0));
  if (!(sd > 0.0)) throw DegenerateError("paired differences have zero variance");
  r.t = r.mean_difference / (sd / std::sqrt(nd));
  const boost::math::students_t dist(nd - 1.0);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

ControllerSpec controller_from_name(const std::string& name, const PolicyWeights* weights, const PidParams& pid) {
  if (name == "pid") return ControllerSpec::pid_controller(pid);
  ActionMode mode;
  if (name == "stochastic") {
    mode = ActionMode::stochastic;
  } else if (name == "deterministic") {
    mode = ActionMode::deterministic;
  } else if (name == "continuous") {
    mode = ActionMode::continuous;
  } else {
    throw ValidationError("unknown controller '" + name + "'");
  }
  if (weights == nullptr) throw ValidationError("controller '" + name + "' needs a policy checkpoint");
  return ControllerSpec::policy(*weights, mode);
}

EpisodeSetup campaign_episode_setup(const CampaignConfig& config, int episode_id) {
  const auto id = static_cast<std::uint64_t>(episode_id);
  Rng rng = make_rng(config.seed, {stream::kCampaign, id, stream::kEnvironment});
  const PatientParams patient = sample_patient(rng, config.env.ranges);
  std::vector<double> targets = generate_episode_targets(rng, config.env);
  return make_episode_setup(patient, std::move(targets), config.env);
}

EpisodeSeeds campaign_episode_seeds(const CampaignConfig& config, int episode_id) {
  const auto id = static_cast<std::uint64_t>(episode_id);
  return {derive_seed(config.seed, {stream::kCampaign, id, stream::kNoise}),
          derive_seed(config.seed, {stream::kCampaign, id, stream::kAction})};
}

namespace {

void validate_campaign(const CampaignConfig& config) {
  config.env.validate();
  config.pid.validate();
  if (config.n_patients < 1) throw ValidationError("n_patients must be >= 1");
}

// Rows and logs for one episode, every controller.
void run_campaign_episode(std::span<const ControllerSpec> controllers, const CampaignConfig& config, int id,
                          std::span<CampaignRow> rows, std::span<EpisodeLog> logs) {
  const EpisodeSetup setup = campaign_episode_setup(config, id);
  const EpisodeSeeds seeds = campaign_episode_seeds(config, id);
  for (std::size_t c = 0; c < controllers.size(); ++c) {
    EpisodeLog log = run_episode(setup, controllers[c], seeds);
    rows[c] = {id, controller_name(controllers[c]), setup.patient,
               episode_metrics(log, config.env.model.delta_t, setup.targets.size())};
    if (!logs.empty()) logs[c] = std::move(log);
  }
}

CampaignResult allocate(std::size_t controllers, const CampaignConfig& config) {
  CampaignResult result;
  const std::size_t total = controllers * static_cast<std::size_t>(config.n_patients);
  result.rows.resize(total);
  if (config.keep_logs) result.logs.resize(total);
  return result;
}

}  // namespace

CampaignResult run_test_campaign_serial(std::span<const ControllerSpec> controllers, const CampaignConfig& config) {
  validate_campaign(config);
  CampaignResult result = allocate(controllers.size(), config);
  const std::size_t c = controllers.size();
  for (int id = 0; id < config.n_patients; ++id) {
    const std::size_t off = static_cast<std::size_t>(id) * c;
    run_campaign_episode(controllers, config, id, std::span(result.rows).subspan(off, c),
                         config.keep_logs ? std::span(result.logs).subspan(off, c) : std::span<EpisodeLog>{});
  }
  return result;
}

CampaignResult run_test_campaign(std::span<const ControllerSpec> controllers, const CampaignConfig& config) {
  validate_campaign(config);
  CampaignResult result = allocate(controllers.size(), config);
  const std::size_t c = controllers.size();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (int id = 0; id < config.n_patients; ++id) {
    const std::size_t off = static_cast<std::size_t>(id) * c;
    try {
      run_campaign_episode(controllers, config, id, std::span(result.rows).subspan(off, c),
                           config.keep_logs ? std::span(result.logs).subspan(off, c) : std::span<EpisodeLog>{});
    } catch (...) {
#pragma omp critical(titrate_campaign_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

CampaignResult run_test_campaign(const PolicyWeights* weights, std::span<const std::string> modes,
                                 const CampaignConfig& config) {
  if (modes.empty()) throw ValidationError("no controllers requested");
  std::vector<ControllerSpec> controllers;
  for (const auto& m : modes) controllers.push_back(controller_from_name(m, weights, config.pid));
  return run_test_campaign(controllers, config);
}

std::vector<double> metric_column(std::span<const CampaignRow> rows, const std::string& controller,
                                  double EpisodeMetrics::*field) {
  std::vector<const CampaignRow*> picked;
  for (const auto& r : rows)
    if (r.controller == controller) picked.push_back(&r);
  std::stable_sort(picked.begin(), picked.end(),
                   [](const CampaignRow* a, const CampaignRow* b) { return a->episode_id < b->episode_id; });
  std::vector<double> out;
  out.reserve(picked.size());
  for (const auto* r : picked) out.push_back(r->metrics.*field);
  return out;
}

std::vector<ControllerSummary> summarize(std::span<const CampaignRow> rows) {
  std::vector<std::string> names;
  for (const auto& r : rows)
    if (std::find(names.begin(), names.end(), r.controller) == names.end()) names.push_back(r.controller);

  std::vector<ControllerSummary> out;
  for (const auto& name : names) {
    ControllerSummary s;
    s.controller = name;
    s.median_mape = median(metric_column(rows, name, &EpisodeMetrics::mape));
    s.median_mpe = median(metric_column(rows, name, &EpisodeMetrics::mpe));
    s.median_oob = median(metric_column(rows, name, &EpisodeMetrics::oob_fraction));
    s.median_induction_mass = median(metric_column(rows, name, &EpisodeMetrics::induction_mass));
    s.median_maintenance_rate = median(metric_column(rows, name, &EpisodeMetrics::maintenance_rate));
    auto totals = metric_column(rows, name, &EpisodeMetrics::total_mass);
    s.n = totals.size();
    s.median_total_mass = median(std::move(totals));
    out.push_back(std::move(s));
  }
  return out;
}

void PolicyMapGrid::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(o1_min) || !finite(o1_max) || !finite(o2_min) || !finite(o2_max) || !finite(o4))
    throw ValidationError("policy map grid bounds must be finite");
  if (o1_points < 1 || o2_points < 1) throw ValidationError("policy map grid needs at least one point per axis");
  if (o3_slices.empty()) throw ValidationError("policy map needs at least one o3 slice");
  for (double v : o3_slices)
    if (!finite(v)) throw ValidationError("policy map o3 slices must be finite");
}

std::size_t PolicyMapGrid::size() const {
  return o3_slices.size() * static_cast<std::size_t>(o1_points) * static_cast<std::size_t>(o2_points);
}

std::vector<PolicyMapRow> policy_map(const PolicyWeights& weights, const PolicyMapGrid& grid) {
  grid.validate();
  if (!weights.all_finite()) throw NumericError("policy weights contain non-finite values");
  auto axis = [](double lo, double hi, int n, int i) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  const auto n1 = static_cast<std::size_t>(grid.o1_points);
  const auto n2 = static_cast<std::size_t>(grid.o2_points);
  std::vector<PolicyMapRow> rows(grid.size());
  const auto lines = static_cast<std::int64_t>(grid.o3_slices.size() * n2);
#pragma omp parallel for schedule(static)
  for (std::int64_t line = 0; line < lines; ++line) {
    const auto s = static_cast<std::size_t>(line) / n2;
    const auto j = static_cast<std::size_t>(line) % n2;
    const double o2 = axis(grid.o2_min, grid.o2_max, grid.o2_points, static_cast<int>(j));
    const double o3 = grid.o3_slices[s];
    for (std::size_t i = 0; i < n1; ++i) {
      const double o1 = axis(grid.o1_min, grid.o1_max, grid.o1_points, static_cast<int>(i));
      const Observation obs{o1, o2, o3, grid.o4};
      rows[static_cast<std::size_t>(line) * n1 + i] = {o1, o2, o3, policy_forward_unchecked(weights, obs).infuse};
    }
  }
  return rows;
}

}  // namespace titrate
