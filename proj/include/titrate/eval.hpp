#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "titrate/episode.hpp"
#include "titrate/pid.hpp"
#include "titrate/policy.hpp"

namespace titrate {

// 100 * (y - y*) / y*. Throws std::domain_error when y* == 0.
double performance_error(double y, double y_star);

double median(std::vector<double> values);

inline constexpr double kBandPercent = 5.0;     // |PE| >= 5% is out of bounds
inline constexpr std::size_t kSettleSteps = 6;  // in-band run that ends an induction

struct EpisodeMetrics {
  double mape = 0.0;              // %
  double mpe = 0.0;               // %
  double oob_fraction = 0.0;      // % of steps with |PE| >= 5
  double induction_mass = 0.0;    // mg
  double maintenance_rate = 0.0;  // mg/min
  double total_mass = 0.0;        // mg
  std::size_t induction_steps = 0;
  std::size_t maintenance_steps = 0;
};

// First k in [begin, end) such that |pe[j]| < 5 for the kSettleSteps steps
// j = k..k+5 (all inside [begin, end)); `end` if there is none.
std::size_t settle_step(std::span<const double> pe, std::size_t begin, std::size_t end);

// Induction runs from step 0 to the first settled step of the first target
// segment. Each later target change opens a re-induction window that is
// excluded from the maintenance rate. Throws ValidationError on an incomplete
// log (ragged arrays, or fewer than `expected_steps` when that is non-zero).
EpisodeMetrics episode_metrics(const EpisodeLog& log, double delta_t = 5.0, std::size_t expected_steps = 0);

struct ComparisonResult {
  std::vector<double> differences;
  double mean_difference = 0.0;
  double t = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Two-sided paired t-test on a - b. Throws ValidationError on mismatched or
// too-short inputs and DegenerateError when the differences have zero variance.
ComparisonResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct CampaignConfig {
  EnvironmentConfig env;
  int n_patients = 100;
  std::uint64_t seed = 0;
  PidParams pid;
  bool keep_logs = false;
};

struct CampaignRow {
  int episode_id = 0;
  std::string controller;
  PatientParams patient;
  EpisodeMetrics metrics;
};

struct CampaignResult {
  std::vector<CampaignRow> rows;  // episode-major, controllers in request order
  std::vector<EpisodeLog> logs;   // parallel to rows when keep_logs
};

// Parses "stochastic", "deterministic", "continuous" or "pid". A policy mode
// without weights is a ValidationError (missing checkpoint).
ControllerSpec controller_from_name(const std::string& name, const PolicyWeights* weights, const PidParams& pid);

// Every controller runs each episode on the same patient, target schedule and
// measurement-noise stream. Episodes are spread over OpenMP threads.
CampaignResult run_test_campaign(std::span<const ControllerSpec> controllers, const CampaignConfig& config);
CampaignResult run_test_campaign_serial(std::span<const ControllerSpec> controllers, const CampaignConfig& config);

CampaignResult run_test_campaign(const PolicyWeights* weights, std::span<const std::string> modes,
                                 const CampaignConfig& config);

// Patient and target schedule used for campaign episode `episode_id`.
EpisodeSetup campaign_episode_setup(const CampaignConfig& config, int episode_id);
EpisodeSeeds campaign_episode_seeds(const CampaignConfig& config, int episode_id);

struct ControllerSummary {
  std::string controller;
  std::size_t n = 0;
  double median_mape = 0.0;
  double median_mpe = 0.0;
  double median_oob = 0.0;
  double median_induction_mass = 0.0;
  double median_maintenance_rate = 0.0;
  double median_total_mass = 0.0;
};

// One summary per controller, in first-appearance order.
std::vector<ControllerSummary> summarize(std::span<const CampaignRow> rows);

// Per-episode values of one metric for one controller, in episode order.
std::vector<double> metric_column(std::span<const CampaignRow> rows, const std::string& controller,
                                  double EpisodeMetrics::*field);

struct PolicyMapGrid {
  double o1_min = -0.5;
  double o1_max = 0.5;
  int o1_points = 201;
  double o2_min = -0.3;
  double o2_max = 0.3;
  int o2_points = 201;
  std::vector<double> o3_slices{-0.1, 0.0, 0.1};
  double o4 = 0.5;

  void validate() const;
  std::size_t size() const;
};

struct PolicyMapRow {
  double o1 = 0.0;
  double o2 = 0.0;
  double o3 = 0.0;
  double p_infuse = 0.0;
};

// Rows ordered by o3 slice, then o2, then o1.
std::vector<PolicyMapRow> policy_map(const PolicyWeights& weights, const PolicyMapGrid& grid);

}  // namespace titrate
