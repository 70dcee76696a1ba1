#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "titrate/errors.hpp"
#include "titrate/eval.hpp"

using namespace titrate;

namespace {

EpisodeLog tracking_log(const std::vector<double>& target, double gain, double action) {
  EpisodeLog log;
  for (double t : target) {
    log.target.push_back(t);
    log.y.push_back(gain * t);
    log.y_tilde.push_back(gain * t);
    log.action.push_back(action);
    log.mass_mg.push_back(action * 8.35);
  }
  return log;
}

std::vector<double> schedule(std::initializer_list<std::pair<double, int>> segments) {
  std::vector<double> out;
  for (auto [value, steps] : segments) out.insert(out.end(), static_cast<std::size_t>(steps), value);
  return out;
}

}  // namespace

TEST_CASE("performance error") {
  CHECK(performance_error(0.55, 0.5) == doctest::Approx(10.0));
  CHECK(performance_error(0.45, 0.5) == doctest::Approx(-10.0));
  CHECK(performance_error(0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(performance_error(0.1, 0.0), std::domain_error);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(median({}), ValidationError);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(static_cast<std::size_t>(1 + t % 17));
    for (auto& x : v) x = u(rng);
    CHECK(median(v) == oracle::sorted_median(v));
  }
}

TEST_CASE("episode metrics") {
  const auto target = schedule({{0.5, 500}, {0.3, 500}, {0.7, 500}, {0.4, 500}});

  SUBCASE("perfect tracking") {
    const auto m = episode_metrics(tracking_log(target, 1.0, 0.5));
    CHECK(m.mape == 0.0);
    CHECK(m.mpe == 0.0);
    CHECK(m.oob_fraction == 0.0);
    CHECK(m.induction_steps == 0);
    CHECK(m.induction_mass == 0.0);
    CHECK(m.maintenance_steps == 2000);
    // 0.5 * 8.35 mg every 5 s
    CHECK(m.maintenance_rate == doctest::Approx(0.5 * 8.35 * 12.0));
    CHECK(m.total_mass == doctest::Approx(2000 * 0.5 * 8.35));
  }
  SUBCASE("a constant 5% overshoot is out of bounds everywhere") {
    const auto m = episode_metrics(tracking_log(target, 1.05, 1.0));
    CHECK(m.mape == doctest::Approx(5.0));
    CHECK(m.mpe == doctest::Approx(5.0));
    CHECK(m.oob_fraction == 100.0);
    CHECK(m.induction_steps == 500);
    CHECK(m.maintenance_steps == 0);
    CHECK(m.maintenance_rate == 0.0);
  }
  SUBCASE("induction ends at the first of six consecutive in-band steps") {
    const auto t = schedule({{0.5, 40}, {0.6, 40}});
    auto log = tracking_log(t, 1.0, 0.0);
    for (int k = 0; k < 10; ++k) log.y[static_cast<std::size_t>(k)] = 0.1;
    log.y[13] = 0.1;  // breaks the first run of in-band steps
    for (int k = 0; k < 20; ++k) log.mass_mg[static_cast<std::size_t>(k)] = 1.0;
    // Re-induction after the target change: out of band for 3 steps.
    for (int k = 40; k < 43; ++k) {
      log.y[static_cast<std::size_t>(k)] = 0.3;
      log.mass_mg[static_cast<std::size_t>(k)] = 2.0;
    }
    const auto m = episode_metrics(log);
    CHECK(m.induction_steps == 14);
    CHECK(m.induction_mass == doctest::Approx(14.0));
    CHECK(m.maintenance_steps == 80 - 14 - 3);
    const double maintenance_mass = 6.0;  // steps 14..19
    CHECK(m.maintenance_rate == doctest::Approx(maintenance_mass / (63 * 5.0 / 60.0)));
    CHECK(m.total_mass == doctest::Approx(20.0 + 6.0));
  }
  SUBCASE("the band edge counts as out of bounds") {
    const auto t = schedule({{0.4, 10}});
    auto log = tracking_log(t, 1.0, 0.0);
    log.y[0] = 0.42;  // PE = 5% exactly in real arithmetic
    const auto pe = performance_error(log.y[0], log.target[0]);
    const auto m = episode_metrics(log);
    CHECK(m.oob_fraction == (std::abs(pe) >= 5.0 ? 10.0 : 0.0));
  }
  SUBCASE("incomplete logs are rejected") {
    auto log = tracking_log(target, 1.0, 0.0);
    CHECK_THROWS_AS(episode_metrics(log, 5.0, 2001), ValidationError);
    log.y.pop_back();
    CHECK_THROWS_AS(episode_metrics(log), ValidationError);
  }
  SUBCASE("zero target is a domain error") {
    CHECK_THROWS_AS(episode_metrics(tracking_log(schedule({{0.0, 10}}), 1.0, 0.0)), std::domain_error);
  }
}

TEST_CASE("metrics recomputed from a logged rollout") {
  EnvironmentConfig env;
  Rng rng(21);
  const auto setup = make_episode_setup(sample_patient(rng, env.ranges), generate_episode_targets(rng, env), env);
  const auto log = run_episode(setup, ControllerSpec::pid_controller({}), {1, 2});
  const auto m = episode_metrics(log);

  std::vector<double> pe;
  std::vector<double> ape;
  int out = 0;
  double total = 0.0;
  for (std::size_t k = 0; k < log.steps(); ++k) {
    const double e = 100.0 * (log.y[k] - log.target[k]) / log.target[k];
    pe.push_back(e);
    ape.push_back(std::abs(e));
    out += std::abs(e) >= 5.0;
    total += log.mass_mg[k];
  }
  CHECK(m.mape == doctest::Approx(oracle::sorted_median(ape)).epsilon(1e-12));
  CHECK(m.mpe == doctest::Approx(oracle::sorted_median(pe)).epsilon(1e-12));
  CHECK(m.oob_fraction == doctest::Approx(100.0 * out / 2000.0));
  CHECK(m.total_mass == doctest::Approx(total).epsilon(1e-12));
  CHECK(m.mape >= std::abs(m.mpe));
  CHECK(m.induction_mass <= m.total_mass);
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{3.1, 2.4, 4.0, 1.9, 2.8, 3.3, 2.2, 3.9};
  const std::vector<double> b{3.6, 2.5, 4.4, 2.6, 2.7, 3.9, 2.9, 4.1};
  const auto r = paired_t_test(a, b);
  // Reference values from scipy.stats.ttest_rel.
  CHECK(r.t == doctest::Approx(-3.7166035144710077).epsilon(1e-10));
  CHECK(r.p_value == doctest::Approx(0.007489457852189801).epsilon(1e-8));
  CHECK(r.n == 8);

  SUBCASE("identical samples are degenerate") {
    CHECK_THROWS_AS(paired_t_test(a, a), DegenerateError);
  }
  SUBCASE("tiny jitter is not significant") {
    std::vector<double> c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += (i % 2 ? 1e-9 : -1e-9);
    CHECK(paired_t_test(a, c).p_value > 0.5);
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}), ValidationError);
    CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1.0, 2.0}), ValidationError);
  }
}

TEST_CASE("test campaign") {
  CampaignConfig config;
  config.n_patients = 1;
  config.seed = 5;
  Rng rng(1);
  const auto w = PolicyWeights::initialize(rng);
  const std::vector<std::string> all{"stochastic", "deterministic", "continuous", "pid"};

  SUBCASE("one patient and four controllers give four rows") {
    const auto r = run_test_campaign(&w, all, config);
    REQUIRE(r.rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.rows[i].controller == all[i]);
      CHECK(r.rows[i].episode_id == 0);
      CHECK(r.rows[i].metrics.mape >= std::abs(r.rows[i].metrics.mpe));
    }
  }
  SUBCASE("policy modes need weights") {
    CHECK_THROWS_AS(run_test_campaign(nullptr, all, config), ValidationError);
    const std::vector<std::string> pid{"pid"};
    CHECK(run_test_campaign(nullptr, pid, config).rows.size() == 1);
    const std::vector<std::string> bogus{"bang-bang"};
    CHECK_THROWS_AS(run_test_campaign(&w, bogus, config), ValidationError);
  }
  SUBCASE("repeatable and thread-count independent") {
    config.n_patients = 6;
    config.keep_logs = true;
    std::vector<ControllerSpec> specs;
    for (const auto& m : all) specs.push_back(controller_from_name(m, &w, config.pid));
    const auto a = run_test_campaign(specs, config);
    const auto b = run_test_campaign(specs, config);
    const auto s = run_test_campaign_serial(specs, config);
    REQUIRE(a.rows.size() == 24);
    CHECK(a.logs == b.logs);
    CHECK(a.logs == s.logs);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].metrics.mape == s.rows[i].metrics.mape);
      CHECK(a.rows[i].patient.ke0 == s.rows[i].patient.ke0);
    }
  }
  SUBCASE("controllers share the patient, targets and measurement noise") {
    config.keep_logs = true;
    const auto r = run_test_campaign(&w, all, config);
    const auto& ref = r.logs.back();
    for (const auto& log : r.logs) {
      CHECK(log.target == ref.target);
      CHECK(log.patient.c50 == ref.patient.c50);
      for (std::size_t k = 0; k < log.steps(); ++k) {
        const bool interior = log.y_tilde[k] > 0.0 && log.y_tilde[k] < 1.0 && ref.y_tilde[k] > 0.0 &&
                              ref.y_tilde[k] < 1.0;
        if (interior) REQUIRE(log.y_tilde[k] - log.y[k] == doctest::Approx(ref.y_tilde[k] - ref.y[k]).scale(1e-12));
      }
    }
  }
  SUBCASE("different seeds give different patients") {
    const auto a = campaign_episode_setup(config, 0);
    config.seed = 6;
    const auto b = campaign_episode_setup(config, 0);
    CHECK(a.patient.ke0 != b.patient.ke0);
  }
}

TEST_CASE("an effect-site oracle controller tracks a constant target") {
  CampaignConfig config;
  config.n_patients = 5;
  config.keep_logs = true;
  config.env.measurement.noise_variance = 0.0;
  config.env.target_min = config.env.target_max = 0.5;

  // Drives x1 to the level whose effect-site equilibrium sits at the target.
  const auto oracle_controller = ControllerSpec::custom_controller([](const StepContext& ctx) {
    const auto& m = *ctx.true_model;
    const auto& x = ctx.true_state->x;
    const double xe_star = m.c50 * std::pow(ctx.target / (1.0 - ctx.target), 1.0 / m.gamma);
    const double x1_star = xe_star * (1.0 - m.alpha) / m.beta;
    const double free_x1 = m.a[0][0] * x[0] + m.a[0][1] * x[1] + m.a[0][2] * x[2];
    return std::clamp((x1_star - free_x1) / m.b[0], 0.0, 1.0);
  });
  const ControllerSpec specs[] = {oracle_controller, ControllerSpec::pid_controller(config.pid)};
  const auto r = run_test_campaign(specs, config);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (r.rows[i].controller != "custom") continue;
    CHECK(r.rows[i].metrics.mape < 0.1);
    // Once induced, the effect site stays on target.
    const auto& log = r.logs[i];
    for (std::size_t k = 1000; k < log.steps(); ++k)
      REQUIRE(std::abs(performance_error(log.y[k], log.target[k])) < 0.5);
  }
  const auto oracle_mape = metric_column(r.rows, "custom", &EpisodeMetrics::mape);
  const auto pid_mape = metric_column(r.rows, "pid", &EpisodeMetrics::mape);
  CHECK(median(oracle_mape) < median(pid_mape));
}

TEST_CASE("summaries") {
  std::vector<CampaignRow> rows;
  for (int id = 0; id < 3; ++id) {
    for (const char* name : {"pid", "continuous"}) {
      CampaignRow r;
      r.episode_id = id;
      r.controller = name;
      r.metrics.mape = id + (name[0] == 'p' ? 10.0 : 0.0);
      r.metrics.total_mass = 100.0 * id;
      rows.push_back(r);
    }
  }
  const auto s = summarize(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].controller == "pid");
  CHECK(s[0].median_mape == 11.0);
  CHECK(s[1].median_mape == 1.0);
  CHECK(s[1].median_total_mass == 100.0);
  CHECK(s[1].n == 3);
  CHECK(metric_column(rows, "continuous", &EpisodeMetrics::mape) == std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("policy map") {
  PolicyMapGrid grid;
  CHECK(policy_map(PolicyWeights::zeros(), grid).size() == 3 * 201 * 201);
  for (const auto& row : policy_map(PolicyWeights::zeros(), grid)) REQUIRE(row.p_infuse == 0.5);

  grid.o1_points = 11;
  grid.o2_points = 7;
  Rng rng(44);
  const auto w = PolicyWeights::initialize(rng);
  const auto rows = policy_map(w, grid);
  REQUIRE(rows.size() == 3 * 11 * 7);
  CHECK(rows.front().o1 == -0.5);
  CHECK(rows.front().o2 == -0.3);
  CHECK(rows.front().o3 == -0.1);
  CHECK(rows[1].o1 > rows[0].o1);
  CHECK(rows[11].o2 > rows[0].o2);
  CHECK(rows.back().o1 == doctest::Approx(0.5));
  CHECK(rows.back().o3 == 0.1);
  for (std::size_t i = 0; i < rows.size(); i += 13) {
    const auto p = oracle::scalar_forward(w, {rows[i].o1, rows[i].o2, rows[i].o3, grid.o4});
    CHECK(rows[i].p_infuse == doctest::Approx(p[1]).epsilon(1e-12));
  }
  grid.o3_slices.clear();
  CHECK_THROWS_AS(policy_map(w, grid), ValidationError);
}
