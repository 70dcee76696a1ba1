// Serial reference vs OpenMP kernels: episode rollouts, the elite loss and
// gradient, and the paired test campaign.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "titrate/eval.hpp"
#include "titrate/trainer.hpp"

using namespace titrate;

namespace {

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const std::string& name, double serial, double parallel) {
  std::printf("%-22s %10.2f %10.2f %8.2fx\n", name.c_str(), 1e3 * serial, 1e3 * parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark serial and OpenMP kernels"};
  int episodes = 64;
  int patients = 64;
  int reps = 3;
  app.add_option("--episodes", episodes, "Episodes per rollout batch");
  app.add_option("--patients", patients, "Campaign patients");
  app.add_option("--reps", reps, "Repetitions (best time is reported)");
  CLI11_PARSE(app, argc, argv);

  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  EnvironmentConfig env;
  Rng rng(1);
  const auto setup = make_episode_setup(sample_patient(rng, env.ranges), generate_episode_targets(rng, env), env);
  const auto weights = PolicyWeights::initialize(rng);
  const auto controller = ControllerSpec::policy(weights, ActionMode::stochastic);
  std::vector<EpisodeSeeds> seeds;
  for (int i = 0; i < episodes; ++i) seeds.push_back({derive_seed(7, {1, std::uint64_t(i)}), derive_seed(7, {2, std::uint64_t(i)})});

  std::vector<EpisodeLog> logs;
  const double roll_s = best_of(reps, [&] { logs = run_episodes_serial(setup, controller, seeds); });
  const double roll_p = best_of(reps, [&] { logs = run_episodes_parallel(setup, controller, seeds); });
  row("episode rollout", roll_s, roll_p);

  std::vector<const EpisodeLog*> elite;
  for (const auto& l : logs) elite.push_back(&l);
  const double loss_s = best_of(reps, [&] { (void)cross_entropy_loss_serial(elite, weights); });
  const double loss_p = best_of(reps, [&] { (void)cross_entropy_loss(elite, weights); });
  row("loss + gradient", loss_s, loss_p);

  CampaignConfig cc;
  cc.n_patients = patients;
  std::vector<ControllerSpec> specs;
  for (const char* m : {"stochastic", "deterministic", "continuous", "pid"})
    specs.push_back(controller_from_name(m, &weights, cc.pid));
  const double camp_s = best_of(reps, [&] { (void)run_test_campaign_serial(specs, cc); });
  const double camp_p = best_of(reps, [&] { (void)run_test_campaign(specs, cc); });
  row("test campaign", camp_s, camp_p);
  return 0;
}
