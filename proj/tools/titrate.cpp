// titrate: train, evaluate and inspect closed-loop propofol controllers.
//
//   titrate train      --config cfg.json --out runs/a
//   titrate evaluate   --checkpoint runs/a/checkpoint.json --n-episodes 100 --out runs/a/eval
//   titrate simulate   --controller pid --patient age=60 --targets 0.5 --out runs/sim
//   titrate policy-map --checkpoint runs/a/checkpoint.json --grid o1_points=101 --out runs/map
//
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "titrate/checkpoint.hpp"
#include "titrate/config.hpp"
#include "titrate/csv.hpp"
#include "titrate/errors.hpp"
#include "titrate/eval.hpp"
#include "titrate/schnider.hpp"
#include "titrate/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace titrate;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// A manifest's "config" section is a full config, so a manifest can be passed
// back through --config to reproduce a run.
WorkbenchConfig read_config(const std::string& path) {
  if (path.empty()) return WorkbenchConfig{};
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  if (doc.contains("manifest_version") && doc.contains("config")) doc = doc.at("config");
  return config_from_json(doc);
}

void prepare_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ValidationError("cannot create output directory " + out.string());
  const fs::path probe = out / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ValidationError("output directory " + out.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

struct Manifest {
  json doc;
  fs::path path;

  void write() const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest " + path.string());
    f << doc.dump(2) << '\n';
  }
};

Manifest start_manifest(const std::string& command, const WorkbenchConfig& cfg, std::uint64_t seed,
                        const std::string& checkpoint, const fs::path& out, int argc, char** argv) {
  Manifest m;
  m.path = out / "manifest.json";
  std::vector<std::string> args(argv, argv + argc);
  m.doc = {{"manifest_version", 1},
           {"tool", "titrate"},
           {"tool_version", kToolVersion},
           {"pk_constants", schnider::kVersion},
           {"command", command},
           {"argv", args},
           {"seed", seed},
           {"checkpoint", checkpoint},
           {"output_dir", out.string()},
           {"config", config_to_json(cfg)},
           {"started_at", utc_now()},
           {"finished_at", nullptr}};
  m.write();
  return m;
}

void finish_manifest(Manifest& m) {
  m.doc["finished_at"] = utc_now();
  m.write();
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  fn(f);
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> split_modes(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

void apply_grid_overrides(PolicyMapGrid& grid, const std::vector<std::string>& items) {
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("grid override '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "o1_min") grid.o1_min = std::stod(value);
      else if (key == "o1_max") grid.o1_max = std::stod(value);
      else if (key == "o1_points") grid.o1_points = std::stoi(value);
      else if (key == "o2_min") grid.o2_min = std::stod(value);
      else if (key == "o2_max") grid.o2_max = std::stod(value);
      else if (key == "o2_points") grid.o2_points = std::stoi(value);
      else if (key == "o4") grid.o4 = std::stod(value);
      else if (key == "o3_slices") {
        grid.o3_slices.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ';')) grid.o3_slices.push_back(std::stod(tok));
      } else {
        throw ValidationError("unknown grid key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ValidationError*>(&e)) throw;
      throw ValidationError("grid override '" + item + "' has a bad value");
    }
  }
}

Checkpoint require_checkpoint(const std::string& path) {
  if (path.empty()) throw ValidationError("--checkpoint is required");
  return load_checkpoint(path);
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out = "titrate-train";
  std::optional<std::uint64_t> seed;
  std::optional<int> max_batches;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, int argc, char** argv) {
  WorkbenchConfig cfg = read_config(a.config);
  if (a.seed) cfg.train.master_seed = *a.seed;
  if (a.max_batches) cfg.train.max_batches = *a.max_batches;
  cfg.validate();

  const fs::path out(a.out);
  prepare_out_dir(out);
  fs::create_directories(out / "checkpoints");
  Manifest manifest =
      start_manifest("train", cfg, cfg.train.master_seed, (out / "checkpoint.json").string(), out, argc, argv);

  std::ofstream trace_file(out / "trace.csv");
  if (!trace_file) throw std::runtime_error("cannot write trace.csv");
  trace_file << "batch_index,mean_reward,loss\n" << std::setprecision(17);

  TrainCallbacks cb;
  cb.on_batch = [&](const TraceRow& row) {
    trace_file << row.batch << ',' << row.mean_reward << ',' << row.loss << '\n';
    if (!a.quiet && (row.batch + 1) % 100 == 0)
      std::cerr << "batch " << row.batch + 1 << "  mean reward " << row.mean_reward << "  loss " << row.loss << '\n';
  };
  cb.on_checkpoint = [&](int done, const PolicyWeights& w, double mean_reward) {
    std::ostringstream name;
    name << "checkpoint_" << std::setw(6) << std::setfill('0') << done << ".json";
    save_checkpoint(out / "checkpoints" / name.str(), {w, {done, mean_reward, cfg.train.master_seed}});
    trace_file.flush();
  };

  TrainResult result;
  try {
    result = train(cfg.train, cb);
  } catch (const TrainingAborted& e) {
    const auto& partial = e.partial();
    save_checkpoint(out / "checkpoint_aborted.json",
                    {partial.weights, {partial.batches, std::nullopt, cfg.train.master_seed}});
    throw;
  }
  std::optional<double> final_reward;
  if (!result.trace.empty()) final_reward = result.trace.back().mean_reward;
  save_checkpoint(out / "checkpoint.json", {result.weights, {result.batches, final_reward, cfg.train.master_seed}});
  finish_manifest(manifest);

  std::cout << "trained " << result.batches << " batches";
  if (final_reward) std::cout << ", final mean reward " << *final_reward;
  std::cout << "\ncheckpoint: " << (out / "checkpoint.json").string() << '\n';
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string config;
  std::string checkpoint;
  std::string out = "titrate-eval";
  std::optional<std::uint64_t> seed;
  std::optional<int> n_episodes;
  std::vector<std::string> modes;
};

int cmd_evaluate(const EvaluateArgs& a, int argc, char** argv) {
  WorkbenchConfig cfg = read_config(a.config);
  if (a.seed) cfg.eval_seed = *a.seed;
  if (a.n_episodes) cfg.eval_patients = *a.n_episodes;
  if (!a.modes.empty()) cfg.eval_modes = split_modes(a.modes);
  cfg.validate();

  std::optional<Checkpoint> ckpt;
  const bool needs_policy = std::any_of(cfg.eval_modes.begin(), cfg.eval_modes.end(),
                                        [](const std::string& m) { return m != "pid"; });
  if (needs_policy || !a.checkpoint.empty()) ckpt = require_checkpoint(a.checkpoint);

  const fs::path out(a.out);
  prepare_out_dir(out);
  Manifest manifest = start_manifest("evaluate", cfg, cfg.eval_seed, a.checkpoint, out, argc, argv);

  const CampaignConfig campaign = cfg.campaign();
  const CampaignResult result = run_test_campaign(ckpt ? &ckpt->weights : nullptr, cfg.eval_modes, campaign);
  write_file(out / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, result.rows); });

  const auto summary = summarize(result.rows);
  write_file(out / "summary.csv", [&](std::ostream& os) {
    os << std::setprecision(17)
       << "controller,n,median_mape,median_mpe,median_oob,median_induction_mg,median_maintenance_mg_min,"
          "median_total_mg\n";
    for (const auto& s : summary)
      os << s.controller << ',' << s.n << ',' << s.median_mape << ',' << s.median_mpe << ',' << s.median_oob << ','
         << s.median_induction_mass << ',' << s.median_maintenance_rate << ',' << s.median_total_mass << '\n';
  });

  std::cout << std::fixed << std::setprecision(3);
  std::cout << "controller       n   MAPE%    MPE%    OOB%  induction_mg  maint_mg/min  total_mg\n";
  for (const auto& s : summary) {
    std::cout << std::left << std::setw(14) << s.controller << std::right << std::setw(5) << s.n << std::setw(8)
              << s.median_mape << std::setw(8) << s.median_mpe << std::setw(8) << s.median_oob << std::setw(14)
              << s.median_induction_mass << std::setw(14) << s.median_maintenance_rate << std::setw(10)
              << s.median_total_mass << '\n';
  }

  // Pairwise two-sided paired t-tests on per-episode MAPE and MPE.
  if (campaign.n_patients >= 2) {
    write_file(out / "comparisons.csv", [&](std::ostream& os) {
      os << std::setprecision(17) << "metric,controller_a,controller_b,n,mean_difference,t,p_value\n";
      for (std::size_t i = 0; i < summary.size(); ++i) {
        for (std::size_t j = i + 1; j < summary.size(); ++j) {
          for (auto [name, field] : {std::pair{"mape", &EpisodeMetrics::mape}, std::pair{"mpe", &EpisodeMetrics::mpe}}) {
            const auto a_col = metric_column(result.rows, summary[i].controller, field);
            const auto b_col = metric_column(result.rows, summary[j].controller, field);
            os << name << ',' << summary[i].controller << ',' << summary[j].controller << ',' << a_col.size() << ',';
            try {
              const auto r = paired_t_test(a_col, b_col);
              os << r.mean_difference << ',' << r.t << ',' << r.p_value << '\n';
            } catch (const DegenerateError&) {
              os << "0,nan,nan\n";
            }
          }
        }
      }
    });
  }
  finish_manifest(manifest);
  std::cout << "metrics: " << (out / "metrics.csv").string() << '\n';
  return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string checkpoint;
  std::string controller = "pid";
  std::string out = "titrate-sim";
  std::uint64_t seed = 0;
  std::vector<std::string> patient;
  std::vector<double> targets;
  std::optional<double> noise_variance;
  bool allow_out_of_range = false;
};

int cmd_simulate(const SimulateArgs& a, int argc, char** argv) {
  WorkbenchConfig cfg = read_config(a.config);
  if (a.noise_variance) cfg.env().measurement.noise_variance = *a.noise_variance;
  cfg.validate();
  const EnvironmentConfig& env = cfg.env();

  const PatientParams patient = apply_patient_overrides(env.ranges.generic(), a.patient);
  if (!a.allow_out_of_range && !within_ranges(patient, env.ranges))
    throw ValidationError("patient lies outside the configured parameter ranges (use --allow-out-of-range)");
  // Surfaces non-physical demographics as a ParameterError before any output.
  (void)build_discrete_model(patient, env.model);

  std::vector<double> schedule;
  if (a.targets.empty()) {
    Rng rng = make_rng(a.seed, {stream::kEnvironment});
    schedule = generate_episode_targets(rng, env);
  } else {
    const auto k = static_cast<std::size_t>(env.episode_steps);
    const std::size_t segments = a.targets.size();
    if (k % segments != 0) throw ValidationError("episode steps must be divisible by the number of targets");
    for (double t : a.targets) {
      if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("targets must lie in [0, 1]");
      schedule.insert(schedule.end(), k / segments, t);
    }
  }

  std::optional<Checkpoint> ckpt;
  if (a.controller != "pid") ckpt = require_checkpoint(a.checkpoint);
  const ControllerSpec controller = controller_from_name(a.controller, ckpt ? &ckpt->weights : nullptr, cfg.pid);

  const fs::path out(a.out);
  prepare_out_dir(out);
  Manifest manifest = start_manifest("simulate", cfg, a.seed, a.checkpoint, out, argc, argv);
  manifest.doc["controller"] = a.controller;
  manifest.doc["patient"] = {{"age", patient.demographics.age},       {"height", patient.demographics.height},
                             {"weight", patient.demographics.weight}, {"sex", to_string(patient.demographics.sex)},
                             {"ke0", patient.ke0},                    {"gamma", patient.gamma},
                             {"c50", patient.c50}};
  manifest.doc["targets"] = a.targets;
  manifest.write();

  const EpisodeSetup setup = make_episode_setup(patient, std::move(schedule), env);
  const EpisodeSeeds seeds{derive_seed(a.seed, {stream::kNoise}), derive_seed(a.seed, {stream::kAction})};
  const EpisodeLog log = run_episode(setup, controller, seeds);
  write_file(out / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, log, env.model.delta_t); });
  finish_manifest(manifest);

  std::cout << "reward " << log.reward << '\n';
  bool positive_targets = std::all_of(log.target.begin(), log.target.end(), [](double t) { return t > 0.0; });
  if (positive_targets) {
    const EpisodeMetrics m = episode_metrics(log, env.model.delta_t);
    std::cout << std::fixed << std::setprecision(3) << "MAPE " << m.mape << "%  MPE " << m.mpe << "%  OOB "
              << m.oob_fraction << "%  induction " << m.induction_mass << " mg  maintenance " << m.maintenance_rate
              << " mg/min  total " << m.total_mass << " mg\n";
  } else {
    double total = 0.0;
    for (double v : log.mass_mg) total += v;
    std::cout << "total " << total << " mg\n";
  }
  std::cout << "trajectory: " << (out / "trajectory.csv").string() << '\n';
  return 0;
}

// ---- policy-map ------------------------------------------------------------

struct PolicyMapArgs {
  std::string config;
  std::string checkpoint;
  std::string out = "titrate-map";
  std::vector<std::string> grid;
};

int cmd_policy_map(const PolicyMapArgs& a, int argc, char** argv) {
  WorkbenchConfig cfg = read_config(a.config);
  apply_grid_overrides(cfg.grid, a.grid);
  cfg.validate();
  const Checkpoint ckpt = require_checkpoint(a.checkpoint);

  const fs::path out(a.out);
  prepare_out_dir(out);
  Manifest manifest = start_manifest("policy-map", cfg, 0, a.checkpoint, out, argc, argv);
  const auto rows = policy_map(ckpt.weights, cfg.grid);
  write_file(out / "policy_map.csv", [&](std::ostream& os) { write_policy_map_csv(os, rows, cfg.grid.o4); });
  finish_manifest(manifest);
  std::cout << rows.size() << " rows: " << (out / "policy_map.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop propofol dosing workbench: cross-entropy RL agent vs PID"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a policy with the cross-entropy method");
  train_cmd->add_option("--config", train_args.config, "JSON config (or a run manifest)");
  train_cmd->add_option("--out", train_args.out, "Output directory");
  train_cmd->add_option("--seed", train_args.seed, "Master seed (overrides train.seed)");
  train_cmd->add_option("--max-batches", train_args.max_batches, "Overrides train.max_batches");
  train_cmd->add_flag("--quiet", train_args.quiet, "No progress output");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Paired test campaign: RL modes and PID on shared patients");
  eval_cmd->add_option("--config", eval_args.config, "JSON config (or a run manifest)");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Policy checkpoint");
  eval_cmd->add_option("--out", eval_args.out, "Output directory");
  eval_cmd->add_option("--seed", eval_args.seed, "Campaign seed (overrides evaluate.seed)");
  eval_cmd->add_option("--n-episodes", eval_args.n_episodes, "Number of test patients");
  eval_cmd->add_option("--modes", eval_args.modes, "Comma list of stochastic,deterministic,continuous,pid");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "One logged episode for a single patient");
  sim_cmd->add_option("--config", sim_args.config, "JSON config (or a run manifest)");
  sim_cmd->add_option("--checkpoint", sim_args.checkpoint, "Policy checkpoint (RL controllers)");
  sim_cmd->add_option("--controller", sim_args.controller, "pid|stochastic|deterministic|continuous");
  sim_cmd->add_option("--out", sim_args.out, "Output directory");
  sim_cmd->add_option("--seed", sim_args.seed, "Seed for noise, actions and sampled targets");
  sim_cmd->add_option("--patient", sim_args.patient, "key=value overrides of the generic patient");
  sim_cmd->add_option("--targets", sim_args.targets, "Target LoU per equal-length segment")->delimiter(',');
  sim_cmd->add_option("--noise-variance", sim_args.noise_variance, "Measurement noise variance");
  sim_cmd->add_flag("--allow-out-of-range", sim_args.allow_out_of_range, "Accept patients outside the ranges");

  PolicyMapArgs map_args;
  auto* map_cmd = app.add_subcommand("policy-map", "Export p(infuse) over an (o1, o2) grid per o3 slice");
  map_cmd->add_option("--config", map_args.config, "JSON config (or a run manifest)");
  map_cmd->add_option("--checkpoint", map_args.checkpoint, "Policy checkpoint");
  map_cmd->add_option("--out", map_args.out, "Output directory");
  map_cmd->add_option("--grid", map_args.grid, "key=value grid overrides (o3_slices uses ';')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, argc, argv);
    if (*eval_cmd) return cmd_evaluate(eval_args, argc, argv);
    if (*sim_cmd) return cmd_simulate(sim_args, argc, argv);
    if (*map_cmd) return cmd_policy_map(map_args, argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
