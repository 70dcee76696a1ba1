#include "titrate/config.hpp"

#include <fstream>
#include <set>

#include "titrate/errors.hpp"

namespace titrate {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("'" + where + "' must be an object");
  for (const auto& [key, _] : obj.items())
    if (!known.contains(key)) throw ValidationError("unknown key '" + key + "' in '" + where + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("bad value for '" + where + "." + key + "': " + e.what());
  }
}

Sex parse_sex(const std::string& s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  throw ValidationError("sex must be 'male' or 'female', got '" + s + "'");
}

void read_range(const json& patient, const char* key, ParamRange& r) {
  if (!patient.contains(key)) return;
  const json& obj = patient.at(key);
  const std::string where = std::string("patient.") + key;
  reject_unknown(obj, {"generic", "min", "max"}, where);
  read(obj, "generic", r.generic, where);
  read(obj, "min", r.min, where);
  read(obj, "max", r.max, where);
}

json range_json(const ParamRange& r) { return {{"generic", r.generic}, {"min", r.min}, {"max", r.max}}; }

}  // namespace

std::string to_string(Sex s) { return s == Sex::male ? "male" : "female"; }

std::string to_string(LinkBeta b) { return b == LinkBeta::per_second ? "per_second" : "steady_state"; }

std::string to_string(Discretization d) { return d == Discretization::exact ? "exact" : "euler"; }

CampaignConfig WorkbenchConfig::campaign() const {
  CampaignConfig c;
  c.env = env();
  c.n_patients = eval_patients;
  c.seed = eval_seed;
  c.pid = pid;
  return c;
}

void WorkbenchConfig::validate() const {
  train.validate();
  pid.validate();
  if (eval_patients < 1) throw ValidationError("evaluate.n_patients must be >= 1");
  if (eval_modes.empty()) throw ValidationError("evaluate.modes must not be empty");
  for (const auto& m : eval_modes)
    if (m != "stochastic" && m != "deterministic" && m != "continuous" && m != "pid")
      throw ValidationError("unknown evaluate mode '" + m + "'");
  grid.validate();
}

WorkbenchConfig config_from_json(const json& doc) {
  WorkbenchConfig cfg;
  reject_unknown(doc, {"patient", "model", "measurement", "episode", "train", "pid", "evaluate", "policy_map"},
                 "config");
  EnvironmentConfig& env = cfg.env();

  if (doc.contains("patient")) {
    const json& p = doc.at("patient");
    reject_unknown(p, {"height", "weight", "age", "ke0", "gamma", "c50", "generic_sex", "female_probability"},
                   "patient");
    read_range(p, "height", env.ranges.height);
    read_range(p, "weight", env.ranges.weight);
    read_range(p, "age", env.ranges.age);
    read_range(p, "ke0", env.ranges.ke0);
    read_range(p, "gamma", env.ranges.gamma);
    read_range(p, "c50", env.ranges.c50);
    std::string sex = to_string(env.ranges.generic_sex);
    read(p, "generic_sex", sex, "patient");
    env.ranges.generic_sex = parse_sex(sex);
    read(p, "female_probability", env.ranges.female_probability, "patient");
  }
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown(m, {"delta_t", "infusion_rate", "link_beta", "discretization", "euler_substeps"}, "model");
    read(m, "delta_t", env.model.delta_t, "model");
    read(m, "infusion_rate", env.model.infusion_rate, "model");
    std::string beta = to_string(env.model.link_beta);
    read(m, "link_beta", beta, "model");
    if (beta == "per_second") {
      env.model.link_beta = LinkBeta::per_second;
    } else if (beta == "steady_state") {
      env.model.link_beta = LinkBeta::steady_state;
    } else {
      throw ValidationError("model.link_beta must be 'per_second' or 'steady_state'");
    }
    std::string disc = to_string(env.model.discretization);
    read(m, "discretization", disc, "model");
    if (disc == "exact") {
      env.model.discretization = Discretization::exact;
    } else if (disc == "euler") {
      env.model.discretization = Discretization::euler;
    } else {
      throw ValidationError("model.discretization must be 'exact' or 'euler'");
    }
    read(m, "euler_substeps", env.model.euler_substeps, "model");
  }
  if (doc.contains("measurement")) {
    const json& m = doc.at("measurement");
    reject_unknown(m, {"noise_variance"}, "measurement");
    read(m, "noise_variance", env.measurement.noise_variance, "measurement");
  }
  if (doc.contains("episode")) {
    const json& e = doc.at("episode");
    reject_unknown(e, {"steps", "targets_per_episode", "target_min", "target_max"}, "episode");
    read(e, "steps", env.episode_steps, "episode");
    read(e, "targets_per_episode", env.targets_per_episode, "episode");
    read(e, "target_min", env.target_min, "episode");
    read(e, "target_max", env.target_max, "episode");
  }
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    reject_unknown(t,
                   {"batch_size", "elite_percentile", "max_batches", "min_mean_reward", "learning_rate",
                    "final_learning_rate", "seed", "checkpoint_every"},
                   "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
    read(t, "elite_percentile", cfg.train.elite_percentile, "train");
    read(t, "max_batches", cfg.train.max_batches, "train");
    if (t.contains("min_mean_reward") && !t.at("min_mean_reward").is_null()) {
      double v = 0.0;
      read(t, "min_mean_reward", v, "train");
      cfg.train.min_mean_reward = v;
    }
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    if (t.contains("final_learning_rate")) {
      if (t.at("final_learning_rate").is_null()) {
        cfg.train.final_learning_rate.reset();
      } else {
        double v = 0.0;
        read(t, "final_learning_rate", v, "train");
        cfg.train.final_learning_rate = v;
      }
    }
    read(t, "seed", cfg.train.master_seed, "train");
    read(t, "checkpoint_every", cfg.train.checkpoint_every, "train");
  }
  if (doc.contains("pid")) {
    const json& p = doc.at("pid");
    reject_unknown(p, {"kp", "ki", "kd", "integral_clamp"}, "pid");
    read(p, "kp", cfg.pid.kp, "pid");
    read(p, "ki", cfg.pid.ki, "pid");
    read(p, "kd", cfg.pid.kd, "pid");
    if (p.contains("integral_clamp") && !p.at("integral_clamp").is_null()) {
      std::vector<double> bounds;
      read(p, "integral_clamp", bounds, "pid");
      if (bounds.size() != 2) throw ValidationError("pid.integral_clamp must be [lo, hi]");
      cfg.pid.integral_clamp = std::pair{bounds[0], bounds[1]};
    }
  }
  if (doc.contains("evaluate")) {
    const json& e = doc.at("evaluate");
    reject_unknown(e, {"n_patients", "seed", "modes"}, "evaluate");
    read(e, "n_patients", cfg.eval_patients, "evaluate");
    read(e, "seed", cfg.eval_seed, "evaluate");
    read(e, "modes", cfg.eval_modes, "evaluate");
  }
  if (doc.contains("policy_map")) {
    const json& g = doc.at("policy_map");
    reject_unknown(g, {"o1_min", "o1_max", "o1_points", "o2_min", "o2_max", "o2_points", "o3_slices", "o4"},
                   "policy_map");
    read(g, "o1_min", cfg.grid.o1_min, "policy_map");
    read(g, "o1_max", cfg.grid.o1_max, "policy_map");
    read(g, "o1_points", cfg.grid.o1_points, "policy_map");
    read(g, "o2_min", cfg.grid.o2_min, "policy_map");
    read(g, "o2_max", cfg.grid.o2_max, "policy_map");
    read(g, "o2_points", cfg.grid.o2_points, "policy_map");
    read(g, "o3_slices", cfg.grid.o3_slices, "policy_map");
    read(g, "o4", cfg.grid.o4, "policy_map");
  }
  return cfg;
}

json config_to_json(const WorkbenchConfig& cfg) {
  const EnvironmentConfig& env = cfg.env();
  json doc;
  doc["patient"] = {{"height", range_json(env.ranges.height)},
                    {"weight", range_json(env.ranges.weight)},
                    {"age", range_json(env.ranges.age)},
                    {"ke0", range_json(env.ranges.ke0)},
                    {"gamma", range_json(env.ranges.gamma)},
                    {"c50", range_json(env.ranges.c50)},
                    {"generic_sex", to_string(env.ranges.generic_sex)},
                    {"female_probability", env.ranges.female_probability}};
  doc["model"] = {{"delta_t", env.model.delta_t},
                  {"infusion_rate", env.model.infusion_rate},
                  {"link_beta", to_string(env.model.link_beta)},
                  {"discretization", to_string(env.model.discretization)},
                  {"euler_substeps", env.model.euler_substeps}};
  doc["measurement"] = {{"noise_variance", env.measurement.noise_variance}};
  doc["episode"] = {{"steps", env.episode_steps},
                    {"targets_per_episode", env.targets_per_episode},
                    {"target_min", env.target_min},
                    {"target_max", env.target_max}};
  doc["train"] = {{"batch_size", cfg.train.batch_size},
                  {"elite_percentile", cfg.train.elite_percentile},
                  {"max_batches", cfg.train.max_batches},
                  {"min_mean_reward", cfg.train.min_mean_reward ? json(*cfg.train.min_mean_reward) : json(nullptr)},
                  {"learning_rate", cfg.train.learning_rate},
                  {"final_learning_rate",
                   cfg.train.final_learning_rate ? json(*cfg.train.final_learning_rate) : json(nullptr)},
                  {"seed", cfg.train.master_seed},
                  {"checkpoint_every", cfg.train.checkpoint_every}};
  json clamp = nullptr;
  if (cfg.pid.integral_clamp) clamp = {cfg.pid.integral_clamp->first, cfg.pid.integral_clamp->second};
  doc["pid"] = {{"kp", cfg.pid.kp}, {"ki", cfg.pid.ki}, {"kd", cfg.pid.kd}, {"integral_clamp", clamp}};
  doc["evaluate"] = {{"n_patients", cfg.eval_patients}, {"seed", cfg.eval_seed}, {"modes", cfg.eval_modes}};
  doc["policy_map"] = {{"o1_min", cfg.grid.o1_min},       {"o1_max", cfg.grid.o1_max},
                       {"o1_points", cfg.grid.o1_points}, {"o2_min", cfg.grid.o2_min},
                       {"o2_max", cfg.grid.o2_max},       {"o2_points", cfg.grid.o2_points},
                       {"o3_slices", cfg.grid.o3_slices}, {"o4", cfg.grid.o4}};
  return doc;
}

WorkbenchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  WorkbenchConfig cfg = config_from_json(doc);
  cfg.validate();
  return cfg;
}

PatientParams apply_patient_overrides(PatientParams base, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("patient override '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "sex") {
      base.demographics.sex = parse_sex(value);
      continue;
    }
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ValidationError("patient override '" + item + "' has a non-numeric value");
    }
    if (key == "age") {
      base.demographics.age = v;
    } else if (key == "height") {
      base.demographics.height = v;
    } else if (key == "weight") {
      base.demographics.weight = v;
    } else if (key == "ke0") {
      base.ke0 = v;
    } else if (key == "gamma") {
      base.gamma = v;
    } else if (key == "c50") {
      base.c50 = v;
    } else {
      throw ValidationError("unknown patient key '" + key + "'");
    }
  }
  return base;
}

bool within_ranges(const PatientParams& p, const PatientRanges& r) {
  auto in = [](double v, const ParamRange& range) { return v >= range.min && v <= range.max; };
  return in(p.demographics.age, r.age) && in(p.demographics.height, r.height) &&
         in(p.demographics.weight, r.weight) && in(p.ke0, r.ke0) && in(p.gamma, r.gamma) && in(p.c50, r.c50);
}

}  // namespace titrate
