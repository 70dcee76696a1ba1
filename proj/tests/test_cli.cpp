#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "titrate/checkpoint.hpp"
#include "titrate/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "titrate_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(TITRATE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("no column " + name);
  }
};

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  Csv csv;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) csv.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) csv.rows.push_back(split(line));
  return csv;
}

fs::path write_small_config() {
  fs::create_directories(kWork);
  const fs::path p = kWork / "small.json";
  std::ofstream(p) << R"({"episode": {"steps": 400}, "train": {"batch_size": 4, "max_batches": 2, "seed": 3}})";
  return p;
}

}  // namespace

TEST_CASE("train writes a checkpoint and a trace") {
  const auto cfg = write_small_config();
  const auto out = kWork / "train1";
  fs::remove_all(out);
  REQUIRE(run("train --config " + cfg.string() + " --out " + out.string() + " --max-batches 1 --quiet") == 0);
  const auto ckpt = titrate::load_checkpoint(out / "checkpoint.json");
  CHECK(ckpt.weights.params.size() == 898);
  CHECK(ckpt.metadata.batches == 1);
  CHECK(read_csv(out / "trace.csv").rows.size() == 1);
  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK_FALSE(manifest.at("finished_at").is_null());

  SUBCASE("rerunning from the manifest reproduces the checkpoint byte for byte") {
    const auto again = kWork / "train2";
    fs::remove_all(again);
    REQUIRE(run("train --config " + (out / "manifest.json").string() + " --out " + again.string() +
                " --max-batches 1 --quiet") == 0);
    CHECK(slurp(out / "checkpoint.json") == slurp(again / "checkpoint.json"));
  }
}

TEST_CASE("invalid arguments exit with status 1") {
  fs::create_directories(kWork);
  const fs::path bad = kWork / "bad.json";
  std::ofstream(bad) << R"({"train": {"elite_percentile": 0}})";
  CHECK(run("train --config " + bad.string() + " --out " + (kWork / "bad").string()) == 1);
  CHECK(run("evaluate --modes continuous --out " + (kWork / "nock").string()) == 1);
  CHECK(run("simulate --targets 0.5,1.5 --out " + (kWork / "badtgt").string()) == 1);
  CHECK(run("simulate --patient age=200 --out " + (kWork / "old").string()) == 1);
  CHECK(run("no-such-command") == 1);
  CHECK(run("evaluate --checkpoint " + bad.string() + " --out " + (kWork / "badck").string()) != 0);
}

TEST_CASE("evaluate") {
  const auto cfg = write_small_config();
  const auto trained = kWork / "train_eval";
  fs::remove_all(trained);
  REQUIRE(run("train --config " + cfg.string() + " --out " + trained.string() + " --quiet") == 0);
  const auto ckpt = (trained / "checkpoint.json").string();

  SUBCASE("two deterministic episodes give two rows, repeatably") {
    const auto a = kWork / "eval_a";
    const auto b = kWork / "eval_b";
    for (const auto& d : {a, b}) {
      fs::remove_all(d);
      REQUIRE(run("evaluate --config " + cfg.string() + " --checkpoint " + ckpt +
                  " --modes deterministic --n-episodes 2 --out " + d.string()) == 0);
    }
    CHECK(read_csv(a / "metrics.csv").rows.size() == 2);
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  }
  SUBCASE("PID needs no checkpoint") {
    const auto d = kWork / "eval_pid";
    fs::remove_all(d);
    CHECK(run("evaluate --config " + cfg.string() + " --modes pid --n-episodes 3 --out " + d.string()) == 0);
    CHECK(read_csv(d / "metrics.csv").rows.size() == 3);
  }
  SUBCASE("summary medians agree with the per-episode metrics") {
    const auto d = kWork / "eval_all";
    fs::remove_all(d);
    REQUIRE(run("evaluate --config " + cfg.string() + " --checkpoint " + ckpt + " --n-episodes 5 --out " +
                d.string()) == 0);
    const auto metrics = read_csv(d / "metrics.csv");
    const auto summary = read_csv(d / "summary.csv");
    CHECK(metrics.rows.size() == 20);
    REQUIRE(summary.rows.size() == 4);
    for (const auto& srow : summary.rows) {
      const std::string name = srow[summary.col("controller")];
      std::vector<double> mape;
      for (const auto& m : metrics.rows)
        if (m[metrics.col("controller")] == name) mape.push_back(std::stod(m[metrics.col("mape")]));
      CHECK(std::stod(srow[summary.col("median_mape")]) ==
            doctest::Approx(titrate::oracle::sorted_median(mape)).epsilon(1e-12));
    }
    CHECK(fs::exists(d / "comparisons.csv"));
  }
}

TEST_CASE("simulate") {
  const auto a = kWork / "sim_a";
  const auto b = kWork / "sim_b";
  for (const auto& d : {a, b}) {
    fs::remove_all(d);
    REQUIRE(run("simulate --controller pid --seed 4 --out " + d.string()) == 0);
  }
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(read_csv(a / "trajectory.csv").rows.size() == 2000);

  SUBCASE("a zero target without noise never doses") {
    const auto d = kWork / "sim_zero";
    fs::remove_all(d);
    REQUIRE(run("simulate --controller pid --targets 0 --noise-variance 0 --out " + d.string()) == 0);
    const auto t = read_csv(d / "trajectory.csv");
    for (const auto& row : t.rows) REQUIRE(std::stod(row[t.col("action")]) == 0.0);
  }
  SUBCASE("patient overrides outside the ranges need an explicit flag") {
    const auto d = kWork / "sim_out";
    fs::remove_all(d);
    CHECK(run("simulate --patient ke0=0.9 --out " + d.string()) == 1);
    CHECK(run("simulate --patient ke0=0.9 --allow-out-of-range --out " + d.string()) == 0);
  }
}

TEST_CASE("policy-map") {
  fs::create_directories(kWork);
  const auto zeros = kWork / "zeros.json";
  titrate::save_checkpoint(zeros, {titrate::PolicyWeights::zeros(), {}});
  const auto d = kWork / "map_zero";
  fs::remove_all(d);
  REQUIRE(run("policy-map --checkpoint " + zeros.string() + " --out " + d.string()) == 0);
  const auto csv = read_csv(d / "policy_map.csv");
  CHECK(csv.rows.size() == 3 * 201 * 201);
  for (const auto& row : csv.rows) REQUIRE(std::stod(row[csv.col("p_infuse")]) == 0.5);

  SUBCASE("grid overrides and spot values") {
    titrate::Rng rng(6);
    const auto w = titrate::PolicyWeights::initialize(rng);
    const auto random = kWork / "random.json";
    titrate::save_checkpoint(random, {w, {}});
    const auto m = kWork / "map_small";
    fs::remove_all(m);
    REQUIRE(run("policy-map --checkpoint " + random.string() + " --grid o1_points=5 --grid o2_points=3 --grid "
                "'o3_slices=0;0.2' --grid o4=0.4 --out " + m.string()) == 0);
    const auto small = read_csv(m / "policy_map.csv");
    REQUIRE(small.rows.size() == 2 * 5 * 3);
    for (const auto& row : small.rows) {
      const titrate::Observation o{std::stod(row[0]), std::stod(row[1]), std::stod(row[2]), std::stod(row[3])};
      CHECK(o[3] == 0.4);
      CHECK(std::stod(row[4]) == doctest::Approx(titrate::oracle::scalar_forward(w, o)[1]).epsilon(1e-12));
    }
  }
}
