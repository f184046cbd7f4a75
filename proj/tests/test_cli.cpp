#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <catch_amalgamated.hpp>

namespace fs = std::filesystem;

namespace {

const std::string cli = QSIZE_CLI_PATH;
const std::string configs = QSIZE_CONFIG_DIR;

struct Run {
  int code;
  std::string err;
};

Run run(const std::string& args, const fs::path& out) {
  fs::create_directories(out);
  const fs::path err = out / "stderr.txt";
  const std::string cmd = cli + " " + args + " --out " + out.string() + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "qsize_cli_test" / name;
  fs::remove_all(p);
  return p;
}

fs::path sim_config() {
  const fs::path p = fs::temp_directory_path() / "qsize_cli_sim.json";
  std::ofstream(p) << R"({
  "queues": [
    {"id": "q", "arrival": {"type": "mix_exp", "weights": [0.5, 0.5], "rates": [3.0, 9.0]},
     "patience": {"type": "trunc_mix_exp", "weights": [1.0], "rates": [1.5], "bound": 25}}
  ],
  "r": 6,
  "simulation": {"samples": 20000, "burn_in": 1000, "seed": 1}
})";
  return p;
}

}  // namespace

TEST_CASE("exit codes") {
  const fs::path dir = scratch("ok");
  const Run ok = run("optimize --config " + configs + "/optimize.json", dir);
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "solution.json"));

  const Run bad = run("optimize --config " + configs + "/malformed.json", scratch("bad"));
  CHECK(bad.code == 1);
  CHECK(bad.err.find("line 4") != std::string::npos);

  const Run inf = run("optimize --config " + configs + "/infeasible.json", scratch("inf"));
  CHECK(inf.code == 2);
  CHECK(inf.err.find("infeasible") != std::string::npos);

  CHECK(run("evaluate", scratch("missing")).code == 1);
  CHECK(run("nonsense", scratch("nonsense")).code == 1);
}

TEST_CASE("seed override drives simulation output") {
  const fs::path cfg = sim_config();
  const fs::path a = scratch("seed_a"), b = scratch("seed_b"), c = scratch("seed_c");
  REQUIRE(run("simulate --seed 3 --config " + cfg.string(), a).code == 0);
  REQUIRE(run("simulate --seed 3 --config " + cfg.string(), b).code == 0);
  REQUIRE(run("simulate --seed 4 --config " + cfg.string(), c).code == 0);
  CHECK(slurp(a / "simulate.csv") == slurp(b / "simulate.csv"));
  CHECK(slurp(a / "simulate.csv") != slurp(c / "simulate.csv"));
}

TEST_CASE("study outputs do not depend on the thread count") {
  const fs::path one = scratch("threads_1"), four = scratch("threads_4");
  const std::string args = "study --config " + configs + "/study_eval.json --r 6";
  REQUIRE(run(args + " --threads 1", one).code == 0);
  REQUIRE(run(args + " --threads 4", four).code == 0);
  for (const char* f : {"eval_error.csv", "eval_bands.csv", "eval_queues.csv"}) {
    INFO(f);
    CHECK(slurp(one / f) == slurp(four / f));
    CHECK_FALSE(slurp(one / f).empty());
  }
}
