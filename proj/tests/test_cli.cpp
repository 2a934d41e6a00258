#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "awrb/model_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("AWRB_CLI");
  return p ? p : "awrb";
}

const fs::path& workdir() {
  static const fs::path d = [] {
    const fs::path p = fs::temp_directory_path() / ("awrb_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  const fs::path o = workdir() / "stdout.txt", e = workdir() / "stderr.txt";
  const std::string cmd = cli() + " " + args + " > " + o.string() + " 2> " + e.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

// A converged thermal model at levels (3, 3), trained once.
const fs::path& trained() {
  static const fs::path dir = [] {
    const fs::path d = workdir() / "train";
    const auto r = run("train -p thermal-block -L 3 3 --tol 1e-2 --keep-snapshots -q -o " + d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("train writes the model, trace and run manifest") {
  const fs::path& d = trained();
  CHECK(fs::exists(d / "model.awrb"));
  CHECK(fs::exists(d / "trace.csv"));
  CHECK(fs::exists(d / "trace.json"));
  const auto run_json = nlohmann::json::parse(slurp(d / "run.json"));
  CHECK(run_json.at("converged").get<bool>());
  CHECK(run_json.at("problem") == "thermal-block");
  const std::size_t N = run_json.at("N");
  CHECK(N > 0);
  const auto m = awrb::load_model((d / "model.awrb").string());
  CHECK(m.N() == N);
  CHECK(m.snapshots.size() == N);
  std::istringstream csv(slurp(d / "trace.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("N,mu1,mu2,max_estimator,ratio", 0) == 0);
}

TEST_CASE("unconverged training has its own exit code") {
  const auto r = run("train -p thermal-block -L 3 3 --tol 1e-8 --nmax 1 -q -o " + (workdir() / "short").string());
  CHECK(r.code == 3);
  const auto run_json = nlohmann::json::parse(slurp(workdir() / "short" / "run.json"));
  CHECK_FALSE(run_json.at("converged").get<bool>());
  CHECK(run_json.at("stop_reason") == "N_max");
}

TEST_CASE("evaluate prints reduced coefficients and estimates") {
  const std::string model = (trained() / "model.awrb").string();
  const auto r = run("evaluate -m " + model + " --mu 0.5,3 --mu 2,7");
  REQUIRE(r.code == 0);
  std::istringstream csv(r.out);
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("mu1,mu2,u1,", 0) == 0);
  CHECK(line.find("estimator,seconds") != std::string::npos);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 2);
}

TEST_CASE("evaluate rejects malformed and out-of-box parameters") {
  const std::string model = (trained() / "model.awrb").string();
  CHECK(run("evaluate -m " + model + " --mu 0.5,abc").code == 2);
  CHECK(run("evaluate -m " + model + " --mu 0.5").code == 2);
  CHECK(run("evaluate -m " + model + " --strict --mu 500,3").code != 0);
  CHECK(run("evaluate -m " + model + " --mu 500,3").code == 0);  // warning only
  CHECK(run("evaluate -m " + (workdir() / "missing.awrb").string() + " --mu 1,1").code == 1);
}

TEST_CASE("sweep reports test-set statistics") {
  const std::string model = (trained() / "model.awrb").string();
  const auto r = run("sweep -m " + model + " --all-prefixes --threads 2");
  REQUIRE(r.code == 0);
  std::istringstream csv(r.out);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "N,max_estimator,mean_estimator,argmax,seconds");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  const auto m = awrb::load_model(model);
  CHECK(rows == static_cast<int>(m.N()) + 1);
}

TEST_CASE("inspect emits snapshot coefficient locations") {
  const fs::path out = workdir() / "inspect.csv";
  const auto r = run("inspect " + (trained() / "model.awrb").string() + " -o " + out.string());
  REQUIRE(r.code == 0);
  CHECK(r.err.find("thermal-block") != std::string::npos);
  std::istringstream csv(slurp(out));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "snapshot,x,y,abs_coef");
  int rows = 0;
  while (std::getline(csv, line)) {
    double v[4];
    char c;
    std::istringstream ls(line);
    ls >> v[0] >> c >> v[1] >> c >> v[2] >> c >> v[3];
    CHECK(v[1] >= 0.0);
    CHECK(v[1] <= 1.0);
    CHECK(v[2] >= 0.0);
    CHECK(v[2] <= 1.0);
    CHECK(v[3] >= 0.0);
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("selftest subcommand") {
  const auto r = run("selftest --suite multitree");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS multitree/") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("train --tol -1").code == 2);
  CHECK(run("train -p nosuchproblem -o " + (workdir() / "bad").string()).code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("AWRB_THREADS is honored and validated") {
  const std::string model = (trained() / "model.awrb").string();
  const auto a = run("sweep -m " + model);
  const auto b = run("sweep -m " + model + " --threads 3");
  // Same statistics regardless of the thread count (seconds column aside).
  auto strip = [](const std::string& s) {
    std::istringstream in(s);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  CHECK(strip(a.out) == strip(b.out));
  const auto c = run("sweep -m " + model);
  CHECK(c.code == 0);
  const std::string env_cmd = "env AWRB_THREADS=bogus " + cli() + " sweep -m " + model + " > /dev/null 2>&1";
  CHECK(std::system(env_cmd.c_str()) == 0);
}
