#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

#ifndef QPCLI_PATH
#error "QPCLI_PATH must point at the CLI binary"
#endif

int run(const std::string& args) {
  std::string cmd = std::string(QPCLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           fs::path("qpcli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("usage errors exit with 64") {
  CHECK(run("--no-such-flag") == 64);
  CHECK(run("no-such-subcommand") == 64);
  TempDir t;
  CHECK(run("--out " + t.path.string() + " mpp --case Z") == 64);
  CHECK(run("--out " + t.path.string() + " met --eps -0.5 --report nowhere.json") == 64);
}

TEST_CASE("prefactor subcommand succeeds and is byte-stable") {
  TempDir t1, t2;
  CHECK(run("--out " + t1.path.string() + " prefactor --case B") == 0);
  CHECK(run("--out " + t2.path.string() + " prefactor --case B") == 0);
  auto r1 = t1.path / "prefactor" / "report_B.json";
  auto r2 = t2.path / "prefactor" / "report_B.json";
  REQUIRE(fs::exists(r1));
  REQUIRE(fs::exists(r2));
  CHECK(slurp(r1) == slurp(r2));
  // run provenance: config snapshot next to the outputs
  CHECK(fs::exists(t1.path / "prefactor" / "config_snapshot.json"));
}

TEST_CASE("mpp subcommand writes the path csv") {
  TempDir t;
  CHECK(run("--out " + t.path.string() + " mpp --case A") == 0);
  auto csv = t.path / "mpp" / "path_A.csv";
  REQUIRE(fs::exists(csv));
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  CHECK(header == "sigma,x1,x2,V,divl,normb");
}

TEST_CASE("met subcommand evaluates the formula from a report") {
  TempDir t;
  REQUIRE(run("--out " + t.path.string() + " prefactor --case B") == 0);
  auto report = t.path / "prefactor" / "report_B.json";
  CHECK(run("--out " + t.path.string() + " met --report " + report.string() +
            " --eps 0.12") == 0);
  // exponent guard: V*/eps > 700 is a numerical failure, exit 2
  CHECK(run("--out " + t.path.string() + " met --report " + report.string() +
            " --eps 0.0001") == 2);
}

TEST_CASE("missing checkpoint file is a numerical/runtime failure") {
  TempDir t;
  CHECK(run("--out " + t.path.string() +
            " surface --checkpoint /nonexistent.qpck") == 2);
}
