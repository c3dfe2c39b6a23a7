#include "stokeslab/cli.hpp"
#include "stokeslab/config.hpp"
#include "stokeslab/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace stokeslab;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("stokeslab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  fs::path circle_file(const std::string& name, double r) {
    std::ostringstream s;
    s.precision(17);
    for (int i = 0; i <= 400; ++i) {
      const double t = i / 400.0, a = 2 * std::numbers::pi * t;
      s << t << ' ' << r * std::cos(a) << ' ' << r * std::sin(a) << '\n';
    }
    return write(name, s.str());
  }

  fs::path dir_;
};

constexpr const char* short_sweep = "[sweep]\nt_grid = 0 0.02 0.04 0.06 0.08 0.1\n[mesh]\nh_target = 0.2\nlevel = 0\n";

}  // namespace

TEST_F(CliTest, HausdorffOfConcentricCircles) {
  const auto r = run({"hausdorff", "--a", circle_file("c1.curve", 1.0).string(), "--b", circle_file("c2.curve", 0.5).string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.5\n");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  auto r = run({"--bogus", "validate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("usage:"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"transmogrify"}).code, 2);
  EXPECT_EQ(run({"solve"}).code, 2);  // needs --out
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, ConfigErrorsNameLineAndField) {
  auto r = run({"validate", "--config", write("a.cfg", "[domain]\nrho0 = 0.5\n\nbogus = 1\n").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("a.cfg:4"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("domain.bogus"), std::string::npos);
  r = run({"validate", "--config", write("b.cfg", "[domain]\nrho0 = fine\n").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("b.cfg:2: domain.rho0"), std::string::npos) << r.err;
  r = run({"validate", "--config", write("c.cfg", "[domain]\nnot an assignment\n").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("c.cfg:2"), std::string::npos) << r.err;
  r = run({"sweep", "--out", (dir_ / "o").string(), "--config",
           write("d.cfg", "[sweep]\nt_grid = 0 0.05 0.03\n").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("strictly increasing"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "o" / "sweep.csv"));
}

TEST_F(CliTest, ValidateAndEnvironmentOverride) {
  auto r = run({"validate"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("obstacle_clearance"), std::string::npos);
  ::setenv("STOKESLAB_DOMAIN_OBSTACLE_RADIUS", "0.6", 1);
  r = run({"validate"});
  ::unsetenv("STOKESLAB_DOMAIN_OBSTACLE_RADIUS");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);

  Config c;
  ::setenv("STOKESLAB_MESH_LEVEL", "3", 1);
  c.apply_environment();
  ::unsetenv("STOKESLAB_MESH_LEVEL");
  EXPECT_EQ(c.integer("mesh.level"), 3);
  EXPECT_EQ(c.origin("mesh.level"), "environment STOKESLAB_MESH_LEVEL");
}

TEST_F(CliTest, SweepFitAndDeterminism) {
  const auto cfg = write("sweep.cfg", short_sweep).string();
  const auto a = run({"sweep", "--config", cfg, "--out", (dir_ / "a").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run({"--jobs", "3", "sweep", "--config", cfg, "--out", (dir_ / "b").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"manifest.json", "sweep.csv", "summary.json", "plot.dat"}) EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  EXPECT_EQ(slurp(dir_ / "a" / "sweep.csv"), slurp(dir_ / "b" / "sweep.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
  EXPECT_NE(slurp(dir_ / "a" / "manifest.json").find("\"started\""), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "a" / "sweep.csv").find("started"), std::string::npos);
  EXPECT_LE(fs::last_write_time(dir_ / "a" / "manifest.json"), fs::last_write_time(dir_ / "a" / "sweep.csv"));

  auto f = run({"fit", "--csv", (dir_ / "a" / "sweep.csv").string()});
  EXPECT_EQ(f.code, 0) << f.err;
  EXPECT_NE(f.out.find("\"beta\""), std::string::npos);
  fs::copy_file(dir_ / "a" / "sweep.csv", dir_ / "lonely.csv");
  f = run({"fit", "--csv", (dir_ / "lonely.csv").string()});
  EXPECT_EQ(f.code, 2);
  EXPECT_NE(f.err.find("--g-norm"), std::string::npos);
  f = run({"fit", "--csv", (dir_ / "lonely.csv").string(), "--g-norm", "1.4"});
  EXPECT_EQ(f.code, 0) << f.err;
}

TEST_F(CliTest, SolveMeasureExtendWriteFiles) {
  const auto chan = write("chan.cfg",
                          "[domain]\nouter = polygon\nouter_vertices = 0 0 2 0 2 1 0 1\ngamma = 0 0.333333333333\n"
                          "anchor = 0.1666666666667\nM0 = 1\nobstacle = none\n[data]\nkind = poiseuille\n"
                          "[mesh]\nh_target = 0.25\nlevel = 0\n")
                        .string();
  auto r = run({"solve", "--config", chan, "--out", (dir_ / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "s" / "velocity.txt"));
  r = run({"measure", "--config", chan, "--out", (dir_ / "m").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "m" / "psi.txt"));
  r = run({"extend", "--config", chan, "--out", (dir_ / "e").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "e" / "certificate.txt"));
  EXPECT_NE(r.out.find("bound_ratio"), std::string::npos);
}

TEST_F(CliTest, Probes) {
  const auto cfg = write("p.cfg", "[three_spheres]\nsolutions = 3\n").string();
  auto r = run({"probe-3spheres", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("delta_hat min"), std::string::npos);
  r = run({"probe-smallness", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fit A"), std::string::npos);
}
