#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "wentropy/config.hpp"
#include "wentropy/experiment.hpp"

namespace fs = std::filesystem;
using namespace wentropy;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(WENTROPY_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("wentropy_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, DefaultsResolve) {
  const auto cfg = resolve(ConfigMap{});
  EXPECT_EQ(cfg.shape, Shape::chain);
  EXPECT_EQ(cfg.n, 5);
  EXPECT_EQ(cfg.sites, std::vector<int>{0});
  EXPECT_TRUE(cfg.w_enabled());
  EXPECT_EQ(cfg.n_steps(), 200u);
  EXPECT_DOUBLE_EQ(cfg.grid.x0 * cfg.grid.k0, 2.0 * std::numbers::pi);
}

TEST(Config, OverridesAndValidation) {
  ConfigMap c;
  c.apply("physics.N = 2");
  c.apply("physics.sites=1;3");
  const auto cfg = resolve(c);
  EXPECT_EQ(cfg.sites, (std::vector<int>{1, 3}));
  EXPECT_THROW(c.apply("physics.bogus=1"), Error);
  EXPECT_THROW(c.apply("no-equals-sign"), Error);

  ConfigMap dup;
  dup.apply("physics.N=2");
  dup.apply("physics.sites=1;1");
  EXPECT_THROW(resolve(dup), Error);
  ConfigMap range;
  range.apply("physics.sites=7");
  EXPECT_THROW(resolve(range), Error);
  ConfigMap frame;
  frame.apply("frame.dx=0.05");
  try {
    resolve(frame);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Config, IniAndJsonRoundTrip) {
  ConfigMap c;
  c.apply("lattice.shape=grid");
  c.apply("lattice.rows=2");
  c.apply("lattice.cols=3");
  c.apply("entropy.theta=1e-12");
  std::istringstream ini(c.to_ini());
  EXPECT_EQ(ConfigMap::from_ini(ini), c);
  EXPECT_EQ(ConfigMap::from_json(nlohmann::json::parse(c.to_json().dump())), c);
}

TEST(Config, TemplateParsesToDefaults) {
  std::istringstream in(config_template());
  EXPECT_EQ(ConfigMap::from_ini(in), ConfigMap{});
}

TEST(Config, SweepFamilies) {
  ConfigMap base;
  const auto ns = expand_family(base, Family::vary_n, {"3", "4"});
  EXPECT_EQ(ns[1].get("lattice.n"), "4");
  const auto Ns = expand_family(base, Family::vary_N, {"3"});
  EXPECT_EQ(Ns[0].get("physics.sites"), "0;1;2");
  base.set("lattice.n", "16");
  const auto shapes = expand_family(base, Family::vary_shape, {"ring", "grid4x4"});
  EXPECT_EQ(resolve(shapes[0]).lattice().edges().size(), 16u);
  EXPECT_EQ(resolve(shapes[1]).n_sites(), 16);
  EXPECT_THROW(parse_family("vary-x"), Error);
}

TEST(Cli, TraceWritesCsvAndSidecarAndReplays) {
  const auto dir = scratch("trace");
  const auto r = run("trace --set lattice.n=3 --set physics.t_max=2 -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir / "trace.csv");
  EXPECT_EQ(csv.rfind("# n=3,N=1,shape=chain", 0), 0u);
  EXPECT_NE(csv.find("\nt,s_f,s_w,dropped_mass,error_bound\n"), std::string::npos);
  std::istringstream in(csv);
  const auto tr = read_trace_csv(in);
  EXPECT_EQ(tr.size(), 21u);
  EXPECT_TRUE(tr.has_w());

  const auto replay = scratch("replay");
  const auto r2 = run("trace --config " + (dir / "trace.json").string() + " -o " + replay.string());
  ASSERT_EQ(r2.code, 0) << r2.out;
  EXPECT_EQ(slurp(replay / "trace.csv"), csv);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto dir = scratch("env");
  const std::string cmd = "WENTROPY_OUTPUT_DIR=" + dir.string() + " " + WENTROPY_CLI_PATH +
                          " trace --set lattice.n=2 --set physics.t_max=0.5 >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "trace.csv"));
}

TEST(Cli, AnalyzeReportsFitsAndPeriods) {
  const auto dir = scratch("analyze");
  ASSERT_EQ(run("trace --set lattice.n=4 --set physics.t_max=10 -o " + dir.string()).code, 0);
  const auto r = run("analyze " + (dir / "trace.csv").string() + " -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir / "analysis.csv");
  EXPECT_NE(csv.find("trace.csv,4,1,chain,"), std::string::npos);
  EXPECT_NE(csv.find(",s_w,"), std::string::npos);
  const auto side = nlohmann::json::parse(slurp(dir / "analysis.json"));
  EXPECT_EQ(side["results"][0]["period"]["status"], "found");
}

TEST(Cli, AnalyzeNamesBrokenColumn) {
  const auto dir = scratch("broken");
  std::ofstream(dir / "bad.csv") << "t,s_f,s_w,dropped_mass,error_bound\n0,0,1,0,0\n0.1,zero,1,0,0\n";
  const auto r = run("analyze " + (dir / "bad.csv").string() + " -o " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("'s_f'"), std::string::npos) << r.out;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("trace --set physics.bogus=1 --dry-run").code, 2);
  EXPECT_EQ(run("figure fig99").code, 2);
  EXPECT_EQ(run("").code, 2);
  // the frame file cannot be read: config error
  EXPECT_EQ(run("trace --set frame.file=/nonexistent/frame.txt -o /tmp").code, 2);
  // a W-entropy budget that is too small: numerical failure
  EXPECT_EQ(run("trace --set entropy.cost_budget=10 -o " + scratch("budget").string()).code, 3);
}

TEST(Cli, DryRunPrintsResolvedConfig) {
  const auto r = run("trace --dry-run --set physics.U=0.5");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("[physics]"), std::string::npos);
  EXPECT_NE(r.out.find("U = 0.5"), std::string::npos);
}

TEST(Cli, FrameBuildExportsLoadableFrame) {
  const auto dir = scratch("frame");
  const auto r = run("frame-build --file " + (dir / "f.txt").string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(dir / "f.txt");
  const auto f = read_frame(in);
  EXPECT_EQ(f.cells.size(), 25u);
  EXPECT_NE(r.out.find(frame_hash(f)), std::string::npos);
  const auto t = run("trace --set lattice.n=2 --set physics.t_max=0.3 --set frame.file=" + (dir / "f.txt").string() +
                     " -o " + dir.string());
  EXPECT_EQ(t.code, 0) << t.out;
  EXPECT_NE(slurp(dir / "trace.csv").find("frame=" + frame_hash(f)), std::string::npos);
}

TEST(Cli, SweepTable) {
  const auto dir = scratch("sweep");
  const auto r = run("sweep --family vary-position --values 0,1 --set physics.t_max=8 --set analysis.horizon=50 -o " +
                     dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir / "trace_sweep.csv");
  EXPECT_EQ(csv.rfind("n,N,shape,init_sites,k,b,r2_lin,A,omega,r2_sat,T,found,status\n", 0), 0u);
  EXPECT_NE(csv.find("\n5,1,chain,1,"), std::string::npos);
}

TEST(Cli, SweepRecordsPointFailuresAndContinues) {
  const auto dir = scratch("sweep_fail");
  const auto r = run("sweep --family vary-n --values 1,3 --set physics.t_max=2 --set analysis.horizon=5 -o " +
                     dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir / "trace_sweep.csv");
  const auto bad = csv.find("\n1,1,");
  ASSERT_NE(bad, std::string::npos);
  const auto line = csv.substr(bad + 1, csv.find('\n', bad + 1) - bad - 1);
  EXPECT_NE(line.substr(line.rfind(',') + 1), "ok") << line;
  EXPECT_NE(csv.find("\n3,1,chain,0,"), std::string::npos);
}
