#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vmiv/cli.hpp"

using namespace vmiv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / ("vmiv_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(VMIV_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ColumnRoles toy_roles() {
  ColumnRoles r;
  r.outcome = "Y";
  r.treatment = "D";
  r.instruments = {"Z1", "Z2"};
  return r;
}

std::string without_timestamp(Json j) {
  j.erase("generated_at");
  return dump_json(j);
}

std::string dgp1_csv(Eigen::Index n, std::uint64_t seed) {
  return write_file("dgp1_" + std::to_string(seed) + ".csv", dataset_csv(dgp_three_instruments(1, n, seed)));
}

RunConfig dgp1_config(const std::string& path) {
  RunConfig c;
  c.data = path;
  c.roles.outcome = "y";
  c.roles.treatment = "d";
  c.roles.instruments = {"z1", "z2", "z3"};
  return c;
}

}  // namespace

TEST_CASE("ingesting a small file") {
  const auto path = write_file("toy.csv", "Y,D,Z1,Z2\n1.5,1,1,0\n0.2,0,0,0\n3,1,1,1\n-1,0,0,1\n");
  const auto in = ingest_csv(path, toy_roles());
  CHECK(in.data.n() == 4);
  CHECK(in.data.instruments() == 2);
  CHECK(in.data.y(3) == -1.0);
  CHECK(in.design.family.size() == 3);
}

TEST_CASE("ingestion errors name the offending rows") {
  const auto bad_d = write_file("bad_d.csv", "Y,D,Z1,Z2\n1,1,1,0\n1,2,0,0\n1,0,1,1\n1,2,0,1\n");
  try {
    ingest_csv(bad_d, toy_roles());
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("rows 2,4") != std::string::npos);
  }
  const auto missing = write_file("missing.csv", "Y,D,Z1,Z2\n1,1,1,0\nNA,0,0,0\n1,0,1,1\n");
  try {
    ingest_csv(missing, toy_roles());
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("rows 2") != std::string::npos);
  }
  const auto no_col = write_file("nocol.csv", "Y,D,Z1\n1,1,1\n");
  CHECK_THROWS_AS(ingest_csv(no_col, toy_roles()), InputError);
  auto twice = toy_roles();
  twice.instruments = {"Z1", "Y"};
  CHECK_THROWS_AS(ingest_csv(no_col, twice), InputError);
  CHECK_THROWS_AS(ingest_csv((scratch_dir() / "absent.csv").string(), toy_roles()), InputError);
  CHECK_THROWS_AS(ingest_csv(write_file("ragged.csv", "Y,D,Z1,Z2\n1,1,1\n"), toy_roles()), InputError);
}

TEST_CASE("discretizing a numeric column into a below-cut instrument") {
  const auto path = write_file("tuition.csv", "y,d,tuition\n1,1,1500\n2,0,2170\n3,1,900\n4,0,4000\n");
  ColumnRoles r;
  r.outcome = "y";
  r.treatment = "d";
  r.discretize = {parse_discretize("tuition:2170:desc")};
  const auto in = ingest_csv(path, r);
  REQUIRE(in.data.instruments() == 1);
  CHECK(in.design.names[0] == "tuition<2170");
  CHECK(in.data.z.col(0) == Eigen::Vector4d(1, 0, 1, 0));
  CHECK(parse_discretize("x:1,2").direction == 1);
  CHECK_THROWS_AS(parse_discretize("x:1:sideways"), InvalidArgument);
  CHECK_THROWS_AS(parse_discretize("x"), InvalidArgument);
}

TEST_CASE("estimand grammar") {
  CHECK(parse_estimand("acl", 3).is_acl());
  const auto s = parse_estimand("slate:1,3", 3);
  CHECK(s.target->kind == TargetKind::slate);
  CHECK(s.target->shifted == InstrumentSet::from_indices({1, 3}));
  const auto p = parse_estimand("pte:2@z1=0,z3=1", 3);
  CHECK(p.target->instrument == 2);
  CHECK(p.target->context == InstrumentSet::of(3));
  CHECK(p.label(3) == "pte:2@z1=0,z3=1");
  CHECK(parse_estimand("lambda:1,0.5,2", 2).custom_lambda.size() == 3);
  CHECK_THROWS_AS(parse_estimand("pte:2@z1=0", 3), InvalidArgument);
  CHECK_THROWS_AS(parse_estimand("pte:2@z1=0,z1=1,z3=0", 3), InvalidArgument);
  CHECK_THROWS_AS(parse_estimand("pte:2@z2=1,z1=0,z3=0", 3), InvalidArgument);
  CHECK_THROWS_AS(parse_estimand("slate:4", 3), InvalidArgument);
  CHECK_THROWS_AS(parse_estimand("late", 3), InvalidArgument);
  CHECK(parse_regularization("alpha=0.5").alpha == 0.5);
  CHECK(parse_regularization("none").mode == Regularization::Mode::none);
  CHECK_THROWS_AS(parse_regularization("alpha=-1"), InvalidArgument);
  CHECK(parse_variance("bootstrap:200", 3).replicates == 200);
  CHECK_THROWS_AS(parse_variance("jackknife", 3), InvalidArgument);
  CHECK(parse_output("results.csv").format == "csv");
  CHECK(parse_output("csv").path == std::nullopt);
  CHECK(parse_output("out.json").path == "out.json");
}

TEST_CASE("numbers are written with 17 significant digits") {
  CHECK(format_double17(0.1) == "0.10000000000000001");
  CHECK(format_double17(2.0) == "2.0");
  CHECK(format_double17(std::numeric_limits<double>::infinity()) == "null");
  Json j;
  j["x"] = 1.0 / 3.0;
  j["k"] = 3;
  CHECK(dump_json(j, 0) == "{\"x\":0.33333333333333331,\"k\":3}");
}

TEST_CASE("end-to-end estimate on a simulated three-instrument export") {
  auto c = dgp1_config(dgp1_csv(4000, 31));
  c.estimands = {"acl", "slate:1", "pte:2@z1=1,z3=0"};
  c.regularize = "none";
  const auto rep = run(c);
  REQUIRE(rep.results.size() == 3);
  const auto& acl = rep.results[0];
  REQUIRE(acl.se);
  CHECK(std::abs(acl.point - 12.0) < 4.0 * *acl.se);
  CHECK(std::abs(acl.complier_share - 0.9) < 0.05);
  CHECK(rep.support->status == SupportStatus::full_support);
  CHECK(rep.vm_test->records.size() == 12);
  const auto j = to_json(rep);
  CHECK(j["results"][0]["estimand"] == "acl");
  CHECK(j["schema"] == "vmiv-report/1");
  CHECK(j["results"][2]["diagnostics"]["lambda"].size() == 7);
}

TEST_CASE("four instruments give 32 monotonicity inequalities") {
  std::string text = "y,d,a,b,c,e\n";
  Engine eng = stream_engine(5, 0);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1600; ++i) {
    int on = 0;
    std::string z;
    for (int k = 0; k < 4; ++k) {
      const int bit = (i >> k) & 1;
      on += bit;
      z += "," + std::to_string(bit);
    }
    const int d = u(eng) < 0.1 + 0.2 * on ? 1 : 0;
    text += std::to_string(u(eng) + d) + "," + std::to_string(d) + z + "\n";
  }
  RunConfig c;
  c.command = "diagnose";
  c.data = write_file("four.csv", text);
  c.roles.outcome = "y";
  c.roles.treatment = "d";
  c.roles.instruments = {"a", "b", "c", "e"};
  const auto rep = run(c);
  REQUIRE(rep.vm_test);
  CHECK(rep.vm_test->records.size() == 32);
  CHECK(to_json(rep)["vm_test"]["records"].size() == 32);
}

TEST_CASE("reports are deterministic and re-runnable from their config echo") {
  auto c = dgp1_config(dgp1_csv(800, 32));
  c.estimands = {"acl", "slatt:2"};
  c.se = "bootstrap:60";
  c.seed = 17;
  const auto first = without_timestamp(to_json(run(c)));
  const auto second = without_timestamp(to_json(run(c)));
  CHECK(first == second);
  const auto again = RunConfig::from_json(Json::parse(first));
  CHECK(without_timestamp(to_json(run(again))) == first);
  const auto path = write_file("cfg.json", first);
  CHECK(without_timestamp(to_json(run(RunConfig::from_file(path)))) == first);
}

TEST_CASE("default standard errors depend on controls") {
  RunConfig c;
  CHECK(c.resolved_se() == "sandwich");
  c.roles.controls = {"x"};
  CHECK(c.resolved_se() == "bootstrap:500");
  c.se = "none";
  CHECK(c.resolved_se() == "none");
}

TEST_CASE("command-line exit codes") {
  const auto good = dgp1_csv(600, 33);
  const std::string cols = " --outcome y --treatment d --instruments z1,z2,z3";
  CHECK(run_tool("enumerate --j 3 --count-only") == 0);
  CHECK(run_tool("estimate --data " + good + cols + " --regularize none") == 0);
  CHECK(run_tool("diagnose --data " + good + cols) == 0);
  CHECK(run_tool("estimate --data " + good + cols + " --estimand nonsense") == 1);
  CHECK(run_tool("estimate --data " + good + cols + " --frobnicate") == 1);
  CHECK(run_tool("estimate --data /nonexistent.csv" + cols) == 1);

  // Treatment unrelated to the instruments: the complier share is not identified.
  std::string text = "y,d,z\n";
  for (int i = 0; i < 400; ++i) text += std::to_string(i % 7) + "," + std::to_string((i / 2) % 2) + "," + std::to_string(i % 2) + "\n";
  const auto weak = write_file("weak.csv", text);
  CHECK(run_tool("estimate --data " + weak + " --outcome y --treatment d --instruments z --regularize none") == 2);

  const auto out = (scratch_dir() / "mc.csv").string();
  CHECK(run_tool("simulate --dgp two --n 200 --reps 5 --seed 1 --estimators vm,wald,tsls --out " + out) == 0);
  const auto csv = read_file(out);
  CHECK(csv.rfind("estimator,metric,value\n", 0) == 0);
  CHECK(csv.find("tsls,mean,") != std::string::npos);
  CHECK(run_tool("simulate --dgp nowhere --n 10 --reps 2") == 1);
}

TEST_CASE("Monte Carlo CSV has one row per estimator and metric") {
  const auto res = run_monte_carlo(two_instrument_spec(), 300, 4, parse_estimators("vm0,wald", Estimand::acl(), VarianceOptions::none()), 2);
  const auto csv = monte_carlo_csv(res);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + 2 * summary_metrics(res.estimators[0]).size());
  CHECK_THROWS_AS(parse_estimators("vm,ols", Estimand::acl(), VarianceOptions::none()), InvalidArgument);
}
