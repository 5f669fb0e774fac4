#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "vmiv/vmiv.hpp"

namespace {

struct EstimateArgs {
  std::string config_path, data, outcome, treatment, instruments, controls, regularize, se, out, bounds;
  std::vector<std::string> discretize, estimands;
  std::uint64_t seed = 1;
  bool auto_orient = false;
};

void add_data_options(CLI::App* cmd, EstimateArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON configuration or a previous report to re-run");
  cmd->add_option("--data", a.data, "input CSV with a header row");
  cmd->add_option("--outcome", a.outcome, "outcome column");
  cmd->add_option("--treatment", a.treatment, "binary treatment column");
  cmd->add_option("--instruments", a.instruments, "comma-separated binary instrument columns");
  cmd->add_option("--controls", a.controls, "comma-separated control columns");
  cmd->add_option("--discretize", a.discretize, "col:cut1,cut2[:desc] threshold instruments from a numeric column");
  cmd->add_flag("--auto-orient", a.auto_orient, "flip instruments whose marginal first stage is negative");
  cmd->add_option("--out", a.out, "json, csv, or an output path (.json/.csv)");
}

std::vector<std::string> list_arg(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (auto& p : vmiv::split(s, ','))
    if (!p.empty()) out.push_back(p);
  return out;
}

vmiv::RunConfig build_config(const std::string& command, CLI::App* cmd, const EstimateArgs& a) {
  vmiv::RunConfig c;
  if (!a.config_path.empty()) c = vmiv::RunConfig::from_file(a.config_path);
  c.command = command;
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--data")) c.data = a.data;
  if (given("--outcome")) c.roles.outcome = a.outcome;
  if (given("--treatment")) c.roles.treatment = a.treatment;
  if (given("--instruments")) c.roles.instruments = list_arg(a.instruments);
  if (given("--controls")) c.roles.controls = list_arg(a.controls);
  if (given("--discretize")) {
    c.roles.discretize.clear();
    for (const auto& d : a.discretize) c.roles.discretize.push_back(vmiv::parse_discretize(d));
  }
  if (given("--auto-orient")) c.auto_orient = a.auto_orient;
  if (given("--out")) c.out = a.out;
  if (command == "estimate") {
    if (given("--estimand")) c.estimands = a.estimands;
    if (given("--regularize")) c.regularize = a.regularize;
    if (given("--se")) c.se = a.se;
    if (given("--seed")) c.seed = a.seed;
    if (given("--outcome-bounds")) {
      const auto parts = vmiv::split(a.bounds, ',');
      if (parts.size() != 2) throw vmiv::InvalidArgument("--outcome-bounds expects lo,hi");
      c.outcome_bounds = vmiv::Interval{vmiv::parse_number_arg(parts[0], "--outcome-bounds"),
                                        vmiv::parse_number_arg(parts[1], "--outcome-bounds")};
    }
  }
  return c;
}

int run_report(const vmiv::RunConfig& config) {
  const auto report = vmiv::run(config);
  const auto target = vmiv::parse_output(config.out);
  if (target.format == "csv") {
    if (config.command != "estimate") throw vmiv::InvalidArgument("diagnose output is JSON only");
    vmiv::write_output(vmiv::report_csv(report), target);
  } else {
    vmiv::write_output(vmiv::dump_json(vmiv::to_json(report)) + "\n", target);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment-effect estimation with multiple instruments under vector monotonicity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vmiv::kToolVersion);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "estimate complier parameters");
  add_data_options(estimate, est);
  estimate->add_option("--estimand", est.estimands, "acl | slate:1,3 | slatt:.. | slatu:.. | pte:2@z1=0,z3=1 | lambda:..");
  estimate->add_option("--regularize", est.regularize, "auto | none | alpha=<value>");
  estimate->add_option("--se", est.se, "none | sandwich | bootstrap:<B>");
  estimate->add_option("--seed", est.seed, "seed for bootstrap draws");
  estimate->add_option("--outcome-bounds", est.bounds, "lo,hi support of the outcome; adds average-effect bounds");

  EstimateArgs diag;
  auto* diagnose = app.add_subcommand("diagnose", "support report and monotonicity test");
  add_data_options(diagnose, diag);

  std::string dgp = "three:1", estimators = "vm,wald,tsls", sim_estimand = "acl", sim_se = "none", sim_out = "csv",
              export_path;
  long long n = 1000;
  std::size_t reps = 1000;
  std::uint64_t sim_seed = 42;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison on a known design");
  simulate->add_option("--dgp", dgp, "three:1 | three:2 | two | file:<spec.json>");
  simulate->add_option("--n", n, "sample size")->check(CLI::PositiveNumber);
  simulate->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, "master seed");
  simulate->add_option("--estimators", estimators, "comma-separated: vm, vm0, wald, tsls");
  simulate->add_option("--estimand", sim_estimand, "target of the vm estimators");
  simulate->add_option("--se", sim_se, "standard errors for vm estimators (enables coverage)");
  simulate->add_option("--out", sim_out, "csv, json, or an output path");
  simulate->add_option("--export", export_path, "write one simulated dataset to this CSV path and exit");

  int enum_j = 2;
  bool count_only = false;
  auto* enumerate = app.add_subcommand("enumerate", "list compliance groups for J instruments");
  enumerate->add_option("--j", enum_j, "number of instruments")->required();
  enumerate->add_flag("--count-only", count_only, "print only the number of groups");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*estimate) return run_report(build_config("estimate", estimate, est));
    if (*diagnose) return run_report(build_config("diagnose", diagnose, diag));
    if (*simulate) {
      const auto spec = vmiv::parse_dgp(dgp);
      if (!export_path.empty()) {
        const auto sim = vmiv::simulate(spec, Eigen::Index(n), sim_seed);
        vmiv::write_output(vmiv::dataset_csv(sim), {"csv", export_path});
        return 0;
      }
      const auto estimand = vmiv::parse_estimand(sim_estimand, spec.j);
      const auto var = vmiv::parse_variance(sim_se, sim_seed);
      const auto ests = vmiv::parse_estimators(estimators, estimand, var);
      const auto res = vmiv::run_monte_carlo(spec, Eigen::Index(n), reps, ests, sim_seed);
      const auto target = vmiv::parse_output(sim_out);
      if (target.format == "csv")
        vmiv::write_output(vmiv::monte_carlo_csv(res), target);
      else
        vmiv::write_output(vmiv::dump_json(vmiv::monte_carlo_json(res)) + "\n", target);
      return 0;
    }
    if (*enumerate) {
      if (count_only) {
        std::cout << vmiv::count_compliance_groups(enum_j) << "\n";
        return 0;
      }
      for (const auto& g : vmiv::enumerate_compliance_groups(enum_j)) std::cout << g.to_string() << "\n";
      return 0;
    }
  } catch (const vmiv::WeakIdentificationError& e) {
    std::fprintf(stderr, "vmiv: weak identification: %s (complier share %.6g, t %.4g)\n", e.what(), e.share(),
                 e.t_stat());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "vmiv: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
