#pragma once

// Run configuration, argument grammars and report assembly shared by the
// vmiv command-line tool and the tests.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vmiv/combinatorics.hpp"
#include "vmiv/design.hpp"
#include "vmiv/error.hpp"
#include "vmiv/estimation.hpp"
#include "vmiv/io.hpp"
#include "vmiv/simulation.hpp"

namespace vmiv {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kReportSchema = "vmiv-report/1";

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number_arg(const std::string& s, const std::string& what) {
  auto v = parse_double(s);
  if (!v) throw InvalidArgument("invalid number '" + s + "' in " + what);
  return *v;
}

inline int parse_index_arg(const std::string& s, const std::string& what) {
  int v = 0;
  const std::string t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw InvalidArgument("invalid index '" + s + "' in " + what);
  return v;
}

// acl | slate:1,3 | slatt:.. | slatu:.. | pte:2@z1=0,z3=1 | lambda:v1,v2,...
inline Estimand parse_estimand(const std::string& text, int j) {
  const std::string t = trim(text);
  if (t == "acl") return Estimand::acl();
  const auto colon = t.find(':');
  if (colon == std::string::npos) throw InvalidArgument("unknown estimand '" + t + "'");
  const std::string kind = t.substr(0, colon);
  const std::string rest = t.substr(colon + 1);
  if (kind == "lambda") {
    const auto parts = split(rest, ',');
    Eigen::VectorXd v(Eigen::Index(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) v(Eigen::Index(i)) = parse_number_arg(parts[i], t);
    return Estimand::custom(v);
  }
  if (kind == "slate" || kind == "slatt" || kind == "slatu") {
    std::vector<int> idx;
    for (const auto& p : split(rest, ',')) idx.push_back(parse_index_arg(p, t));
    for (int i : idx)
      if (i < 1 || i > j) throw InvalidArgument("instrument " + std::to_string(i) + " out of range in '" + t + "'");
    const auto s = InstrumentSet::from_indices(idx);
    TargetParameter p = kind == "slate" ? TargetParameter::slate(s)
                        : kind == "slatt" ? TargetParameter::slatt(s)
                                          : TargetParameter::slatu(s);
    p.validate(j);
    return Estimand::from(p);
  }
  if (kind == "pte") {
    const auto at = rest.find('@');
    const int instr = parse_index_arg(rest.substr(0, at), t);
    if (instr < 1 || instr > j) throw InvalidArgument("pte instrument out of range in '" + t + "'");
    Assignment ctx;
    std::vector<bool> seen(std::size_t(j) + 1, false);
    if (at != std::string::npos) {
      for (const auto& kv : split(rest.substr(at + 1), ',')) {
        const auto eq = kv.find('=');
        if (kv.size() < 4 || kv[0] != 'z' || eq == std::string::npos)
          throw InvalidArgument("pte context entries look like z2=1, got '" + kv + "'");
        const int k = parse_index_arg(kv.substr(1, eq - 1), t);
        const std::string val = kv.substr(eq + 1);
        if (k < 1 || k > j || k == instr) throw InvalidArgument("invalid pte context instrument in '" + t + "'");
        if (seen[std::size_t(k)]) throw InvalidArgument("pte context sets z" + std::to_string(k) + " twice");
        if (val != "0" && val != "1") throw InvalidArgument("pte context values must be 0 or 1 in '" + t + "'");
        seen[std::size_t(k)] = true;
        ctx = ctx.with(k, val == "1");
      }
    }
    for (int k = 1; k <= j; ++k)
      if (k != instr && !seen[std::size_t(k)])
        throw InvalidArgument("pte context leaves z" + std::to_string(k) + " unset in '" + t + "'");
    return Estimand::from(TargetParameter::pte(instr, ctx));
  }
  throw InvalidArgument("unknown estimand '" + t + "'");
}

// auto | none | alpha=<value>
inline Regularization parse_regularization(const std::string& text) {
  const std::string t = trim(text);
  if (t == "auto") return Regularization::automatic();
  if (t == "none") return Regularization::none();
  if (t.rfind("alpha=", 0) == 0) {
    const double a = parse_number_arg(t.substr(6), "--regularize");
    if (!(a >= 0)) throw InvalidArgument("alpha must be nonnegative");
    return Regularization::fixed(a);
  }
  throw InvalidArgument("--regularize expects auto, none or alpha=<value>, got '" + t + "'");
}

// none | sandwich | bootstrap[:B]
inline VarianceOptions parse_variance(const std::string& text, std::uint64_t seed) {
  const std::string t = trim(text);
  if (t == "none") return VarianceOptions::none();
  if (t == "sandwich") return VarianceOptions::sandwich();
  if (t == "bootstrap") return VarianceOptions::bootstrap(500, seed);
  if (t.rfind("bootstrap:", 0) == 0) {
    const int b = parse_index_arg(t.substr(10), "--se");
    if (b < 2) throw InvalidArgument("bootstrap needs at least 2 replicates");
    return VarianceOptions::bootstrap(b, seed);
  }
  throw InvalidArgument("--se expects none, sandwich or bootstrap:<B>, got '" + t + "'");
}

// column:cut1,cut2[:desc|:asc]
inline DiscretizeRule parse_discretize(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
    throw InvalidArgument("--discretize expects column:cut1,cut2[:desc], got '" + text + "'");
  DiscretizeRule r;
  r.column = parts[0];
  for (const auto& c : split(parts[1], ',')) r.cuts.push_back(parse_number_arg(c, "--discretize"));
  if (parts.size() == 3) {
    if (parts[2] == "desc")
      r.direction = -1;
    else if (parts[2] != "asc")
      throw InvalidArgument("--discretize direction must be asc or desc, got '" + parts[2] + "'");
  }
  return r;
}

inline std::string discretize_to_string(const DiscretizeRule& r) {
  std::string s = r.column + ":";
  for (std::size_t i = 0; i < r.cuts.size(); ++i) s += (i ? "," : "") + format_number(r.cuts[i]);
  if (r.direction == -1) s += ":desc";
  return s;
}

// Output target: a format keyword (written to stdout) or a file path whose
// extension selects the format.
struct OutputTarget {
  std::string format = "json";
  std::optional<std::string> path;
};

inline OutputTarget parse_output(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t == "json" || t == "-") return {"json", std::nullopt};
  if (t == "csv") return {"csv", std::nullopt};
  const auto dot = t.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : t.substr(dot + 1);
  return {ext == "csv" ? "csv" : "json", t};
}

struct RunConfig {
  std::string command = "estimate";  // estimate | diagnose
  std::string data;
  ColumnRoles roles;
  std::vector<std::string> estimands{"acl"};
  std::string regularize = "auto";
  std::string se;  // empty: sandwich without controls, bootstrap:500 with controls
  std::uint64_t seed = 1;
  bool auto_orient = false;
  std::optional<Interval> outcome_bounds;
  std::string out = "json";

  std::string resolved_se() const {
    if (!se.empty()) return se;
    return roles.controls.empty() ? "sandwich" : "bootstrap:500";
  }

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["data"] = data;
    j["outcome"] = roles.outcome;
    j["treatment"] = roles.treatment;
    j["instruments"] = roles.instruments;
    j["controls"] = roles.controls;
    Json disc = Json::array();
    for (const auto& r : roles.discretize) disc.push_back(discretize_to_string(r));
    j["discretize"] = disc;
    j["estimands"] = estimands;
    j["regularize"] = regularize;
    j["se"] = resolved_se();
    j["seed"] = seed;
    j["auto_orient"] = auto_orient;
    j["outcome_bounds"] = outcome_bounds ? Json::array({outcome_bounds->lo, outcome_bounds->hi}) : Json();
    j["out"] = out;
    return j;
  }

  // Accepts a config object or a whole report (its "config" echo).
  static RunConfig from_json(const Json& in) {
    const Json& j = in.contains("config") && in["config"].is_object() ? in["config"] : in;
    try {
      RunConfig c;
      c.command = j.value("command", c.command);
      c.data = j.value("data", c.data);
      c.roles.outcome = j.value("outcome", std::string());
      c.roles.treatment = j.value("treatment", std::string());
      c.roles.instruments = j.value("instruments", std::vector<std::string>{});
      c.roles.controls = j.value("controls", std::vector<std::string>{});
      for (const auto& r : j.value("discretize", std::vector<std::string>{})) c.roles.discretize.push_back(parse_discretize(r));
      c.estimands = j.value("estimands", c.estimands);
      c.regularize = j.value("regularize", c.regularize);
      c.se = j.value("se", std::string());
      c.seed = j.value("seed", c.seed);
      c.auto_orient = j.value("auto_orient", false);
      if (j.contains("outcome_bounds") && !j["outcome_bounds"].is_null()) {
        const auto b = j["outcome_bounds"].get<std::vector<double>>();
        if (b.size() != 2) throw InvalidArgument("outcome_bounds must have two entries");
        c.outcome_bounds = Interval{b[0], b[1]};
      }
      c.out = j.value("out", c.out);
      return c;
    } catch (const Json::exception& e) {
      throw InputError(std::string("invalid configuration: ") + e.what());
    }
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open configuration '" + path + "'");
    try {
      return from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
      throw InputError("configuration '" + path + "' is not valid JSON: " + e.what());
    }
  }
};

struct RunReport {
  RunConfig config;
  InstrumentDesign design;
  std::vector<int> flipped;
  std::optional<SupportReport> support;
  std::optional<MonotonicityReport> vm_test;
  std::optional<GroupShareBounds> group_bounds;
  std::vector<EstimateResult> results;
  std::optional<AteBounds> ate;
  std::vector<std::string> warnings;
  Eigen::Index n = 0;
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return a;
}

inline Json to_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

inline Json family_json(const std::vector<InstrumentSet>& family) {
  Json a = Json::array();
  for (auto s : family) a.push_back(s.to_string());
  return a;
}

inline std::string context_string(Assignment ctx, int instrument, int j) {
  std::string s;
  for (int k = 1; k <= j; ++k) {
    if (k == instrument) continue;
    s += (s.empty() ? "" : ",") + std::string("z") + std::to_string(k) + "=" + (ctx.contains(k) ? "1" : "0");
  }
  return s;
}

inline Json to_json(const SupportReport& r) {
  Json j;
  j["status"] = to_string(r.status);
  Json cells = Json::array();
  for (std::size_t b = 0; b < r.cell_counts.size(); ++b)
    cells.push_back({{"assignment", Assignment(std::uint32_t(b)).to_assignment_string(r.j)}, {"count", r.cell_counts[b]}});
  j["cell_counts"] = cells;
  j["rank"] = r.rank;
  j["min_singular_value"] = r.min_singular_value;
  j["max_singular_value"] = r.max_singular_value;
  j["singular_values"] = to_json(r.singular_values);
  j["covariance"] = to_json(r.covariance);
  j["recommended_family"] = r.recommended_family ? family_json(*r.recommended_family) : Json();
  return j;
}

inline Json record_json(const MonotonicityRecord& r, int j) {
  Json o;
  o["instrument"] = r.instrument;
  o["context"] = context_string(r.context, r.instrument, j);
  o["delta"] = r.delta;
  o["se"] = r.se ? Json(*r.se) : Json();
  o["t_stat"] = r.t_stat ? Json(*r.t_stat) : Json();
  o["significant_negative"] = r.significant_negative;
  return o;
}

inline Json to_json(const MonotonicityReport& r) {
  Json j;
  Json recs = Json::array();
  for (const auto& rec : r.records) recs.push_back(record_json(rec, r.j));
  Json unr = Json::array();
  for (const auto& rec : r.unrealized) unr.push_back(record_json(rec, r.j));
  j["inequalities"] = r.records.size() + r.unrealized.size();
  j["records"] = recs;
  j["unrealized"] = unr;
  j["any_negative"] = r.any_negative();
  j["multiplicity_corrected"] = false;
  return j;
}

inline Json to_json(const GroupShareBounds& b) {
  return Json{{"always_taker", b.always_taker}, {"never_taker", b.never_taker},
              {"first_only", to_json(b.first_only)}, {"second_only", to_json(b.second_only)},
              {"eager", to_json(b.eager)},           {"reluctant", to_json(b.reluctant)},
              {"consistent", b.consistent}};
}

inline Json to_json(const EstimateResult& r) {
  Json j;
  j["estimand"] = r.estimand;
  j["point"] = r.point;
  j["se"] = r.se ? Json(*r.se) : Json();
  j["ci95"] = r.ci95 ? to_json(*r.ci95) : Json();
  j["complier_share"] = r.complier_share;
  j["alpha"] = r.alpha;
  j["n"] = r.n;
  j["warnings"] = r.warnings;
  const auto& d = r.diagnostics;
  Json diag;
  diag["lambda"] = to_json(d.lambda);
  diag["numerator"] = d.numerator;
  diag["share_se"] = d.share_se;
  diag["share_t"] = d.share_t;
  diag["h"] = d.h ? Json{{"mean", d.h->mean}, {"sd", d.h->sd}} : Json();
  if (d.alpha_selection) {
    const auto& s = *d.alpha_selection;
    diag["alpha_selection"] = {{"scale", s.scale},
                               {"mse_at_zero", s.mse_at_zero},
                               {"mse_at_alpha", s.mse_at_alpha},
                               {"interior_minimum", s.interior_minimum},
                               {"degenerate_residuals", s.degenerate_residuals}};
  } else {
    diag["alpha_selection"] = Json();
  }
  diag["variance_method"] = d.variance_method;
  diag["bootstrap_used"] = d.bootstrap_used;
  diag["bootstrap_excluded"] = d.bootstrap_excluded;
  diag["dropped_controls"] = d.dropped_controls;
  j["diagnostics"] = diag;
  return j;
}

inline Json to_json(const AteBounds& b) {
  Json j;
  j["p_always"] = b.p_always;
  j["p_never"] = b.p_never;
  j["acl"] = b.acl;
  j["ate"] = to_json(b.ate);
  j["att"] = b.att ? to_json(*b.att) : Json();
  j["atu"] = b.atu ? to_json(*b.atu) : Json();
  return j;
}

inline Json to_json(const RunReport& r, bool timestamp = true) {
  Json j;
  j["schema"] = kReportSchema;
  j["tool_version"] = kToolVersion;
  if (timestamp) j["generated_at"] = utc_timestamp();
  j["command"] = r.config.command;
  j["config"] = r.config.to_json();
  j["data"] = {{"n", r.n}, {"instruments", r.design.names}, {"family", family_json(r.design.family)},
               {"flipped", r.flipped}};
  j["support"] = r.support ? to_json(*r.support) : Json();
  j["vm_test"] = r.vm_test ? to_json(*r.vm_test) : Json();
  j["group_bounds"] = r.group_bounds ? to_json(*r.group_bounds) : Json();
  if (r.config.command == "estimate") {
    Json res = Json::array();
    for (const auto& e : r.results) res.push_back(to_json(e));
    j["results"] = res;
    j["ate_bounds"] = r.ate ? to_json(*r.ate) : Json();
  }
  j["warnings"] = r.warnings;
  return j;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string report_csv(const RunReport& r) {
  std::string out = "estimand,point,se,ci_lo,ci_hi,complier_share,alpha,n,warnings\n";
  auto num = [](const std::optional<double>& v) { return v ? format_double17(*v) : std::string(); };
  for (const auto& e : r.results) {
    std::string warn;
    for (const auto& w : e.warnings) warn += (warn.empty() ? "" : ";") + w;
    out += csv_field(e.estimand) + "," + format_double17(e.point) + "," + num(e.se) + "," +
           num(e.ci95 ? std::optional<double>(e.ci95->lo) : std::nullopt) + "," +
           num(e.ci95 ? std::optional<double>(e.ci95->hi) : std::nullopt) + "," + format_double17(e.complier_share) +
           "," + format_double17(e.alpha) + "," + std::to_string(e.n) + "," + csv_field(warn) + "\n";
  }
  return out;
}

// Cell propensities indexed by assignment bitmask; NaN for empty cells.
inline std::vector<double> cell_propensities(const Dataset& data) {
  const int j = data.instruments();
  std::vector<double> sum(std::size_t(1) << j, 0.0), cnt(std::size_t(1) << j, 0.0);
  const auto rows = row_assignments(data.z);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sum[rows[i].bits()] += data.d(Eigen::Index(i));
    cnt[rows[i].bits()] += 1;
  }
  for (std::size_t b = 0; b < sum.size(); ++b)
    sum[b] = cnt[b] > 0 ? sum[b] / cnt[b] : std::numeric_limits<double>::quiet_NaN();
  return sum;
}

// Ingest, diagnose and (for "estimate") estimate every requested estimand.
// Weak identification propagates as WeakIdentificationError.
inline RunReport run(const RunConfig& config, const Dataset* preloaded = nullptr, unsigned workers = 0) {
  if (config.command != "estimate" && config.command != "diagnose")
    throw InvalidArgument("run() handles estimate and diagnose, not '" + config.command + "'");
  RunReport rep;
  rep.config = config;
  rep.config.se = config.resolved_se();

  IngestResult in;
  if (preloaded) {
    in.data = *preloaded;
    in.design.j = preloaded->instruments();
    in.design.names = preloaded->instrument_names;
    in.design.sources.assign(std::size_t(in.design.j), std::nullopt);
    in.design.family = default_family(in.design.j);
    in.data.validate();
  } else {
    if (config.data.empty()) throw InputError("no input data given");
    in = ingest_csv(config.data, config.roles);
  }
  Dataset& data = in.data;
  rep.design = in.design;
  rep.n = data.n();
  const int j = data.instruments();

  if (config.auto_orient) {
    rep.flipped = orient_instruments(data);
    if (!rep.flipped.empty()) rep.warnings.push_back("instrument_auto_oriented");
  }

  rep.support = support_report(data.z, rep.design.family, rep.design.sources);
  try {
    rep.vm_test = vm_propensity_test(data.d, data.z, data.x);
  } catch (const SingularDesignError&) {
    rep.warnings.push_back("vm_test_unavailable");
  }
  if (j == 2) {
    const auto p = cell_propensities(data);
    const bool all_cells = std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
    if (all_cells) rep.group_bounds = two_instrument_group_bounds(p);
  }
  if (config.command == "diagnose") return rep;

  const Regularization reg = parse_regularization(config.regularize);
  const VarianceOptions var = parse_variance(rep.config.se, config.seed);
  if (config.estimands.empty()) throw InvalidArgument("no estimands requested");
  std::vector<Estimand> estimands;
  for (const auto& text : config.estimands) estimands.push_back(parse_estimand(text, j));
  for (std::size_t e = 0; e < estimands.size(); ++e) {
    EstimandSpec spec{estimands[e], reg, var};
    spec.variance.seed = derive_seed(config.seed, e);
    auto res = estimate(data, rep.design.family, spec, workers);
    res.estimand = trim(config.estimands[e]);
    for (const auto& w : res.warnings)
      if (std::find(rep.warnings.begin(), rep.warnings.end(), w) == rep.warnings.end()) rep.warnings.push_back(w);
    rep.results.push_back(std::move(res));
  }
  if (config.outcome_bounds) rep.ate = ate_bounds(data, config.outcome_bounds->lo, config.outcome_bounds->hi, rep.design.family);
  return rep;
}

// Monte Carlo estimator names: vm (alpha chosen by MSE), vm0 (alpha = 0),
// wald, tsls.
inline std::vector<McEstimator> parse_estimators(const std::string& list, const Estimand& estimand,
                                                 const VarianceOptions& var) {
  std::vector<McEstimator> out;
  for (const auto& name : split(list, ',')) {
    if (name == "vm")
      out.push_back(vm_estimator("vm", estimand, Regularization::automatic(), var));
    else if (name == "vm0")
      out.push_back(vm_estimator("vm0", estimand, Regularization::none(), var));
    else if (name == "wald")
      out.push_back(wald_estimator());
    else if (name == "tsls")
      out.push_back(tsls_estimator());
    else
      throw InvalidArgument("unknown estimator '" + name + "' (expected vm, vm0, wald or tsls)");
  }
  return out;
}

// three:1 | three:2 | two | file:<path>
inline DgpSpec parse_dgp(const std::string& text) {
  const std::string t = trim(text);
  if (t == "three:1") return three_instrument_spec(1);
  if (t == "three:2") return three_instrument_spec(2);
  if (t == "two") return two_instrument_spec();
  if (t.rfind("file:", 0) == 0) {
    const std::string path = t.substr(5);
    std::ifstream in(path);
    if (!in) throw InputError("cannot open DGP description '" + path + "'");
    try {
      return dgp_from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
      throw InputError("DGP description '" + path + "' is not valid JSON: " + e.what());
    }
  }
  throw InvalidArgument("--dgp expects three:1, three:2, two or file:<path>, got '" + t + "'");
}

inline std::vector<std::pair<std::string, std::optional<double>>> summary_metrics(const EstimatorSummary& s) {
  return {{"oracle", s.oracle},
          {"oracle_share", s.oracle_share},
          {"mean", s.mean},
          {"bias", s.bias},
          {"sd", s.sd},
          {"rmse", s.rmse},
          {"mc_se", s.mc_se},
          {"mean_share", s.mean_share},
          {"share_mc_se", s.share_mc_se},
          {"mean_alpha", s.mean_alpha},
          {"coverage", s.coverage},
          {"mean_se", s.mean_se},
          {"used", double(s.used)},
          {"failures", double(s.failures)}};
}

inline std::string monte_carlo_csv(const McResult& r) {
  std::string out = "estimator,metric,value\n";
  for (const auto& s : r.estimators)
    for (const auto& [metric, value] : summary_metrics(s))
      out += csv_field(s.name) + "," + metric + "," + (value ? format_double17(*value) : std::string()) + "\n";
  return out;
}

inline Json monte_carlo_json(const McResult& r) {
  Json j;
  j["schema"] = kReportSchema;
  j["tool_version"] = kToolVersion;
  j["command"] = "simulate";
  j["dgp"] = r.dgp;
  j["n"] = r.n;
  j["reps"] = r.reps;
  j["seed"] = r.seed;
  Json ests = Json::array();
  for (const auto& s : r.estimators) {
    Json e;
    e["estimator"] = s.name;
    for (const auto& [metric, value] : summary_metrics(s)) e[metric] = value ? Json(*value) : Json();
    ests.push_back(e);
  }
  j["estimators"] = ests;
  return j;
}

// A simulated dataset as CSV with columns y,d,z1..zJ,group (canonical group index).
inline std::string dataset_csv(const SimulatedData& sim) {
  std::string out = "y,d";
  const int j = sim.data.instruments();
  for (int k = 1; k <= j; ++k) out += ",z" + std::to_string(k);
  out += ",group\n";
  for (Eigen::Index i = 0; i < sim.data.n(); ++i) {
    out += format_double17(sim.data.y(i)) + "," + std::to_string(int(sim.data.d(i)));
    for (int k = 0; k < j; ++k) out += "," + std::to_string(int(sim.data.z(i, k)));
    out += "," + std::to_string(sim.groups[std::size_t(i)]) + "\n";
  }
  return out;
}

inline void write_output(const std::string& text, const OutputTarget& target) {
  if (!target.path) {
    std::cout << text;
    return;
  }
  std::ofstream f(*target.path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + *target.path + "'");
  f << text;
}

}  // namespace vmiv
