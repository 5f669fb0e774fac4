#pragma once

// CSV ingestion into a validated Dataset, JSON serialization with 17
// significant digits, and DGP descriptions read from JSON.

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vmiv/dataset.hpp"
#include "vmiv/design.hpp"
#include "vmiv/error.hpp"
#include "vmiv/simulation.hpp"

namespace vmiv {

using Json = nlohmann::ordered_json;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw InputError("missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw InputError("unterminated quote on line " + std::to_string(line_no));
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv_stream(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (t.header.empty()) {
      if (line.empty()) continue;
      t.header = split_csv_line(line, line_no);
      std::set<std::string> seen;
      for (const auto& h : t.header)
        if (!seen.insert(h).second) throw InputError("duplicate column '" + h + "' in header");
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (fields.size() != t.header.size())
      throw InputError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw InputError("CSV file has no header");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv_stream(in);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing_token(const std::string& s) {
  const std::string t = trim(s);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "." || t == "null";
}

inline std::optional<double> parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string describe_rows(const std::vector<std::size_t>& rows) {
  std::string s;
  const std::size_t shown = std::min<std::size_t>(rows.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) s += (i ? "," : "") + std::to_string(rows[i]);
  if (rows.size() > shown) s += ",... (" + std::to_string(rows.size()) + " rows)";
  return s;
}

struct DiscretizeRule {
  std::string column;
  std::vector<double> cuts;
  int direction = 1;
};

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> instruments;
  std::vector<std::string> controls;
  std::vector<DiscretizeRule> discretize;
};

struct IngestResult {
  Dataset data;
  InstrumentDesign design;
};

// Reads numeric columns by role. Missing values anywhere in a used column are
// an error listing 1-based data rows; treatment and binary instruments must be 0/1.
inline IngestResult ingest_table(const CsvTable& t, const ColumnRoles& roles) {
  if (roles.outcome.empty() || roles.treatment.empty()) throw InputError("outcome and treatment columns are required");
  if (roles.instruments.empty() && roles.discretize.empty()) throw InputError("at least one instrument is required");
  std::set<std::string> used;
  auto claim = [&](const std::string& c) {
    if (!used.insert(c).second) throw InputError("column '" + c + "' is assigned more than one role");
  };
  claim(roles.outcome);
  claim(roles.treatment);
  for (const auto& c : roles.instruments) claim(c);
  for (const auto& r : roles.discretize) claim(r.column);
  for (const auto& c : roles.controls) claim(c);

  const Eigen::Index n = Eigen::Index(t.rows.size());
  if (n == 0) throw InputError("CSV file has no data rows");
  auto numeric = [&](const std::string& name) {
    const std::size_t c = t.column(name);
    Eigen::VectorXd v(n);
    std::vector<std::size_t> missing, bad;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& cell = t.rows[std::size_t(i)][c];
      if (is_missing_token(cell)) {
        missing.push_back(std::size_t(i) + 1);
        continue;
      }
      auto val = parse_double(cell);
      if (!val) {
        bad.push_back(std::size_t(i) + 1);
        continue;
      }
      v(i) = *val;
    }
    if (!missing.empty()) throw InputError("missing values in column '" + name + "' at rows " + describe_rows(missing));
    if (!bad.empty()) throw InputError("non-numeric values in column '" + name + "' at rows " + describe_rows(bad));
    return v;
  };
  auto binary = [&](const std::string& name) {
    Eigen::VectorXd v = numeric(name);
    std::vector<std::size_t> bad;
    for (Eigen::Index i = 0; i < n; ++i)
      if (v(i) != 0.0 && v(i) != 1.0) bad.push_back(std::size_t(i) + 1);
    if (!bad.empty()) throw InputError("column '" + name + "' must be 0/1; offending rows " + describe_rows(bad));
    return v;
  };

  IngestResult out;
  out.data.y = numeric(roles.outcome);
  out.data.d = binary(roles.treatment);
  std::vector<Eigen::VectorXd> cols;
  for (const auto& name : roles.instruments) {
    cols.push_back(binary(name));
    out.design.names.push_back(name);
    out.design.sources.emplace_back(std::nullopt);
  }
  for (const auto& rule : roles.discretize) {
    const auto disc = discretize_instrument(numeric(rule.column), rule.cuts, rule.direction, rule.column);
    for (Eigen::Index m = 0; m < disc.columns.cols(); ++m) {
      cols.push_back(disc.columns.col(m));
      out.design.names.push_back(disc.names[std::size_t(m)]);
      out.design.sources.emplace_back(disc.sources[std::size_t(m)]);
    }
  }
  check_instrument_count(int(cols.size()));
  out.data.z.resize(n, Eigen::Index(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.data.z.col(Eigen::Index(c)) = cols[c];
  out.data.instrument_names = out.design.names;
  if (!roles.controls.empty()) {
    out.data.x.resize(n, Eigen::Index(roles.controls.size()));
    for (std::size_t c = 0; c < roles.controls.size(); ++c) out.data.x.col(Eigen::Index(c)) = numeric(roles.controls[c]);
    out.data.control_names = roles.controls;
  }
  out.design.j = int(cols.size());
  out.design.family = default_family(out.design.j, out.design.sources);
  out.data.validate();
  return out;
}

inline IngestResult ingest_csv(const std::string& path, const ColumnRoles& roles) {
  return ingest_table(read_csv(path), roles);
}

inline std::string format_double17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline void write_json(const Json& j, std::string& out, int indent, int depth) {
  const std::string pad(std::size_t(indent * (depth + 1)), ' ');
  const std::string close_pad(std::size_t(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad + Json(it.key()).dump() + (indent > 0 ? ": " : ":");
        write_json(it.value(), out, indent, depth + 1);
      }
      out += nl + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad;
        write_json(v, out, indent, depth + 1);
      }
      out += nl + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_double17(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

// Serializes with every floating-point value printed to 17 significant digits.
inline std::string dump_json(const Json& j, int indent = 2) {
  std::string out;
  detail::write_json(j, out, indent, 0);
  return out;
}

inline SpernerFamily family_from_json(const Json& j) {
  std::vector<InstrumentSet> sets;
  for (const auto& s : j) sets.push_back(InstrumentSet::from_indices(s.get<std::vector<int>>()));
  return SpernerFamily::from_sets(sets);
}

// {"name": ..., "j": J, "groups": [{"family": [[1],[2]] | "never" | "always",
//   "probability": p, "y0_base": a, "y0_scale": s, "effect": e, "effect_noise": v}, ...],
//  "instruments": {"law": "bernoulli", "p": [...]}
//               | {"law": "conditional", "p": [...], "trigger": t, "target": u, "target_prob": q}
//               | {"law": "latent_gaussian", "correlation": [[...]], "thresholds": [...]}}
// Groups that are not listed get probability zero.
inline DgpSpec dgp_from_json(const Json& j) {
  try {
    DgpSpec s;
    s.name = j.value("name", std::string("file"));
    s.j = j.at("j").get<int>();
    check_instrument_count(s.j);
    if (s.j > 5) throw InvalidArgument("simulation supports at most 5 instruments");
    const GroupCatalog cat(s.j);
    s.group_probabilities.assign(cat.size(), 0.0);
    s.outcomes.assign(cat.size(), GroupOutcome{});
    std::set<std::size_t> seen;
    for (const auto& g : j.at("groups")) {
      std::size_t idx = 0;
      const auto& fam = g.at("family");
      if (fam.is_string()) {
        const auto name = fam.get<std::string>();
        if (name == "never")
          idx = cat.never_taker_index();
        else if (name == "always")
          idx = cat.always_taker_index();
        else
          throw InvalidArgument("unknown group name '" + name + "'");
      } else {
        idx = cat.index_of(family_from_json(fam));
      }
      if (!seen.insert(idx).second) throw InvalidArgument("group " + cat[idx].to_string() + " listed twice");
      s.group_probabilities[idx] = g.at("probability").get<double>();
      auto& o = s.outcomes[idx];
      o.y0_base = g.value("y0_base", 0.0);
      o.y0_scale = g.value("y0_scale", 1.0);
      o.effect = g.value("effect", 0.0);
      o.effect_noise = g.value("effect_noise", 0.0);
    }
    const auto& law = j.at("instruments");
    const auto kind = law.at("law").get<std::string>();
    if (kind == "bernoulli") {
      s.law = BernoulliLaw{law.at("p").get<std::vector<double>>()};
    } else if (kind == "conditional") {
      s.law = ConditionalLaw{law.at("p").get<std::vector<double>>(), law.at("trigger").get<int>(),
                             law.at("target").get<int>(), law.at("target_prob").get<double>()};
    } else if (kind == "latent_gaussian") {
      const auto rows = law.at("correlation").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd corr(Eigen::Index(rows.size()), Eigen::Index(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw InvalidArgument("correlation matrix must be square");
        for (std::size_t c = 0; c < rows.size(); ++c) corr(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
      }
      s.law = LatentGaussianLaw{corr, law.at("thresholds").get<std::vector<double>>()};
    } else {
      throw InvalidArgument("unknown instrument law '" + kind + "'");
    }
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw InputError(std::string("invalid DGP description: ") + e.what());
  }
}

}  // namespace vmiv
