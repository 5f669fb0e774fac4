#pragma once

// Instrument design: discretization of multivalued instruments into threshold
// indicators, the family of instrument interactions used as regressors, the
// inverse-interaction matrix, support diagnostics and monotonicity checks on
// fitted propensities.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vmiv/combinatorics.hpp"
#include "vmiv/dataset.hpp"
#include "vmiv/error.hpp"
#include "vmiv/linalg.hpp"

namespace vmiv {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

// Where a binary instrument came from when it is a threshold indicator.
struct SourceInfo {
  std::string column;
  double threshold = 0.0;
  int direction = 1;  // +1: 1(value >= threshold); -1: 1(value < threshold)
};

struct InstrumentDesign {
  int j = 0;
  std::vector<std::string> names;
  std::vector<std::optional<SourceInfo>> sources;
  std::vector<InstrumentSet> family;
};

struct DiscretizedInstrument {
  Eigen::MatrixXd columns;
  std::vector<SourceInfo> sources;
  std::vector<std::string> names;
};

inline DiscretizedInstrument discretize_instrument(const Eigen::VectorXd& values, const std::vector<double>& cuts,
                                                   int direction, const std::string& column = "source") {
  if (cuts.empty()) throw InvalidArgument("at least one cut point is required for " + column);
  if (direction != 1 && direction != -1) throw InvalidArgument("direction must be +1 or -1");
  for (std::size_t m = 0; m < cuts.size(); ++m) {
    if (!std::isfinite(cuts[m])) throw InvalidArgument("cut points must be finite");
    if (m > 0 && !(cuts[m] > cuts[m - 1])) throw InvalidArgument("cut points must be strictly ascending");
  }
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values(i)))
      throw InputError("non-finite value in " + column + " at row " + std::to_string(i + 1));

  DiscretizedInstrument out;
  out.columns.resize(values.size(), Eigen::Index(cuts.size()));
  for (std::size_t m = 0; m < cuts.size(); ++m) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const bool above = values(i) >= cuts[m];
      out.columns(i, Eigen::Index(m)) = (direction == 1 ? above : !above) ? 1.0 : 0.0;
    }
    out.sources.push_back({column, cuts[m], direction});
    out.names.push_back(column + (direction == 1 ? ">=" : "<") + format_number(cuts[m]));
  }
  return out;
}

// All nonempty instrument subsets, except those combining two thresholds of
// the same multivalued source (their products duplicate a single threshold).
inline std::vector<InstrumentSet> default_family(int j, const std::vector<std::optional<SourceInfo>>& sources = {}) {
  check_instrument_count(j);
  if (!sources.empty() && int(sources.size()) != j) throw InvalidArgument("source map length must equal J");
  std::vector<InstrumentSet> out;
  for (auto s : canonical_subsets(j, false)) {
    bool ok = true;
    if (!sources.empty()) {
      const auto idx = s.indices();
      for (std::size_t a = 0; a < idx.size() && ok; ++a)
        for (std::size_t b = a + 1; b < idx.size() && ok; ++b) {
          const auto& sa = sources[std::size_t(idx[a] - 1)];
          const auto& sb = sources[std::size_t(idx[b] - 1)];
          if (sa && sb && sa->column == sb->column) ok = false;
        }
    }
    if (ok) out.push_back(s);
  }
  return out;
}

inline void check_family(int j, const std::vector<InstrumentSet>& family) {
  if (family.empty()) throw InvalidArgument("instrument family is empty");
  for (std::size_t a = 0; a < family.size(); ++a) {
    if (family[a].empty()) throw InvalidArgument("instrument family must not contain the empty set");
    if (!family[a].fits(j)) throw InvalidArgument("family member " + family[a].to_string() + " exceeds J");
    for (std::size_t b = 0; b < a; ++b)
      if (family[a] == family[b]) throw InvalidArgument("duplicate family member " + family[a].to_string());
  }
}

// Columns Z_S = prod_{j in S} Z_j for S in the family (no intercept).
inline Eigen::MatrixXd build_gamma(const std::vector<Assignment>& rows, const std::vector<InstrumentSet>& family) {
  Eigen::MatrixXd g(Eigen::Index(rows.size()), Eigen::Index(family.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < family.size(); ++c)
      g(Eigen::Index(i), Eigen::Index(c)) = family[c].subset_of(rows[i]) ? 1.0 : 0.0;
  return g;
}

inline Eigen::MatrixXd build_gamma(const Eigen::MatrixXd& z, const std::vector<InstrumentSet>& family) {
  check_instrument_count(int(z.cols()));
  check_family(int(z.cols()), family);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      if (z(i, c) != 0.0 && z(i, c) != 1.0) throw InputError("instruments must be 0/1");
  return build_gamma(row_assignments(z), family);
}

// Rows: all subsets S (including the empty set) in canonical order.
// Columns: assignments z in bitmask order. Entry (-1)^{|S \ z|} when z's
// switched-on set is contained in S, else 0, so that (1, Gamma(z')) A = e_{z'}.
struct InteractionInverse {
  int j = 0;
  std::vector<InstrumentSet> rows;
  std::vector<Assignment> columns;
  Eigen::MatrixXi entries;
};

inline InteractionInverse build_a(int j) {
  check_instrument_count(j);
  if (j > 12) throw InvalidArgument("interaction inverse is limited to 12 instruments");
  InteractionInverse a;
  a.j = j;
  a.rows = canonical_subsets(j, true);
  for (std::uint32_t b = 0; b < (1u << j); ++b) a.columns.emplace_back(b);
  a.entries = Eigen::MatrixXi::Zero(Eigen::Index(a.rows.size()), Eigen::Index(a.columns.size()));
  for (std::size_t r = 0; r < a.rows.size(); ++r)
    for (std::size_t c = 0; c < a.columns.size(); ++c) {
      const auto on = a.columns[c];
      if (on.subset_of(a.rows[r]))
        a.entries(Eigen::Index(r), Eigen::Index(c)) = (a.rows[r].minus(on).size() % 2 == 0) ? 1 : -1;
    }
  return a;
}

enum class SupportStatus {
  full_support,     // every assignment cell observed and interactions of full rank
  family_rank_ok,   // some cells empty, but the chosen family still has full rank
  rank_deficient,
};

inline const char* to_string(SupportStatus s) {
  switch (s) {
    case SupportStatus::full_support:
      return "full_support";
    case SupportStatus::family_rank_ok:
      return "family_rank_ok";
    case SupportStatus::rank_deficient:
      return "rank_deficient";
  }
  return "";
}

struct SupportReport {
  int j = 0;
  std::vector<std::size_t> cell_counts;  // indexed by assignment bitmask
  Eigen::MatrixXd covariance;
  Eigen::VectorXd singular_values;
  int rank = 0;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
  SupportStatus status = SupportStatus::rank_deficient;
  std::optional<std::vector<InstrumentSet>> recommended_family;
};

inline SupportReport support_report(const Eigen::MatrixXd& z, const std::vector<InstrumentSet>& family,
                                    const std::vector<std::optional<SourceInfo>>& sources = {}) {
  const int j = int(z.cols());
  const auto rows = row_assignments(z);
  SupportReport rep;
  rep.j = j;
  rep.cell_counts.assign(std::size_t(1) << j, 0);
  for (auto a : rows) ++rep.cell_counts[a.bits()];

  const Eigen::MatrixXd g = build_gamma(z, family);
  const Eigen::MatrixXd centered = g.rowwise() - g.colwise().mean();
  rep.covariance = centered.transpose() * centered / double(std::max<Eigen::Index>(g.rows(), 1));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rep.covariance);
  rep.singular_values = svd.singularValues();
  rep.max_singular_value = rep.singular_values.size() ? rep.singular_values.maxCoeff() : 0.0;
  rep.min_singular_value = rep.singular_values.size() ? rep.singular_values.minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i)
    if (rep.singular_values(i) > kRankTolerance * rep.max_singular_value && rep.singular_values(i) > 0) ++rep.rank;

  const bool all_cells = std::all_of(rep.cell_counts.begin(), rep.cell_counts.end(), [](std::size_t c) { return c > 0; });
  const bool full_rank = rep.rank == int(family.size());
  if (full_rank)
    rep.status = all_cells ? SupportStatus::full_support : SupportStatus::family_rank_ok;
  else
    rep.status = SupportStatus::rank_deficient;

  if (!full_rank && !sources.empty()) {
    auto reduced = default_family(j, sources);
    if (reduced != family) rep.recommended_family = std::move(reduced);
  }
  return rep;
}

// One-instrument shift in fitted propensity, holding the others at `context`.
struct MonotonicityRecord {
  int instrument = 0;
  Assignment context;  // values of the other instruments (this instrument's bit is 0)
  double delta = 0.0;
  std::optional<double> se;
  std::optional<double> t_stat;
  bool significant_negative = false;  // t below -1.96
};

struct MonotonicityReport {
  int j = 0;
  std::vector<MonotonicityRecord> records;
  std::vector<MonotonicityRecord> unrealized;  // pairs with an empty cell, not reported
  bool any_negative() const {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.delta < 0; });
  }
};

// Differences from a table of propensities indexed by assignment bitmask.
inline MonotonicityReport propensity_differences(const std::vector<double>& propensity, int j) {
  check_instrument_count(j);
  if (propensity.size() != (std::size_t(1) << j)) throw InvalidArgument("propensity table must have 2^J entries");
  MonotonicityReport rep;
  rep.j = j;
  for (int instr = 1; instr <= j; ++instr)
    for (std::uint32_t b = 0; b < (1u << j); ++b) {
      const Assignment ctx(b);
      if (ctx.contains(instr)) continue;
      MonotonicityRecord r;
      r.instrument = instr;
      r.context = ctx;
      r.delta = propensity[ctx.with(instr, true).bits()] - propensity[ctx.bits()];
      rep.records.push_back(r);
    }
  return rep;
}

// Fits D on cell indicators (saturated in Z) plus centered controls, so fitted
// propensities are evaluated at the mean of X, and reports each realizable
// one-instrument shift with a heteroskedasticity-robust standard error.
inline MonotonicityReport vm_propensity_test(const Eigen::VectorXd& d, const Eigen::MatrixXd& z,
                                             const Eigen::MatrixXd& x = Eigen::MatrixXd()) {
  const int j = int(z.cols());
  check_instrument_count(j);
  if (d.size() != z.rows()) throw InvalidArgument("treatment and instruments differ in length");
  if (x.cols() > 0 && x.rows() != z.rows()) throw InvalidArgument("controls differ in length");
  const auto rows = row_assignments(z);
  const std::size_t cells = std::size_t(1) << j;
  std::vector<Eigen::Index> column_of(cells, -1);
  Eigen::Index k = 0;
  for (auto a : rows)
    if (column_of[a.bits()] < 0) column_of[a.bits()] = 0;
  for (std::size_t c = 0; c < cells; ++c)
    if (column_of[c] == 0) column_of[c] = k++;

  const Eigen::Index n = z.rows();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, k + x.cols());
  for (Eigen::Index i = 0; i < n; ++i) w(i, column_of[rows[std::size_t(i)].bits()]) = 1.0;
  if (x.cols() > 0) w.rightCols(x.cols()) = x.rowwise() - x.colwise().mean();

  LeastSquares ls(w);
  ls.require_full_rank("propensity regression design");
  const Eigen::VectorXd beta = ls.solve(d);
  const Eigen::VectorXd e = d - w * beta;
  const Eigen::MatrixXd meat = w.transpose() * e.array().square().matrix().asDiagonal() * w;
  const Eigen::MatrixXd half = ls.normal_solve(meat);
  const Eigen::MatrixXd cov = ls.normal_solve(half.transpose());

  MonotonicityReport rep;
  rep.j = j;
  for (int instr = 1; instr <= j; ++instr)
    for (std::uint32_t b = 0; b < cells; ++b) {
      const Assignment ctx(b);
      if (ctx.contains(instr)) continue;
      MonotonicityRecord r;
      r.instrument = instr;
      r.context = ctx;
      const Eigen::Index hi = column_of[ctx.with(instr, true).bits()];
      const Eigen::Index lo = column_of[ctx.bits()];
      if (hi < 0 || lo < 0) {
        rep.unrealized.push_back(r);
        continue;
      }
      r.delta = beta(hi) - beta(lo);
      const double var = cov(hi, hi) + cov(lo, lo) - 2.0 * cov(hi, lo);
      r.se = std::sqrt(std::max(var, 0.0));
      if (*r.se > 0)
        r.t_stat = r.delta / *r.se;
      else
        r.t_stat = r.delta == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.delta);
      r.significant_negative = *r.t_stat < -1.96;
      rep.records.push_back(r);
    }
  return rep;
}

// Shares of the six groups with two instruments, from the four propensities
// indexed by bitmask (P00, P10, P01, P11). The always/never-taker shares are
// point identified; the four complier shares are sharp intervals.
struct GroupShareBounds {
  double always_taker = 0.0;
  double never_taker = 0.0;
  Interval first_only;   // responds to instrument 1 alone
  Interval second_only;  // responds to instrument 2 alone
  Interval eager;        // responds to either
  Interval reluctant;    // needs both
  bool consistent = true;
};

inline GroupShareBounds two_instrument_group_bounds(const std::vector<double>& propensity) {
  if (propensity.size() != 4) throw InvalidArgument("two-instrument bounds need four propensities");
  for (double p : propensity)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("propensities must lie in [0,1]");
  const double p00 = propensity[0], p10 = propensity[1], p01 = propensity[2], p11 = propensity[3];
  const double a = p10 - p00;  // first_only + eager
  const double b = p01 - p00;  // second_only + eager
  const double c = p11 - p01;  // first_only + reluctant
  const double d = p11 - p10;  // second_only + reluctant
  GroupShareBounds out;
  out.always_taker = p00;
  out.never_taker = 1.0 - p11;
  out.eager = {std::max(0.0, a - c), std::min(a, b)};
  out.first_only = {std::max(0.0, a - b), std::min(a, c)};
  out.second_only = {std::max(0.0, b - a), std::min(b, d)};
  out.reluctant = {std::max(0.0, c - a), std::min(c, d)};
  out.consistent = !(out.eager.empty() || out.first_only.empty() || out.second_only.empty() || out.reluctant.empty());
  return out;
}

// Difference in mean treatment between Z_j = 1 and Z_j = 0 for each column.
inline Eigen::VectorXd marginal_first_stage(const Eigen::VectorXd& d, const Eigen::MatrixXd& z) {
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    double s1 = 0, s0 = 0, n1 = 0, n0 = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (z(i, c) != 0.0) {
        s1 += d(i);
        n1 += 1;
      } else {
        s0 += d(i);
        n0 += 1;
      }
    }
    out(c) = (n1 > 0 && n0 > 0) ? s1 / n1 - s0 / n0 : 0.0;
  }
  return out;
}

// Flips instrument columns with a negative marginal first stage. Returns the
// flipped 1-based indices.
inline std::vector<int> orient_instruments(Dataset& data) {
  std::vector<int> flipped;
  const Eigen::VectorXd fs = marginal_first_stage(data.d, data.z);
  for (Eigen::Index c = 0; c < data.z.cols(); ++c)
    if (fs(c) < 0) {
      data.z.col(c) = (1.0 - data.z.col(c).array()).matrix();
      flipped.push_back(int(c) + 1);
    }
  return flipped;
}

}  // namespace vmiv
