#pragma once

// Compliance groups under vector monotonicity: Sperner families of instrument
// subsets, their selection functions, the inclusion-exclusion matrix linking
// general groups to single-set groups, and the linear restriction on
// complier-weight functions that makes a target parameter identifiable.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vmiv/error.hpp"

namespace vmiv {

inline constexpr int kMaxInstruments = 16;

// A subset of {1..J}, stored as a bitmask (bit j-1 is instrument j). Also used
// for an instrument assignment z, identified with its set of switched-on
// instruments.
class InstrumentSet {
 public:
  constexpr InstrumentSet() = default;
  constexpr explicit InstrumentSet(std::uint32_t bits) : bits_(bits) {}

  static InstrumentSet of(std::initializer_list<int> indices) {
    std::uint32_t b = 0;
    for (int i : indices) {
      if (i < 1 || i > kMaxInstruments) throw InvalidArgument("instrument index out of range: " + std::to_string(i));
      b |= 1u << (i - 1);
    }
    return InstrumentSet(b);
  }
  static InstrumentSet of(int index) { return of({index}); }
  static InstrumentSet from_indices(const std::vector<int>& indices) {
    std::uint32_t b = 0;
    for (int i : indices) {
      if (i < 1 || i > kMaxInstruments) throw InvalidArgument("instrument index out of range: " + std::to_string(i));
      b |= 1u << (i - 1);
    }
    return InstrumentSet(b);
  }
  static constexpr InstrumentSet all(int j) { return InstrumentSet(j >= 32 ? ~0u : (1u << j) - 1u); }

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(int index) const { return index >= 1 && index <= 32 && ((bits_ >> (index - 1)) & 1u); }
  constexpr bool subset_of(InstrumentSet o) const { return (bits_ & ~o.bits_) == 0; }
  constexpr bool intersects(InstrumentSet o) const { return (bits_ & o.bits_) != 0; }
  constexpr bool fits(int j) const { return j >= 32 || (bits_ >> j) == 0; }

  constexpr InstrumentSet operator|(InstrumentSet o) const { return InstrumentSet(bits_ | o.bits_); }
  constexpr InstrumentSet operator&(InstrumentSet o) const { return InstrumentSet(bits_ & o.bits_); }
  constexpr InstrumentSet minus(InstrumentSet o) const { return InstrumentSet(bits_ & ~o.bits_); }
  constexpr InstrumentSet with(int index, bool on) const {
    std::uint32_t m = 1u << (index - 1);
    return InstrumentSet(on ? (bits_ | m) : (bits_ & ~m));
  }

  std::vector<int> indices() const {
    std::vector<int> out;
    for (int i = 0; i < 32; ++i)
      if ((bits_ >> i) & 1u) out.push_back(i + 1);
    return out;
  }

  std::string to_string() const {
    std::string s = "{";
    bool first = true;
    for (int i : indices()) {
      if (!first) s += ",";
      s += std::to_string(i);
      first = false;
    }
    return s + "}";
  }

  // Assignment rendering, e.g. (1,0,1).
  std::string to_assignment_string(int j) const {
    std::string s = "(";
    for (int i = 1; i <= j; ++i) {
      if (i > 1) s += ",";
      s += contains(i) ? "1" : "0";
    }
    return s + ")";
  }

  friend constexpr bool operator==(InstrumentSet, InstrumentSet) = default;

 private:
  std::uint32_t bits_ = 0;
};

using Assignment = InstrumentSet;

// Canonical subset order: by cardinality, then by bitmask.
inline constexpr bool canonical_less(InstrumentSet a, InstrumentSet b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a.bits() < b.bits();
}

inline void check_instrument_count(int j) {
  if (j < 1 || j > kMaxInstruments)
    throw InvalidArgument("number of instruments must be in 1.." + std::to_string(kMaxInstruments) + ", got " +
                          std::to_string(j));
}

inline std::vector<InstrumentSet> canonical_subsets(int j, bool include_empty) {
  check_instrument_count(j);
  std::vector<InstrumentSet> out;
  const std::uint32_t total = 1u << j;
  out.reserve(total);
  for (std::uint32_t b = include_empty ? 0 : 1; b < total; ++b) out.emplace_back(b);
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

// Nonempty antichain of subsets, kept sorted in canonical order.
class SpernerFamily {
 public:
  static SpernerFamily from_sets(std::vector<InstrumentSet> sets) {
    if (sets.empty()) throw InvalidArgument("a Sperner family must contain at least one set");
    std::sort(sets.begin(), sets.end(), canonical_less);
    for (std::size_t a = 0; a < sets.size(); ++a) {
      for (std::size_t b = a + 1; b < sets.size(); ++b) {
        if (sets[a] == sets[b]) throw InvalidArgument("duplicate set " + sets[a].to_string() + " in family");
        if (sets[a].subset_of(sets[b]))
          throw InvalidArgument("not an antichain: " + sets[a].to_string() + " is contained in " + sets[b].to_string());
      }
    }
    SpernerFamily f;
    f.sets_ = std::move(sets);
    return f;
  }

  const std::vector<InstrumentSet>& sets() const { return sets_; }
  std::size_t size() const { return sets_.size(); }

  bool covers(Assignment z) const {
    for (auto s : sets_)
      if (s.subset_of(z)) return true;
    return false;
  }

  InstrumentSet support() const {
    InstrumentSet u;
    for (auto s : sets_) u = u | s;
    return u;
  }

  bool fits(int j) const {
    return std::all_of(sets_.begin(), sets_.end(), [j](InstrumentSet s) { return s.fits(j); });
  }

  std::string to_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < sets_.size(); ++i) {
      if (i) s += ",";
      s += sets_[i].to_string();
    }
    return s + "}";
  }

  friend bool operator==(const SpernerFamily& a, const SpernerFamily& b) { return a.sets_ == b.sets_; }

  // Lexicographic comparison of the canonically sorted set sequences.
  friend bool operator<(const SpernerFamily& a, const SpernerFamily& b) {
    return std::lexicographical_compare(a.sets_.begin(), a.sets_.end(), b.sets_.begin(), b.sets_.end(),
                                        canonical_less);
  }

 private:
  std::vector<InstrumentSet> sets_;
};

// A compliance group: the never-taker, or a responder described by the Sperner
// family of minimal instrument sets that induce treatment.
class ComplianceGroup {
 public:
  static ComplianceGroup never_taker() { return ComplianceGroup(); }
  static ComplianceGroup responder(SpernerFamily f) {
    ComplianceGroup g;
    g.family_ = std::move(f);
    return g;
  }
  static ComplianceGroup single(InstrumentSet s) { return responder(SpernerFamily::from_sets({s})); }
  static ComplianceGroup always_taker() { return single(InstrumentSet()); }

  bool is_never_taker() const { return !family_.has_value(); }
  bool is_always_taker() const { return family_ && family_->size() == 1 && family_->sets()[0].empty(); }
  bool is_complier() const { return !is_never_taker() && !is_always_taker(); }
  bool is_single_set() const { return family_ && family_->size() == 1; }

  const SpernerFamily& family() const {
    if (!family_) throw InvalidArgument("the never-taker group has no Sperner family");
    return *family_;
  }

  std::string to_string() const { return family_ ? family_->to_string() : std::string("{}"); }

  friend bool operator==(const ComplianceGroup& a, const ComplianceGroup& b) { return a.family_ == b.family_; }
  friend bool operator<(const ComplianceGroup& a, const ComplianceGroup& b) {
    if (!a.family_) return b.family_.has_value();
    if (!b.family_) return false;
    return *a.family_ < *b.family_;
  }

 private:
  std::optional<SpernerFamily> family_;
};

// D_g(z): treatment status of group g under assignment z.
inline int selection_value(const ComplianceGroup& g, Assignment z) {
  if (g.is_never_taker()) return 0;
  return g.family().covers(z) ? 1 : 0;
}

namespace detail {

// Comparability masks over canonical subset positions (J <= 6 so 64 bits suffice).
struct AntichainSearch {
  std::vector<InstrumentSet> subsets;
  std::vector<std::uint64_t> comparable;

  explicit AntichainSearch(int j) : subsets(canonical_subsets(j, true)) {
    const std::size_t m = subsets.size();
    comparable.assign(m, 0);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        if (subsets[a].subset_of(subsets[b]) || subsets[b].subset_of(subsets[a])) comparable[a] |= 1ull << b;
  }

  static std::uint64_t above(std::size_t i) { return i >= 63 ? 0ull : ~((2ull << i) - 1ull); }

  std::uint64_t count(std::uint64_t allowed) const {
    std::uint64_t c = 1;
    while (allowed) {
      const int i = std::countr_zero(allowed);
      allowed &= allowed - 1;
      c += count(allowed & ~comparable[i] & above(i));
    }
    return c;
  }

  template <class Visit>
  void visit(std::uint64_t allowed, std::vector<InstrumentSet>& stack, Visit&& emit) const {
    while (allowed) {
      const int i = std::countr_zero(allowed);
      allowed &= allowed - 1;
      stack.push_back(subsets[i]);
      emit(stack);
      visit(allowed & ~comparable[i] & above(i), stack, emit);
      stack.pop_back();
    }
  }
};

inline std::uint64_t all_positions(std::size_t m) { return m >= 64 ? ~0ull : (1ull << m) - 1ull; }

}  // namespace detail

// Number of compliance groups (a Dedekind number) by exhaustive antichain
// search without materializing the families. Supports J <= 6.
inline std::uint64_t count_compliance_groups(int j) {
  check_instrument_count(j);
  if (j > 6) throw InvalidArgument("group counting is supported for at most 6 instruments");
  detail::AntichainSearch search(j);
  return search.count(detail::all_positions(search.subsets.size()));
}

// All compliance groups in canonical order: never-taker first, then the
// responders in lexicographic order of their canonically sorted families (so
// the always-taker {{}} is second). Supports J <= 5.
inline std::vector<ComplianceGroup> enumerate_compliance_groups(int j) {
  check_instrument_count(j);
  if (j > 5) throw InvalidArgument("materialized enumeration is supported for at most 5 instruments; use count_compliance_groups");
  detail::AntichainSearch search(j);
  std::vector<ComplianceGroup> out;
  out.push_back(ComplianceGroup::never_taker());
  std::vector<InstrumentSet> stack;
  search.visit(detail::all_positions(search.subsets.size()), stack, [&](const std::vector<InstrumentSet>& sets) {
    out.push_back(ComplianceGroup::responder(SpernerFamily::from_sets(sets)));
  });
  return out;
}

// Enumerated groups with lookup by family.
class GroupCatalog {
 public:
  explicit GroupCatalog(int j) : j_(j), groups_(enumerate_compliance_groups(j)) {
    for (std::size_t i = 0; i < groups_.size(); ++i) {
      if (groups_[i].is_never_taker()) continue;
      index_.emplace(key(groups_[i].family()), i);
    }
  }

  int instruments() const { return j_; }
  std::size_t size() const { return groups_.size(); }
  const std::vector<ComplianceGroup>& groups() const { return groups_; }
  const ComplianceGroup& operator[](std::size_t i) const { return groups_.at(i); }

  std::optional<std::size_t> find(const SpernerFamily& f) const {
    auto it = index_.find(key(f));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(const SpernerFamily& f) const {
    auto i = find(f);
    if (!i) throw InvalidArgument("family " + f.to_string() + " is not a group for J=" + std::to_string(j_));
    return *i;
  }
  std::size_t single_index(InstrumentSet s) const { return index_of(SpernerFamily::from_sets({s})); }
  std::size_t never_taker_index() const { return 0; }
  std::size_t always_taker_index() const { return 1; }

 private:
  static std::vector<std::uint32_t> key(const SpernerFamily& f) {
    std::vector<std::uint32_t> k;
    for (auto s : f.sets()) k.push_back(s.bits());
    return k;
  }

  int j_;
  std::vector<ComplianceGroup> groups_;
  std::map<std::vector<std::uint32_t>, std::size_t> index_;
};

// Signed inclusion-exclusion matrix expressing each complier group's selection
// function as a combination of single-set groups. Rows: complier groups in
// canonical order. Columns: nonempty subsets in canonical order.
struct GroupExpansionMatrix {
  int j = 0;
  std::vector<SpernerFamily> rows;
  std::vector<InstrumentSet> columns;
  Eigen::MatrixXi entries;

  std::size_t column_of(InstrumentSet s) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == s) return c;
    throw InvalidArgument("subset " + s.to_string() + " is not a column");
  }
  std::optional<std::size_t> row_of(const SpernerFamily& f) const {
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (rows[r] == f) return r;
    return std::nullopt;
  }
};

// Coefficients of one family's row: sum over nonempty subfamilies f with union S
// of (-1)^{|f|+1}. Keyed by union bitmask.
inline std::vector<int> expansion_row(const SpernerFamily& f, int j) {
  std::vector<int> row(std::size_t(1) << j, 0);
  const auto& sets = f.sets();
  const std::size_t m = sets.size();
  if (m > 30) throw InvalidArgument("family too large to expand");
  for (std::uint64_t sub = 1; sub < (1ull << m); ++sub) {
    std::uint32_t u = 0;
    for (std::size_t i = 0; i < m; ++i)
      if ((sub >> i) & 1ull) u |= sets[i].bits();
    row[u] += (std::popcount(sub) % 2 == 1) ? 1 : -1;
  }
  return row;
}

inline GroupExpansionMatrix build_mj(int j) {
  GroupCatalog cat(j);
  GroupExpansionMatrix m;
  m.j = j;
  m.columns = canonical_subsets(j, false);
  for (const auto& g : cat.groups())
    if (g.is_complier()) m.rows.push_back(g.family());
  m.entries = Eigen::MatrixXi::Zero(Eigen::Index(m.rows.size()), Eigen::Index(m.columns.size()));
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto row = expansion_row(m.rows[r], j);
    for (std::size_t c = 0; c < m.columns.size(); ++c) m.entries(Eigen::Index(r), Eigen::Index(c)) = row[m.columns[c].bits()];
  }
  return m;
}

struct ExpansionCheck {
  bool ok = true;
  std::size_t rows_checked = 0;
  std::size_t assignments_checked = 0;
  std::optional<std::string> first_failure;
};

// Checks D_g(z) = sum_S M[g,S] D_{g(S)}(z) for every complier row and every z.
inline ExpansionCheck verify_mj(const GroupExpansionMatrix& m) {
  ExpansionCheck out;
  const std::uint32_t total = 1u << m.j;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    ++out.rows_checked;
    for (std::uint32_t zb = 0; zb < total; ++zb) {
      const Assignment z(zb);
      int rhs = 0;
      for (std::size_t c = 0; c < m.columns.size(); ++c)
        if (m.columns[c].subset_of(z)) rhs += m.entries(Eigen::Index(r), Eigen::Index(c));
      const int lhs = m.rows[r].covers(z) ? 1 : 0;
      if (lhs != rhs && out.ok) {
        out.ok = false;
        out.first_failure = "row " + m.rows[r].to_string() + " at z=" + z.to_assignment_string(m.j);
      }
    }
  }
  out.assignments_checked = std::size_t(total) * m.rows.size();
  return out;
}

// Target parameters whose complier-weight function c(g,z) has a closed form.
enum class TargetKind { acl, slate, slatt, slatu, pte };

struct TargetParameter {
  TargetKind kind = TargetKind::acl;
  InstrumentSet shifted;   // instruments switched (slate / slatt / slatu)
  int instrument = 0;      // pte: the instrument switched, 1-based
  Assignment context;      // pte: values of the other instruments

  static TargetParameter acl() { return {}; }
  static TargetParameter slate(InstrumentSet s) { return {TargetKind::slate, s, 0, {}}; }
  static TargetParameter slatt(InstrumentSet s) { return {TargetKind::slatt, s, 0, {}}; }
  static TargetParameter slatu(InstrumentSet s) { return {TargetKind::slatu, s, 0, {}}; }
  static TargetParameter pte(int instrument, Assignment context) {
    return {TargetKind::pte, {}, instrument, context.with(instrument, false)};
  }

  void validate(int j) const {
    check_instrument_count(j);
    switch (kind) {
      case TargetKind::acl:
        return;
      case TargetKind::slate:
      case TargetKind::slatt:
      case TargetKind::slatu:
        if (shifted.empty()) throw InvalidArgument("the shifted instrument set must be nonempty");
        if (!shifted.fits(j)) throw InvalidArgument("shifted set " + shifted.to_string() + " exceeds J=" + std::to_string(j));
        return;
      case TargetKind::pte:
        if (instrument < 1 || instrument > j) throw InvalidArgument("pte instrument index out of range");
        if (!context.fits(j)) throw InvalidArgument("pte context exceeds J");
        return;
    }
  }

  // c(g,z) in {0,1} for monotone groups.
  int weight(const ComplianceGroup& g, Assignment z, int j) const {
    switch (kind) {
      case TargetKind::acl:
        return selection_value(g, InstrumentSet::all(j)) - selection_value(g, Assignment());
      case TargetKind::slate:
        return selection_value(g, z | shifted) - selection_value(g, z.minus(shifted));
      case TargetKind::slatt:
        return selection_value(g, z) * (selection_value(g, z | shifted) - selection_value(g, z.minus(shifted)));
      case TargetKind::slatu:
        return (1 - selection_value(g, z)) *
               (selection_value(g, z | shifted) - selection_value(g, z.minus(shifted)));
      case TargetKind::pte:
        return selection_value(g, context.with(instrument, true)) - selection_value(g, context.with(instrument, false));
    }
    return 0;
  }

  // c(g(S),z) for the single-set group g(S) with S nonempty; a product form
  // that avoids building the group.
  int single_set_weight(InstrumentSet s, Assignment z, int j) const {
    switch (kind) {
      case TargetKind::acl:
        return 1;
      case TargetKind::slate:
        return (s.intersects(shifted) && s.minus(shifted).subset_of(z)) ? 1 : 0;
      case TargetKind::slatt:
        return (s.intersects(shifted) && s.subset_of(z)) ? 1 : 0;
      case TargetKind::slatu:
        return (s.intersects(shifted) && s.minus(shifted).subset_of(z) && !s.subset_of(z)) ? 1 : 0;
      case TargetKind::pte:
        return (s.contains(instrument) && s.subset_of(context.with(instrument, true))) ? 1 : 0;
    }
    (void)j;
    return 0;
  }

  std::string label() const {
    auto list = [](InstrumentSet s) {
      std::string out;
      for (int i : s.indices()) out += (out.empty() ? "" : ",") + std::to_string(i);
      return out;
    };
    switch (kind) {
      case TargetKind::acl:
        return "acl";
      case TargetKind::slate:
        return "slate:" + list(shifted);
      case TargetKind::slatt:
        return "slatt:" + list(shifted);
      case TargetKind::slatu:
        return "slatu:" + list(shifted);
      case TargetKind::pte:
        return "pte:" + std::to_string(instrument);
    }
    return "";
  }
};

// c(g,z) tabulated over all groups (canonical order) and assignments (bitmask order).
class WeightTable {
 public:
  WeightTable(int j, std::size_t groups) : j_(j), groups_(groups), values_(groups << j, 0) {}

  int instruments() const { return j_; }
  std::size_t groups() const { return groups_; }
  std::size_t assignments() const { return std::size_t(1) << j_; }
  int& at(std::size_t g, Assignment z) { return values_.at((g << j_) + z.bits()); }
  int at(std::size_t g, Assignment z) const { return values_.at((g << j_) + z.bits()); }

 private:
  int j_;
  std::size_t groups_;
  std::vector<int> values_;
};

inline WeightTable make_weight_table(const GroupCatalog& cat, const TargetParameter& p) {
  const int j = cat.instruments();
  p.validate(j);
  WeightTable t(j, cat.size());
  for (std::size_t g = 0; g < cat.size(); ++g)
    for (std::uint32_t zb = 0; zb < (1u << j); ++zb) t.at(g, Assignment(zb)) = p.weight(cat[g], Assignment(zb), j);
  return t;
}

struct PropertyMViolation {
  std::size_t group = 0;
  std::string family;
  Assignment z;
  int actual = 0;
  int implied = 0;  // sum of expansion coefficients times single-set weights (or 0 for always/never takers)
};

struct PropertyMReport {
  bool satisfied = true;
  std::vector<PropertyMViolation> violations;
};

// Checks c(always,z) = c(never,z) = 0 and that each complier row equals the
// expansion-weighted sum of single-set rows, for every z.
inline PropertyMReport check_property_m(const WeightTable& table, const GroupCatalog& cat) {
  if (table.instruments() != cat.instruments() || table.groups() != cat.size())
    throw InvalidArgument("weight table shape does not match the group catalog");
  const int j = cat.instruments();
  const auto subsets = canonical_subsets(j, false);
  std::vector<std::size_t> single(subsets.size());
  for (std::size_t c = 0; c < subsets.size(); ++c) single[c] = cat.single_index(subsets[c]);

  PropertyMReport rep;
  for (std::size_t g = 0; g < cat.size(); ++g) {
    const auto& grp = cat[g];
    std::vector<int> row;
    if (grp.is_complier()) row = expansion_row(grp.family(), j);
    for (std::uint32_t zb = 0; zb < (1u << j); ++zb) {
      const Assignment z(zb);
      int implied = 0;
      if (grp.is_complier())
        for (std::size_t c = 0; c < subsets.size(); ++c) {
          const int coef = row[subsets[c].bits()];
          if (coef) implied += coef * table.at(single[c], z);
        }
      const int actual = table.at(g, z);
      if (actual != implied) {
        rep.satisfied = false;
        rep.violations.push_back({g, grp.to_string(), z, actual, implied});
      }
    }
  }
  return rep;
}

struct ChainPair {
  Assignment upper;
  Assignment lower;
};

// For a weight table satisfying the restriction at z, finds nested assignments
// u_1 > l_1 > u_2 > ... with c(g,z) = sum_k D_g(u_k) - D_g(l_k) for all g.
// The result is re-checked against every group before returning.
inline std::vector<ChainPair> sperner_chain_decomposition(const WeightTable& table, const GroupCatalog& cat,
                                                          Assignment z) {
  if (table.instruments() != cat.instruments() || table.groups() != cat.size())
    throw InvalidArgument("weight table shape does not match the group catalog");
  const int j = cat.instruments();
  if (!z.fits(j)) throw InvalidArgument("assignment exceeds J");

  const auto full = check_property_m(table, cat);
  for (const auto& v : full.violations)
    if (v.z == z) throw InvalidArgument("weight table violates the restriction at z=" + z.to_assignment_string(j) +
                                        " (group " + v.family + ")");

  const auto subsets = canonical_subsets(j, false);
  auto selected = [&](InstrumentSet s) { return table.at(cat.single_index(s), z) == 1; };

  std::vector<Assignment> chain;
  InstrumentSet current;
  for (auto s : subsets)
    if (selected(s)) current = current | s;
  bool want_selected = false;
  while (!current.empty()) {
    chain.push_back(current);
    InstrumentSet next;
    for (auto s : subsets)
      if (s.subset_of(current) && selected(s) == want_selected) next = next | s;
    if (next == current) throw InvalidArgument("chain construction did not shrink; weights are not 0/1 valued");
    current = next;
    want_selected = !want_selected;
  }

  std::vector<ChainPair> out;
  for (std::size_t k = 0; k < chain.size(); k += 2)
    out.push_back({chain[k], k + 1 < chain.size() ? chain[k + 1] : Assignment()});

  for (std::size_t g = 0; g < cat.size(); ++g) {
    int sum = 0;
    for (const auto& p : out) sum += selection_value(cat[g], p.upper) - selection_value(cat[g], p.lower);
    if (sum != table.at(g, z))
      throw Error("chain decomposition failed to reproduce group " + cat[g].to_string());
  }
  return out;
}

struct RowspaceCheck {
  Eigen::VectorXd projection;
  bool in_rowspace = false;
  double max_deviation = 0.0;
};

// Orthogonal projection of v onto the row space of a full-row-rank matrix.
inline RowspaceCheck rowspace_projection_check(const Eigen::MatrixXd& moments, const Eigen::VectorXd& v,
                                               double tolerance = 1e-9) {
  if (moments.cols() != v.size()) throw InvalidArgument("vector length does not match the number of columns");
  if (moments.rows() == 0) throw InvalidArgument("empty moment matrix");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(moments.transpose());
  qr.setThreshold(1e-10);
  if (qr.rank() < moments.rows()) throw SingularDesignError("moment matrix is not of full row rank");
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(moments.cols(), moments.rows());
  RowspaceCheck out;
  out.projection = q * (q.transpose() * v);
  out.max_deviation = (out.projection - v).cwiseAbs().maxCoeff();
  out.in_rowspace = out.max_deviation <= tolerance;
  return out;
}

}  // namespace vmiv
