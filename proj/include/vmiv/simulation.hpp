#pragma once

// Data-generating processes with known compliance-group labels, oracle values
// of complier parameters, and Monte Carlo comparison of estimators.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "vmiv/combinatorics.hpp"
#include "vmiv/dataset.hpp"
#include "vmiv/design.hpp"
#include "vmiv/error.hpp"
#include "vmiv/estimation.hpp"
#include "vmiv/parallel.hpp"
#include "vmiv/rng.hpp"

namespace vmiv {

// Y(0) = y0_base + y0_scale * U and Y(1) = Y(0) + effect + effect_noise * V,
// with U, V independent Uniform[0,1].
struct GroupOutcome {
  double y0_base = 0.0;
  double y0_scale = 1.0;
  double effect = 0.0;
  double effect_noise = 0.0;

  double mean_effect() const { return effect + 0.5 * effect_noise; }
};

struct BernoulliLaw {
  std::vector<double> p;
};

// Independent Bernoulli(p) draws, except that when instrument `trigger` is on,
// instrument `target` is redrawn as Bernoulli(target_prob).
struct ConditionalLaw {
  std::vector<double> p;
  int trigger = 0;
  int target = 0;
  double target_prob = 0.0;
};

// Z_j = 1(X_j > threshold_j) with X multivariate normal, unit variances.
struct LatentGaussianLaw {
  Eigen::MatrixXd correlation;
  std::vector<double> thresholds;
};

using InstrumentLaw = std::variant<BernoulliLaw, ConditionalLaw, LatentGaussianLaw>;

struct DgpSpec {
  std::string name;
  int j = 0;
  std::vector<double> group_probabilities;  // canonical group order
  std::vector<GroupOutcome> outcomes;       // canonical group order
  InstrumentLaw law;

  void validate() const {
    check_instrument_count(j);
    if (j > 5) throw InvalidArgument("simulation supports at most 5 instruments");
    const auto groups = std::size_t(count_compliance_groups(j));
    if (group_probabilities.size() != groups || outcomes.size() != groups)
      throw InvalidArgument("expected " + std::to_string(groups) + " group probabilities and outcome laws");
    double total = 0.0;
    for (double p : group_probabilities) {
      if (!(p >= 0.0)) throw InvalidArgument("group probabilities must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("group probabilities must sum to one");
    auto check_p = [&](const std::vector<double>& p) {
      if (int(p.size()) != j) throw InvalidArgument("instrument law needs J probabilities");
      for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("instrument probabilities must lie in [0,1]");
    };
    if (auto b = std::get_if<BernoulliLaw>(&law)) check_p(b->p);
    if (auto c = std::get_if<ConditionalLaw>(&law)) {
      check_p(c->p);
      if (c->trigger < 1 || c->trigger > j || c->target < 1 || c->target > j || c->trigger == c->target)
        throw InvalidArgument("conditional law needs distinct trigger and target instruments");
      if (!(c->target_prob >= 0.0 && c->target_prob <= 1.0)) throw InvalidArgument("target probability must lie in [0,1]");
    }
    if (auto g = std::get_if<LatentGaussianLaw>(&law)) {
      if (g->correlation.rows() != j || g->correlation.cols() != j || int(g->thresholds.size()) != j)
        throw InvalidArgument("latent Gaussian law needs a JxJ correlation and J thresholds");
      Eigen::LLT<Eigen::MatrixXd> llt(g->correlation);
      if (llt.info() != Eigen::Success) throw InvalidArgument("correlation matrix is not positive definite");
    }
  }
};

struct SimulatedData {
  Dataset data;
  std::vector<std::size_t> groups;  // canonical group index per row
};

namespace detail {

inline Assignment draw_assignment(const InstrumentLaw& law, int j, Engine& eng, const Eigen::MatrixXd* chol) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Assignment z;
  if (auto b = std::get_if<BernoulliLaw>(&law)) {
    for (int i = 1; i <= j; ++i) z = z.with(i, unif(eng) < b->p[std::size_t(i - 1)]);
  } else if (auto c = std::get_if<ConditionalLaw>(&law)) {
    for (int i = 1; i <= j; ++i) z = z.with(i, unif(eng) < c->p[std::size_t(i - 1)]);
    const double u = unif(eng);
    if (z.contains(c->trigger)) z = z.with(c->target, u < c->target_prob);
  } else {
    const auto& g = std::get<LatentGaussianLaw>(law);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd e(j);
    for (int i = 0; i < j; ++i) e(i) = normal(eng);
    const Eigen::VectorXd x = (*chol) * e;
    for (int i = 1; i <= j; ++i) z = z.with(i, x(i - 1) > g.thresholds[std::size_t(i - 1)]);
  }
  return z;
}

inline Eigen::MatrixXd law_cholesky(const InstrumentLaw& law) {
  if (auto g = std::get_if<LatentGaussianLaw>(&law)) return Eigen::LLT<Eigen::MatrixXd>(g->correlation).matrixL();
  return {};
}

}  // namespace detail

inline SimulatedData simulate(const DgpSpec& spec, Eigen::Index n, Engine& eng) {
  spec.validate();
  if (n < 1) throw InvalidArgument("sample size must be positive");
  const GroupCatalog cat(spec.j);
  const Eigen::MatrixXd chol = detail::law_cholesky(spec.law);
  std::discrete_distribution<std::size_t> pick(spec.group_probabilities.begin(), spec.group_probabilities.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SimulatedData out;
  out.data.y.resize(n);
  out.data.d.resize(n);
  out.data.z.resize(n, spec.j);
  out.groups.resize(std::size_t(n));
  for (int i = 1; i <= spec.j; ++i) out.data.instrument_names.push_back("z" + std::to_string(i));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t g = pick(eng);
    const Assignment z = detail::draw_assignment(spec.law, spec.j, eng, &chol);
    const double u = unif(eng), v = unif(eng);
    const auto& o = spec.outcomes[g];
    const double y0 = o.y0_base + o.y0_scale * u;
    const double y1 = y0 + o.effect + o.effect_noise * v;
    const int treated = selection_value(cat[g], z);
    out.groups[std::size_t(i)] = g;
    for (int c = 0; c < spec.j; ++c) out.data.z(i, c) = z.contains(c + 1) ? 1.0 : 0.0;
    out.data.d(i) = treated;
    out.data.y(i) = treated ? y1 : y0;
  }
  return out;
}

inline SimulatedData simulate(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed) {
  Engine eng = stream_engine(seed, 0);
  return simulate(spec, n, eng);
}

// P(Z = z) indexed by assignment bitmask. Exact for the Bernoulli and
// conditional laws and for two median-cut latent Gaussians; otherwise 10^7
// simulated draws with a fixed seed.
inline std::vector<double> cell_probabilities(const DgpSpec& spec) {
  spec.validate();
  const int j = spec.j;
  const std::size_t cells = std::size_t(1) << j;
  std::vector<double> p(cells, 0.0);
  auto bern = [](double q, bool on) { return on ? q : 1.0 - q; };
  if (auto b = std::get_if<BernoulliLaw>(&spec.law)) {
    for (std::uint32_t zb = 0; zb < cells; ++zb) {
      double v = 1.0;
      for (int i = 1; i <= j; ++i) v *= bern(b->p[std::size_t(i - 1)], Assignment(zb).contains(i));
      p[zb] = v;
    }
    return p;
  }
  if (auto c = std::get_if<ConditionalLaw>(&spec.law)) {
    for (std::uint32_t zb = 0; zb < cells; ++zb) {
      const Assignment z(zb);
      double v = 1.0;
      for (int i = 1; i <= j; ++i)
        if (i != c->target) v *= bern(c->p[std::size_t(i - 1)], z.contains(i));
      v *= z.contains(c->trigger) ? bern(c->target_prob, z.contains(c->target))
                                  : bern(c->p[std::size_t(c->target - 1)], z.contains(c->target));
      p[zb] = v;
    }
    return p;
  }
  const auto& g = std::get<LatentGaussianLaw>(spec.law);
  if (j == 2 && g.thresholds[0] == 0.0 && g.thresholds[1] == 0.0) {
    const double both = 0.25 + std::asin(g.correlation(0, 1)) / (2.0 * std::numbers::pi);
    p[3] = both;
    p[0] = both;
    p[1] = 0.5 - both;
    p[2] = 0.5 - both;
    return p;
  }
  if (j == 1) {
    const double above = 0.5 * std::erfc(g.thresholds[0] / std::sqrt(2.0));
    return {1.0 - above, above};
  }
  Engine eng = stream_engine(0x5eed, 0);
  const Eigen::MatrixXd chol = detail::law_cholesky(spec.law);
  constexpr std::size_t kDraws = 10'000'000;
  std::vector<std::size_t> counts(cells, 0);
  for (std::size_t s = 0; s < kDraws; ++s) ++counts[detail::draw_assignment(spec.law, j, eng, &chol).bits()];
  for (std::size_t c = 0; c < cells; ++c) p[c] = double(counts[c]) / double(kDraws);
  return p;
}

struct OracleValues {
  double value = 0.0;           // the target parameter
  double complier_share = 0.0;  // P(C = 1)
  double ate = 0.0;
};

// Weighted average of group effects with weights P(g) E[c(g,Z)]; for a custom
// lambda the group weights are the expansion matrix times lambda.
inline OracleValues oracle_estimand(const DgpSpec& spec, const Estimand& estimand) {
  spec.validate();
  const GroupCatalog cat(spec.j);
  const auto pz = cell_probabilities(spec);
  std::vector<double> weight(cat.size(), 0.0);
  if (estimand.is_custom()) {
    const auto m = build_mj(spec.j);
    if (estimand.custom_lambda.size() != m.entries.cols())
      throw InvalidArgument("oracle for a custom lambda needs the full power-set family");
    const Eigen::VectorXd gw = m.entries.cast<double>() * estimand.custom_lambda;
    for (std::size_t r = 0; r < m.rows.size(); ++r) weight[cat.index_of(m.rows[r])] = gw(Eigen::Index(r));
  } else {
    estimand.target->validate(spec.j);
    for (std::size_t g = 0; g < cat.size(); ++g)
      for (std::size_t zb = 0; zb < pz.size(); ++zb)
        weight[g] += pz[zb] * estimand.target->weight(cat[g], Assignment(std::uint32_t(zb)), spec.j);
  }
  OracleValues out;
  double num = 0.0;
  for (std::size_t g = 0; g < cat.size(); ++g) {
    const double pg = spec.group_probabilities[g];
    out.complier_share += pg * weight[g];
    num += pg * weight[g] * spec.outcomes[g].mean_effect();
    out.ate += pg * spec.outcomes[g].mean_effect();
  }
  if (out.complier_share == 0.0) throw WeakIdentificationError("target parameter has no compliers in this design", 0.0, 0.0);
  out.value = num / out.complier_share;
  return out;
}

// Three instruments, all 20 groups equally likely; group label g (1..20 in
// canonical order) has Y(0) = g U and Y(1) = Y(0) + g + V. Variant 1 draws
// fair independent instruments; variant 2 redraws Z3 as Bernoulli(0.05)
// whenever Z2 = 1, which thins the cells with both switched on.
inline DgpSpec three_instrument_spec(int variant) {
  if (variant != 1 && variant != 2) throw InvalidArgument("three-instrument design variant must be 1 or 2");
  DgpSpec s;
  s.name = "three:" + std::to_string(variant);
  s.j = 3;
  const std::size_t groups = std::size_t(count_compliance_groups(3));
  s.group_probabilities.assign(groups, 1.0 / double(groups));
  for (std::size_t g = 0; g < groups; ++g) {
    const double label = double(g + 1);
    s.outcomes.push_back({0.0, label, label, 1.0});
  }
  if (variant == 1)
    s.law = BernoulliLaw{{0.5, 0.5, 0.5}};
  else
    s.law = ConditionalLaw{{0.5, 0.5, 0.5}, 2, 3, 0.05};
  return s;
}

// Two negatively correlated instruments (median cuts of a latent normal with
// correlation -0.8); 90% respond only to Z1 with effect 2, 10% only to Z2 with
// effect -8; Y(0) ~ Uniform[0,1].
inline DgpSpec two_instrument_spec() {
  DgpSpec s;
  s.name = "two";
  s.j = 2;
  const GroupCatalog cat(2);
  s.group_probabilities.assign(cat.size(), 0.0);
  s.outcomes.assign(cat.size(), GroupOutcome{});
  const auto first = cat.single_index(InstrumentSet::of({1}));
  const auto second = cat.single_index(InstrumentSet::of({2}));
  s.group_probabilities[first] = 0.9;
  s.group_probabilities[second] = 0.1;
  s.outcomes[first].effect = 2.0;
  s.outcomes[second].effect = -8.0;
  Eigen::MatrixXd corr(2, 2);
  corr << 1.0, -0.8, -0.8, 1.0;
  s.law = LatentGaussianLaw{corr, {0.0, 0.0}};
  return s;
}

inline SimulatedData dgp_three_instruments(int variant, Eigen::Index n, std::uint64_t seed) {
  return simulate(three_instrument_spec(variant), n, seed);
}

inline SimulatedData dgp_two_instruments(Eigen::Index n, std::uint64_t seed) {
  return simulate(two_instrument_spec(), n, seed);
}

// Two-stage least squares of Y on (1, D) instrumented by the saturated design.
inline double saturated_2sls(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& z) {
  const int j = int(z.cols());
  const Eigen::MatrixXd g = with_intercept(build_gamma(z, default_family(j)));
  LeastSquares ls(g);
  ls.require_full_rank("saturated first stage");
  const Eigen::VectorXd fitted = g * ls.solve(d);
  const Eigen::VectorXd centered = (fitted.array() - fitted.mean()).matrix();
  const double den = centered.dot(d);
  if (std::abs(den) < 1e-12 * double(y.size())) throw WeakIdentificationError("first stage has no variation", 0.0, 0.0);
  return centered.dot(y) / den;
}

enum class EstimatorKind { vm, wald, tsls };

struct McEstimator {
  std::string name;
  EstimatorKind kind = EstimatorKind::vm;
  EstimandSpec spec;
};

inline McEstimator vm_estimator(std::string name = "vm", Estimand e = Estimand::acl(),
                                Regularization r = Regularization::automatic(),
                                VarianceOptions v = VarianceOptions::none()) {
  return {std::move(name), EstimatorKind::vm, {std::move(e), r, v}};
}
inline McEstimator wald_estimator() { return {"wald", EstimatorKind::wald, {}}; }
inline McEstimator tsls_estimator() { return {"tsls", EstimatorKind::tsls, {}}; }

struct EstimatorSummary {
  std::string name;
  double oracle = 0.0;
  double oracle_share = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  double mc_se = 0.0;
  double mean_share = 0.0;
  double share_mc_se = 0.0;
  double mean_alpha = 0.0;
  std::optional<double> coverage;
  std::optional<double> mean_se;
  std::size_t used = 0;
  std::size_t failures = 0;
  std::vector<double> estimates;
  std::vector<double> alphas;
};

struct McResult {
  std::string dgp;
  Eigen::Index n = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& at(const std::string& name) const {
    for (const auto& e : estimators)
      if (e.name == name) return e;
    throw InvalidArgument("no estimator named " + name);
  }
};

// Replicate r uses the stream (seed, r), so results do not depend on threads.
inline McResult run_monte_carlo(const DgpSpec& spec, Eigen::Index n, std::size_t reps,
                                const std::vector<McEstimator>& estimators, std::uint64_t seed, unsigned workers = 0) {
  spec.validate();
  if (reps < 2) throw InvalidArgument("at least two replicates are required");
  if (estimators.empty()) throw InvalidArgument("no estimators requested");
  const std::size_t k = estimators.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> point(reps * k, nan), share(reps * k, nan), alpha(reps * k, nan), se(reps * k, nan);
  const auto family = default_family(spec.j);

  parallel_for(
      reps,
      [&](std::size_t r) {
        Engine eng = stream_engine(seed, r);
        const SimulatedData sim = simulate(spec, n, eng);
        for (std::size_t e = 0; e < k; ++e) {
          const auto& est = estimators[e];
          const std::size_t slot = r * k + e;
          try {
            switch (est.kind) {
              case EstimatorKind::vm: {
                EstimandSpec es = est.spec;
                if (es.variance.method == VarianceOptions::Method::bootstrap) es.variance.seed = derive_seed(seed, r);
                const auto res = estimate(sim.data, family, es, 1);
                point[slot] = res.point;
                share[slot] = res.complier_share;
                alpha[slot] = res.alpha;
                if (res.se) se[slot] = *res.se;
                break;
              }
              case EstimatorKind::wald: {
                const auto w = wald_acl(sim.data.y, sim.data.d, sim.data.z);
                point[slot] = w.point;
                share[slot] = w.complier_share;
                alpha[slot] = 0.0;
                break;
              }
              case EstimatorKind::tsls:
                point[slot] = saturated_2sls(sim.data.y, sim.data.d, sim.data.z);
                break;
            }
          } catch (const WeakIdentificationError&) {
          } catch (const SingularDesignError&) {
          }
        }
      },
      workers);

  McResult out;
  out.dgp = spec.name;
  out.n = n;
  out.reps = reps;
  out.seed = seed;
  for (std::size_t e = 0; e < k; ++e) {
    const auto& est = estimators[e];
    EstimatorSummary s;
    s.name = est.name;
    const Estimand target = est.kind == EstimatorKind::vm ? est.spec.estimand : Estimand::acl();
    const auto oracle = oracle_estimand(spec, target);
    s.oracle = oracle.value;
    s.oracle_share = oracle.complier_share;
    double sum = 0, sum_sh = 0, sum_al = 0, covered = 0, sum_se = 0;
    std::size_t with_se = 0, with_share = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t slot = r * k + e;
      if (!std::isfinite(point[slot])) {
        ++s.failures;
        continue;
      }
      s.estimates.push_back(point[slot]);
      sum += point[slot];
      if (std::isfinite(share[slot])) {
        sum_sh += share[slot];
        ++with_share;
      }
      if (std::isfinite(alpha[slot])) {
        sum_al += alpha[slot];
        s.alphas.push_back(alpha[slot]);
      }
      if (std::isfinite(se[slot])) {
        ++with_se;
        sum_se += se[slot];
        if (std::abs(point[slot] - s.oracle) <= 1.959963984540054 * se[slot]) covered += 1;
      }
    }
    s.used = s.estimates.size();
    if (s.used == 0) {
      out.estimators.push_back(std::move(s));
      continue;
    }
    s.mean = sum / double(s.used);
    s.bias = s.mean - s.oracle;
    double ss = 0, sq = 0;
    for (double v : s.estimates) {
      ss += (v - s.mean) * (v - s.mean);
      sq += (v - s.oracle) * (v - s.oracle);
    }
    s.sd = s.used > 1 ? std::sqrt(ss / double(s.used - 1)) : 0.0;
    s.rmse = std::sqrt(sq / double(s.used));
    s.mc_se = s.sd / std::sqrt(double(s.used));
    if (with_share > 0) {
      s.mean_share = sum_sh / double(with_share);
      double sv = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const double v = share[r * k + e];
        if (std::isfinite(v) && std::isfinite(point[r * k + e])) sv += (v - s.mean_share) * (v - s.mean_share);
      }
      s.share_mc_se = with_share > 1 ? std::sqrt(sv / double(with_share - 1) / double(with_share)) : 0.0;
    }
    s.mean_alpha = s.alphas.empty() ? 0.0 : sum_al / double(s.alphas.size());
    if (with_se > 0) {
      s.coverage = covered / double(with_se);
      s.mean_se = sum_se / double(with_se);
    }
    out.estimators.push_back(std::move(s));
  }
  return out;
}

}  // namespace vmiv
