#pragma once

// Weighted-ratio estimation of complier parameters: the lambda vector for each
// target, the regularized ratio estimator and its mean-squared-error tuning,
// influence-function and bootstrap variances, potential-outcome moments and
// ATE bounds.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vmiv/combinatorics.hpp"
#include "vmiv/dataset.hpp"
#include "vmiv/design.hpp"
#include "vmiv/error.hpp"
#include "vmiv/linalg.hpp"
#include "vmiv/parallel.hpp"
#include "vmiv/rng.hpp"

namespace vmiv {

inline constexpr double kWeakShareThreshold = 1e-3;
inline constexpr double kWeakTStatThreshold = 2.0;

// A target parameter with closed-form weights, or a user-supplied lambda.
struct Estimand {
  std::optional<TargetParameter> target = TargetParameter::acl();
  Eigen::VectorXd custom_lambda;

  static Estimand acl() { return {}; }
  static Estimand from(TargetParameter t) { return {t, {}}; }
  static Estimand custom(Eigen::VectorXd lambda) { return {std::nullopt, std::move(lambda)}; }

  bool is_custom() const { return !target.has_value(); }
  bool is_acl() const { return target && target->kind == TargetKind::acl; }

  std::string label(int j) const {
    if (!target) return "custom";
    if (target->kind != TargetKind::pte) return target->label();
    std::string s = target->label() + "@";
    bool first = true;
    for (int i = 1; i <= j; ++i) {
      if (i == target->instrument) continue;
      s += (first ? "" : ",") + std::string("z") + std::to_string(i) + "=" + (target->context.contains(i) ? "1" : "0");
      first = false;
    }
    return s;
  }
};

struct Regularization {
  enum class Mode { none, fixed, mse };
  Mode mode = Mode::mse;
  double alpha = 0.0;

  static Regularization none() { return {Mode::none, 0.0}; }
  static Regularization fixed(double a) { return {Mode::fixed, a}; }
  static Regularization automatic() { return {Mode::mse, 0.0}; }
};

struct VarianceOptions {
  enum class Method { none, sandwich, bootstrap };
  Method method = Method::none;
  int replicates = 500;
  std::uint64_t seed = 1;

  static VarianceOptions none() { return {}; }
  static VarianceOptions sandwich() { return {Method::sandwich, 0, 1}; }
  static VarianceOptions bootstrap(int b, std::uint64_t seed) { return {Method::bootstrap, b, seed}; }
};

inline const char* to_string(VarianceOptions::Method m) {
  switch (m) {
    case VarianceOptions::Method::none:
      return "none";
    case VarianceOptions::Method::sandwich:
      return "sandwich";
    case VarianceOptions::Method::bootstrap:
      return "bootstrap";
  }
  return "";
}

struct EstimandSpec {
  Estimand estimand;
  Regularization regularization;
  VarianceOptions variance;
};

// Sample analog of E[c(g(S), Z)] for each S in the family.
inline Eigen::VectorXd lambda_for(const Estimand& e, const std::vector<Assignment>& rows,
                                  const std::vector<InstrumentSet>& family, int j) {
  if (e.is_custom()) {
    if (e.custom_lambda.size() != Eigen::Index(family.size()))
      throw InvalidArgument("custom lambda has length " + std::to_string(e.custom_lambda.size()) + " but the family has " +
                            std::to_string(family.size()) + " members");
    if (!e.custom_lambda.allFinite()) throw InvalidArgument("custom lambda must be finite");
    return e.custom_lambda;
  }
  e.target->validate(j);
  if (rows.empty()) throw InvalidArgument("no observations");
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(Eigen::Index(family.size()));
  for (std::size_t s = 0; s < family.size(); ++s) {
    if (e.target->kind == TargetKind::acl || e.target->kind == TargetKind::pte) {
      lambda(Eigen::Index(s)) = e.target->single_set_weight(family[s], Assignment(), j);
      continue;
    }
    std::size_t hits = 0;
    for (auto z : rows) hits += std::size_t(e.target->single_set_weight(family[s], z, j));
    lambda(Eigen::Index(s)) = double(hits) / double(rows.size());
  }
  return lambda;
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& gamma) {
  Eigen::MatrixXd g(gamma.rows(), gamma.cols() + 1);
  g.col(0).setOnes();
  g.rightCols(gamma.cols()) = gamma;
  return g;
}

inline Eigen::VectorXd padded_lambda(const Eigen::VectorXd& lambda) {
  Eigen::VectorXd out(lambda.size() + 1);
  out(0) = 0.0;
  out.tail(lambda.size()) = lambda;
  return out;
}

struct HSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct RatioFit {
  double point = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;  // estimated complier share
  double denominator_se = 0.0;
  double denominator_t = std::numeric_limits<double>::infinity();
  double alpha = 0.0;
  std::optional<HSummary> h;
};

inline void check_lengths(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& gamma,
                          const Eigen::VectorXd& lambda) {
  if (y.size() != d.size() || y.size() != gamma.rows()) throw InvalidArgument("outcome, treatment and design differ in length");
  if (lambda.size() != gamma.cols()) throw InvalidArgument("lambda length does not match the number of design columns");
  if (gamma.rows() < gamma.cols() + 1)
    throw InvalidArgument("need at least " + std::to_string(gamma.cols() + 1) + " observations");
}

// (0,lambda')(G'G + alpha I)^{-1} G'Y over the same expression with D, where G
// is the design with an intercept column. Aborts when the denominator is
// within 1e-3 of zero or has a robust t-statistic below 2.
inline RatioFit estimate_rho(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& gamma,
                             const Eigen::VectorXd& lambda, double alpha) {
  check_lengths(y, d, gamma, lambda);
  const Eigen::MatrixXd g = with_intercept(gamma);
  const Eigen::VectorXd lt = padded_lambda(lambda);
  RidgeSolver solver(g, alpha);
  solver.require_full_rank(alpha == 0 ? "instrument design (use regularization or a reduced family)" : "ridge system");
  Eigen::MatrixXd yd(y.size(), 2);
  yd.col(0) = y;
  yd.col(1) = d;
  const Eigen::MatrixXd beta = solver.coefficients(yd);

  RatioFit fit;
  fit.alpha = alpha;
  fit.numerator = lt.dot(beta.col(0));
  fit.denominator = lt.dot(beta.col(1));

  const double n = double(y.size());
  const Eigen::VectorXd weights = n * (g * solver.normal_solve(lt));
  const Eigen::VectorXd resid = d - g * beta.col(1);
  fit.denominator_se = std::sqrt((weights.array() * resid.array()).square().sum()) / n;
  if (fit.denominator_se > 0) fit.denominator_t = std::abs(fit.denominator) / fit.denominator_se;

  if (std::abs(fit.denominator) < kWeakShareThreshold)
    throw WeakIdentificationError("estimated complier share " + format_number(fit.denominator) + " is below 1e-3",
                                  fit.denominator, fit.denominator_t);
  if (fit.denominator_t < kWeakTStatThreshold)
    throw WeakIdentificationError("complier share t-statistic " + format_number(fit.denominator_t) + " is below 2",
                                  fit.denominator, fit.denominator_t);
  fit.point = fit.numerator / fit.denominator;

  Eigen::VectorXd h0;
  if (alpha == 0) {
    h0 = weights;
  } else {
    LeastSquares ls(g);
    if (ls.full_rank()) h0 = n * (g * ls.normal_solve(lt));
  }
  if (h0.size() > 0) {
    const double mean = h0.mean();
    fit.h = HSummary{mean, std::sqrt((h0.array() - mean).square().sum() / std::max(n - 1.0, 1.0))};
  }
  return fit;
}

// h_i = lambda' Sigma^{-1} (Gamma_i - mean), the weighting instrument.
inline Eigen::VectorXd estimate_h(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& lambda) {
  if (lambda.size() != gamma.cols()) throw InvalidArgument("lambda length does not match the number of design columns");
  const Eigen::MatrixXd centered = gamma.rowwise() - gamma.colwise().mean();
  LeastSquares ls(centered);
  ls.require_full_rank("instrument covariance");
  return double(gamma.rows()) * (centered * ls.normal_solve(lambda));
}

struct AlphaSelection {
  double alpha = 0.0;
  double scale = 0.0;
  double mse_at_zero = 0.0;
  double mse_at_alpha = 0.0;
  std::vector<double> grid;
  std::vector<double> mse;
  bool interior_minimum = false;
  bool degenerate_residuals = false;
};

// Chooses alpha as the smallest positive local minimizer of the estimated
// first-order MSE of the ratio estimator: a 60-point log grid over
// [1e-6, 1e4] * trace(G'G)/|F| locates the first interior minimum, which is
// then refined by golden-section search. Returns 0 when no interior minimum
// exists on the grid or when the residual variance is identically zero.
inline AlphaSelection select_alpha_mse(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& gamma,
                                       const Eigen::VectorXd& lambda) {
  check_lengths(y, d, gamma, lambda);
  const Eigen::MatrixXd g = with_intercept(gamma);
  const Eigen::VectorXd lt = padded_lambda(lambda);
  LeastSquares ls(g);
  ls.require_full_rank("instrument design for tuning");
  Eigen::MatrixXd yd(y.size(), 2);
  yd.col(0) = y;
  yd.col(1) = d;
  const Eigen::MatrixXd beta = ls.solve(yd);
  const double den = lt.dot(beta.col(1));
  if (std::abs(den) < kWeakShareThreshold)
    throw WeakIdentificationError("estimated complier share " + format_number(den) + " is below 1e-3", den, 0.0);
  const double rho0 = lt.dot(beta.col(0)) / den;
  const Eigen::VectorXd u = (y - g * beta.col(0)) - rho0 * (d - g * beta.col(1));
  const Eigen::VectorXd bias_dir = beta.col(0) - rho0 * beta.col(1);

  AlphaSelection sel;
  const Eigen::MatrixXd gtg = g.transpose() * g;
  sel.scale = gtg.trace() / double(gamma.cols());
  if (u.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff())) {
    sel.degenerate_residuals = true;
    return sel;
  }
  const Eigen::MatrixXd meat = g.transpose() * u.array().square().matrix().asDiagonal() * g;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gtg);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const Eigen::MatrixXd& q = eig.eigenvectors();
  const Eigen::VectorXd a = q.transpose() * lt;
  const Eigen::MatrixXd b = q.transpose() * meat * q;
  const Eigen::VectorXd c = q.transpose() * bias_dir;

  auto mse = [&](double alpha) {
    const Eigen::VectorXd ta = (a.array() / (ev.array() + alpha)).matrix();
    const double bias = alpha * ta.dot(c);
    return ta.dot(b * ta) + bias * bias;
  };

  constexpr int kGrid = 60;
  sel.mse_at_zero = mse(0.0);
  std::vector<double> pts{0.0};
  std::vector<double> vals{sel.mse_at_zero};
  for (int m = 0; m < kGrid; ++m) {
    const double alpha = sel.scale * std::pow(10.0, -6.0 + 10.0 * m / (kGrid - 1));
    sel.grid.push_back(alpha);
    sel.mse.push_back(mse(alpha));
    pts.push_back(alpha);
    vals.push_back(sel.mse.back());
  }
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    if (vals[i] <= vals[i - 1] && vals[i] < vals[i + 1]) {
      double lo = pts[i - 1], hi = pts[i + 1];
      const double r = (std::sqrt(5.0) - 1.0) / 2.0;
      double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
      double f1 = mse(x1), f2 = mse(x2);
      while (hi - lo > 1e-4 * 0.5 * (hi + lo)) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - r * (hi - lo);
          f1 = mse(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + r * (hi - lo);
          f2 = mse(x2);
        }
      }
      sel.alpha = 0.5 * (lo + hi);
      sel.mse_at_alpha = mse(sel.alpha);
      sel.interior_minimum = true;
      return sel;
    }
  }
  sel.mse_at_alpha = sel.mse_at_zero;
  return sel;
}

// Standard error of the ratio from the stacked influence functions of the
// ratio, the intercept, the design mean and covariance, and lambda. Inputs are
// the raw design (no controls).
inline double sandwich_se(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const std::vector<Assignment>& rows,
                          const std::vector<InstrumentSet>& family, const Estimand& estimand,
                          const Eigen::VectorXd& lambda, double point, int j) {
  const Eigen::MatrixXd gamma = build_gamma(rows, family);
  check_lengths(y, d, gamma, lambda);
  const Eigen::Index n = gamma.rows();
  const Eigen::Index k = gamma.cols();
  const double nd = double(n);

  const Eigen::RowVectorXd mu = gamma.colwise().mean();
  const Eigen::MatrixXd gc = gamma.rowwise() - mu;
  LeastSquares ls(gc);
  ls.require_full_rank("instrument covariance (use bootstrap standard errors)");
  const Eigen::MatrixXd sigma = gc.transpose() * gc / nd;
  const Eigen::MatrixXd v = nd * ls.normal_solve(gc.transpose());  // k x n, Sigma^{-1}(Gamma_i - mu)
  const Eigen::VectorXd w = nd * ls.normal_solve(lambda);  // Sigma^{-1} lambda
  const Eigen::VectorXd gi = gc * w;
  const Eigen::VectorXd u = (y.array() - y.mean()).matrix() - point * (d.array() - d.mean()).matrix();

  Eigen::MatrixXd cw(n, k);  // c(g(S_l), z_i), or lambda itself when lambda is fixed
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = 0; l < k; ++l)
      cw(i, l) = estimand.is_custom() || estimand.is_acl()
                     ? lambda(l)
                     : double(estimand.target->single_set_weight(family[std::size_t(l)], rows[std::size_t(i)], j));

  const Eigen::Index pairs = k * (k + 1) / 2;
  const Eigen::Index off_mu = 2, off_sigma = 2 + k, off_lambda = 2 + k + pairs;
  const Eigen::Index dim = 2 + k + pairs + k;

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
  jac(0, 0) = -(gi.array() * d.array()).mean();
  jac(0, 1) = -gi.mean();
  jac(1, 0) = -d.mean();
  jac(1, 1) = -1.0;
  const double ubar = u.mean();
  for (Eigen::Index a = 0; a < k; ++a) jac(0, off_mu + a) = -w(a) * ubar;
  const Eigen::VectorXd uv = v * u / nd;  // mean(U v)
  const Eigen::VectorXd mean_gc = gc.colwise().mean();
  Eigen::Index p = 0;
  for (Eigen::Index l = 0; l < k; ++l)
    for (Eigen::Index m = l; m < k; ++m, ++p) {
      jac(0, off_sigma + p) = (l == m) ? -w(l) * uv(l) : -(w(l) * uv(m) + w(m) * uv(l));
      jac(off_sigma + p, off_mu + l) -= mean_gc(m);
      jac(off_sigma + p, off_mu + m) -= mean_gc(l);
      jac(off_sigma + p, off_sigma + p) = -1.0;
    }
  for (Eigen::Index l = 0; l < k; ++l) {
    jac(0, off_lambda + l) = uv(l);
    jac(off_mu + l, off_mu + l) = -1.0;
    jac(off_lambda + l, off_lambda + l) = -1.0;
  }

  Eigen::MatrixXd mom(n, dim);
  mom.col(0) = (gi.array() * u.array()).matrix();
  mom.col(1) = u;
  mom.middleCols(off_mu, k) = gc;
  p = 0;
  for (Eigen::Index l = 0; l < k; ++l)
    for (Eigen::Index m = l; m < k; ++m, ++p)
      mom.col(off_sigma + p) = (gc.col(l).array() * gc.col(m).array() - sigma(l, m)).matrix();
  mom.middleCols(off_lambda, k) = cw.rowwise() - lambda.transpose();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac.transpose());
  if (!lu.isInvertible()) throw SingularDesignError("moment Jacobian is singular; use bootstrap standard errors");
  const Eigen::VectorXd r = lu.solve(Eigen::VectorXd::Unit(dim, 0));
  const Eigen::VectorXd infl = mom * r;
  const double var = infl.squaredNorm() / nd;
  return std::sqrt(var / nd);
}

struct PartialledOut {
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::MatrixXd gamma;
  std::vector<Eigen::Index> dropped;  // control columns removed as collinear
};

// Residualizes outcome, treatment and design on span(1, X). Columns of X that
// add no rank beyond the intercept and earlier columns are dropped.
inline PartialledOut partial_out_controls(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                                          const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& x) {
  PartialledOut out;
  if (x.cols() == 0) {
    out.y = y;
    out.d = d;
    out.gamma = gamma;
    return out;
  }
  if (x.rows() != y.size()) throw InvalidArgument("controls differ in length");
  Eigen::MatrixXd basis(x.rows(), 1 + x.cols());
  basis.col(0).setOnes();
  Eigen::Index kept = 1;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    basis.col(kept) = x.col(c);
    LeastSquares trial(basis.leftCols(kept + 1));
    if (trial.full_rank())
      ++kept;
    else
      out.dropped.push_back(c);
  }
  const Eigen::MatrixXd w = basis.leftCols(kept);
  LeastSquares ls(w);
  if (w.rows() <= w.cols()) throw InvalidArgument("more controls than observations");
  Eigen::MatrixXd all(y.size(), 2 + gamma.cols());
  all.col(0) = y;
  all.col(1) = d;
  all.rightCols(gamma.cols()) = gamma;
  const Eigen::MatrixXd resid = all - w * ls.solve(all);
  out.y = resid.col(0);
  out.d = resid.col(1);
  out.gamma = resid.rightCols(gamma.cols());
  return out;
}

struct EstimateDiagnostics {
  Eigen::VectorXd lambda;
  double numerator = 0.0;
  double share_se = 0.0;
  double share_t = 0.0;
  std::optional<HSummary> h;
  std::optional<AlphaSelection> alpha_selection;
  std::string variance_method = "none";
  std::size_t bootstrap_used = 0;
  std::size_t bootstrap_excluded = 0;
  std::vector<std::string> dropped_controls;
};

struct EstimateResult {
  std::string estimand;
  double point = 0.0;
  std::optional<double> se;
  std::optional<Interval> ci95;
  double complier_share = 0.0;
  double alpha = 0.0;
  Eigen::Index n = 0;
  std::vector<std::string> warnings;
  EstimateDiagnostics diagnostics;
};

namespace detail {

inline EstimateResult point_estimate(const Dataset& data, const std::vector<InstrumentSet>& family,
                                     const EstimandSpec& spec) {
  const int j = data.instruments();
  check_family(j, family);
  const auto rows = row_assignments(data.z);
  const Eigen::MatrixXd gamma = build_gamma(rows, family);
  EstimateResult res;
  res.estimand = spec.estimand.label(j);
  res.n = data.n();
  res.diagnostics.lambda = lambda_for(spec.estimand, rows, family, j);

  PartialledOut po = partial_out_controls(data.y, data.d, gamma, data.x);
  for (auto c : po.dropped) {
    const std::string name = std::size_t(c) < data.control_names.size() ? data.control_names[std::size_t(c)]
                                                                         : "x" + std::to_string(c + 1);
    res.diagnostics.dropped_controls.push_back(name);
  }
  if (!po.dropped.empty()) res.warnings.push_back("controls_collinear_dropped");

  double alpha = 0.0;
  switch (spec.regularization.mode) {
    case Regularization::Mode::none:
      break;
    case Regularization::Mode::fixed:
      alpha = spec.regularization.alpha;
      break;
    case Regularization::Mode::mse: {
      auto sel = select_alpha_mse(po.y, po.d, po.gamma, res.diagnostics.lambda);
      alpha = sel.alpha;
      if (!sel.interior_minimum && !sel.degenerate_residuals && !sel.mse.empty() && sel.mse.front() < sel.mse_at_zero)
        res.warnings.push_back("alpha_no_interior_minimum");
      res.diagnostics.alpha_selection = std::move(sel);
      break;
    }
  }
  const RatioFit fit = estimate_rho(po.y, po.d, po.gamma, res.diagnostics.lambda, alpha);
  res.point = fit.point;
  res.complier_share = fit.denominator;
  res.alpha = alpha;
  res.diagnostics.numerator = fit.numerator;
  res.diagnostics.share_se = fit.denominator_se;
  res.diagnostics.share_t = fit.denominator_t;
  res.diagnostics.h = fit.h;
  return res;
}

inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * double(v.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

struct BootstrapSummary {
  double se = 0.0;
  Interval percentile_ci;
  std::size_t used = 0;
  std::size_t excluded = 0;
  std::vector<double> draws;
};

// Nonparametric row bootstrap of the full pipeline (lambda and alpha are
// re-estimated in each draw). Draws that fail the identification gate or have
// a singular design are excluded and counted.
inline BootstrapSummary bootstrap_se(const Dataset& data, const std::vector<InstrumentSet>& family, EstimandSpec spec,
                                     int replicates, std::uint64_t seed, unsigned workers = 0) {
  if (replicates < 2) throw InvalidArgument("bootstrap needs at least 2 replicates");
  spec.variance = VarianceOptions::none();
  const Eigen::Index n = data.n();
  std::vector<double> draws(std::size_t(replicates), std::numeric_limits<double>::quiet_NaN());
  parallel_for(
      std::size_t(replicates),
      [&](std::size_t b) {
        Engine eng = stream_engine(seed, b);
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = pick(eng);
        try {
          draws[b] = detail::point_estimate(data.subset(idx), family, spec).point;
        } catch (const WeakIdentificationError&) {
        } catch (const SingularDesignError&) {
        }
      },
      workers);
  BootstrapSummary out;
  std::vector<double> ok;
  for (double v : draws)
    if (std::isfinite(v)) ok.push_back(v);
  out.used = ok.size();
  out.excluded = draws.size() - ok.size();
  if (ok.size() < 2) throw WeakIdentificationError("fewer than two bootstrap draws were identified", 0.0, 0.0);
  const double mean = std::accumulate(ok.begin(), ok.end(), 0.0) / double(ok.size());
  double ss = 0.0;
  for (double v : ok) ss += (v - mean) * (v - mean);
  out.se = std::sqrt(ss / double(ok.size() - 1));
  out.draws = ok;
  std::sort(ok.begin(), ok.end());
  out.percentile_ci = {detail::quantile_sorted(ok, 0.025), detail::quantile_sorted(ok, 0.975)};
  return out;
}

// Full pipeline: lambda, optional partialling out of controls, alpha, ratio and variance.
inline EstimateResult estimate(const Dataset& data, const std::vector<InstrumentSet>& family, const EstimandSpec& spec,
                               unsigned workers = 0) {
  data.validate();
  EstimateResult res = detail::point_estimate(data, family, spec);
  res.diagnostics.variance_method = to_string(spec.variance.method);
  switch (spec.variance.method) {
    case VarianceOptions::Method::none:
      break;
    case VarianceOptions::Method::sandwich: {
      if (data.has_controls())
        throw InvalidArgument("sandwich standard errors are not available with controls; use bootstrap");
      const double se = sandwich_se(data.y, data.d, row_assignments(data.z), family, spec.estimand,
                                    res.diagnostics.lambda, res.point, data.instruments());
      res.se = se;
      res.ci95 = Interval{res.point - 1.959963984540054 * se, res.point + 1.959963984540054 * se};
      break;
    }
    case VarianceOptions::Method::bootstrap: {
      const auto bs = bootstrap_se(data, family, spec, spec.variance.replicates, spec.variance.seed, workers);
      res.se = bs.se;
      res.ci95 = bs.percentile_ci;
      res.diagnostics.bootstrap_used = bs.used;
      res.diagnostics.bootstrap_excluded = bs.excluded;
      if (bs.excluded > 0) res.warnings.push_back("bootstrap_draws_excluded");
      break;
    }
  }
  return res;
}

// Ratio of outcome-mean differences between the all-on and all-off cells.
struct WaldFit {
  double point = 0.0;
  double complier_share = 0.0;
  std::size_t n_all_on = 0;
  std::size_t n_all_off = 0;
};

inline WaldFit wald_acl(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& z) {
  if (y.size() != d.size() || y.size() != z.rows()) throw InvalidArgument("inputs differ in length");
  const Assignment all_on = InstrumentSet::all(int(z.cols()));
  const auto rows = row_assignments(z);
  double y1 = 0, d1 = 0, y0 = 0, d0 = 0;
  WaldFit f;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] == all_on) {
      y1 += y(Eigen::Index(i));
      d1 += d(Eigen::Index(i));
      ++f.n_all_on;
    } else if (rows[i].empty()) {
      y0 += y(Eigen::Index(i));
      d0 += d(Eigen::Index(i));
      ++f.n_all_off;
    }
  }
  if (f.n_all_on == 0 || f.n_all_off == 0) throw SingularDesignError("an extreme instrument cell is empty");
  f.complier_share = d1 / double(f.n_all_on) - d0 / double(f.n_all_off);
  if (std::abs(f.complier_share) < kWeakShareThreshold)
    throw WeakIdentificationError("first-stage difference is below 1e-3", f.complier_share, 0.0);
  f.point = (y1 / double(f.n_all_on) - y0 / double(f.n_all_off)) / f.complier_share;
  return f;
}

// The same ratio written through cell means: sum_z w_z Ybar_z / sum_z w_z Dbar_z
// with w = A'(0, lambda) over the power-set family. Requires every cell observed.
inline double estimate_cell_form(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& z,
                                 const std::vector<InstrumentSet>& family, const Eigen::VectorXd& lambda) {
  const int j = int(z.cols());
  if (family.size() != (std::size_t(1) << j) - 1) throw InvalidArgument("cell form needs the full power-set family");
  const auto a = build_a(j);
  const auto rows = row_assignments(z);
  const std::size_t cells = std::size_t(1) << j;
  std::vector<double> sy(cells, 0.0), sd(cells, 0.0), cnt(cells, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sy[rows[i].bits()] += y(Eigen::Index(i));
    sd[rows[i].bits()] += d(Eigen::Index(i));
    cnt[rows[i].bits()] += 1.0;
  }
  double num = 0, den = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (cnt[c] == 0) throw SingularDesignError("cell form needs every instrument cell observed");
    double w = 0;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
      if (a.rows[r].empty()) continue;
      const auto it = std::find(family.begin(), family.end(), a.rows[r]);
      w += lambda(Eigen::Index(it - family.begin())) * a.entries(Eigen::Index(r), Eigen::Index(c));
    }
    num += w * sy[c] / cnt[c];
    den += w * sd[c] / cnt[c];
  }
  return num / den;
}

// (-1)^{d+1} E[f(Y) h 1(D=d)] / E[h D].
inline double potential_outcome_moment(const std::function<double(double)>& f, int treated, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& d, const Eigen::VectorXd& h) {
  if (treated != 0 && treated != 1) throw InvalidArgument("treatment arm must be 0 or 1");
  if (y.size() != d.size() || y.size() != h.size()) throw InvalidArgument("inputs differ in length");
  const double n = double(y.size());
  const double share = h.dot(d) / n;
  if (std::abs(share) < kWeakShareThreshold)
    throw WeakIdentificationError("estimated complier share is below 1e-3", share, 0.0);
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if ((d(i) == 1.0) == (treated == 1)) s += f(y(i)) * h(i);
  return (treated == 1 ? 1.0 : -1.0) * (s / n) / share;
}

struct CdfEffects {
  std::vector<double> grid;
  std::vector<double> treated_raw;
  std::vector<double> untreated_raw;
  std::vector<double> treated;    // running maximum clipped to [0,1]
  std::vector<double> untreated;  // running maximum clipped to [0,1]
  std::vector<double> effect_raw;
  std::vector<double> effect;
};

inline std::vector<double> monotone_rearrange(const std::vector<double>& f) {
  std::vector<double> out(f.size());
  double run = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    run = std::max(run, std::clamp(f[i], 0.0, 1.0));
    out[i] = run;
  }
  return out;
}

inline CdfEffects cdf_treatment_effects(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& h,
                                        const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidArgument("evaluation grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw InvalidArgument("evaluation grid must be sorted");
  CdfEffects out;
  out.grid = grid;
  for (double t : grid) {
    auto below = [t](double v) { return v <= t ? 1.0 : 0.0; };
    out.treated_raw.push_back(potential_outcome_moment(below, 1, y, d, h));
    out.untreated_raw.push_back(potential_outcome_moment(below, 0, y, d, h));
    out.effect_raw.push_back(out.treated_raw.back() - out.untreated_raw.back());
  }
  out.treated = monotone_rearrange(out.treated_raw);
  out.untreated = monotone_rearrange(out.untreated_raw);
  for (std::size_t i = 0; i < grid.size(); ++i) out.effect.push_back(out.treated[i] - out.untreated[i]);
  return out;
}

// Smallest grid point where a CDF reaches tau.
inline double quantile_from_cdf(const std::vector<double>& grid, const std::vector<double>& cdf, double tau) {
  if (grid.size() != cdf.size() || grid.empty()) throw InvalidArgument("grid and CDF differ in length");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (cdf[i] >= tau) return grid[i];
  return grid.back();
}

struct AteBounds {
  double p_always = 0.0;
  double p_never = 0.0;
  double acl = 0.0;
  Interval ate;
  std::optional<Interval> att;
  std::optional<Interval> atu;
};

// Bounds on average effects for bounded outcomes: always- and never-taker shares
// and treated/untreated outcome means come from the extreme cells, the complier
// part from the complier-average estimates.
inline AteBounds ate_bounds(const Dataset& data, double y_lo, double y_hi,
                            const std::vector<InstrumentSet>& family = {}) {
  data.validate();
  if (!(y_lo <= y_hi)) throw InvalidArgument("outcome bounds are inverted");
  if (data.y.minCoeff() < y_lo || data.y.maxCoeff() > y_hi)
    throw InvalidArgument("observed outcomes fall outside [" + format_number(y_lo) + ", " + format_number(y_hi) + "]");
  const int j = data.instruments();
  const Assignment all_on = InstrumentSet::all(j);
  const auto rows = row_assignments(data.z);
  double n1 = 0, n0 = 0, nt1 = 0, at0 = 0, y_nt = 0, y_at = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double yi = data.y(Eigen::Index(i)), di = data.d(Eigen::Index(i));
    if (rows[i] == all_on) {
      n1 += 1;
      nt1 += 1 - di;
      y_nt += yi * (1 - di);
    }
    if (rows[i].empty()) {
      n0 += 1;
      at0 += di;
      y_at += yi * di;
    }
  }
  if (n1 == 0 || n0 == 0) throw SingularDesignError("an extreme instrument cell is empty");
  AteBounds out;
  out.p_never = nt1 / n1;
  out.p_always = at0 / n0;
  const double ey_nt = y_nt / n1;  // E[Y(1-D) | Z = all on]
  const double ey_at = y_at / n0;  // E[Y D | Z = all off]
  const Interval never_part{y_lo * out.p_never - ey_nt, y_hi * out.p_never - ey_nt};
  const Interval always_part{ey_at - out.p_always * y_hi, ey_at - out.p_always * y_lo};

  const WaldFit w = wald_acl(data.y, data.d, data.z);
  out.acl = w.point;
  const double complier = 1.0 - out.p_always - out.p_never;
  out.ate = {never_part.lo + always_part.lo + complier * out.acl, never_part.hi + always_part.hi + complier * out.acl};

  const auto fam = family.empty() ? default_family(j) : family;
  const Eigen::MatrixXd gamma = build_gamma(rows, fam);
  const InstrumentSet everything = InstrumentSet::all(j);
  try {
    const auto lt = lambda_for(Estimand::from(TargetParameter::slatt(everything)), rows, fam, j);
    const RatioFit ft = estimate_rho(data.y, data.d, gamma, lt, 0.0);
    const double wt = out.p_always + ft.denominator;
    out.att = Interval{(always_part.lo + ft.numerator) / wt, (always_part.hi + ft.numerator) / wt};
  } catch (const WeakIdentificationError&) {
  } catch (const SingularDesignError&) {
  }
  try {
    const auto lu = lambda_for(Estimand::from(TargetParameter::slatu(everything)), rows, fam, j);
    const RatioFit fu = estimate_rho(data.y, data.d, gamma, lu, 0.0);
    const double wu = out.p_never + fu.denominator;
    out.atu = Interval{(never_part.lo + fu.numerator) / wu, (never_part.hi + fu.numerator) / wu};
  } catch (const WeakIdentificationError&) {
  } catch (const SingularDesignError&) {
  }
  return out;
}

}  // namespace vmiv
