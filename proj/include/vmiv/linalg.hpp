#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "vmiv/error.hpp"

namespace vmiv {

inline constexpr double kRankTolerance = 1e-8;

// Least squares through a column-pivoted QR of the design. Solves with the
// normal matrix go through the triangular factor, never an explicit inverse.
class LeastSquares {
 public:
  explicit LeastSquares(const Eigen::MatrixXd& design) : qr_(design), cols_(design.cols()) {
    qr_.setThreshold(kRankTolerance);
  }

  bool full_rank() const { return qr_.rank() == cols_; }
  Eigen::Index rank() const { return qr_.rank(); }

  void require_full_rank(const std::string& what) const {
    if (!full_rank())
      throw SingularDesignError(what + " is rank deficient (rank " + std::to_string(qr_.rank()) + " of " +
                                std::to_string(cols_) + ")");
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return qr_.solve(rhs); }

  // (X'X)^{-1} b with X = Q R P'.
  Eigen::MatrixXd normal_solve(const Eigen::MatrixXd& b) const {
    const auto r = qr_.matrixR().topLeftCorner(cols_, cols_).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd pb = qr_.colsPermutation().transpose() * b;
    Eigen::MatrixXd y = r.transpose().solve(pb);
    Eigen::MatrixXd x = r.solve(y);
    return qr_.colsPermutation() * x;
  }

 private:
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::Index cols_;
};

// Ridge fit (X'X + alpha I)^{-1} X'V via QR of the stacked matrix [X; sqrt(alpha) I].
class RidgeSolver {
 public:
  RidgeSolver(const Eigen::MatrixXd& design, double alpha)
      : alpha_(alpha), rows_(design.rows()), cols_(design.cols()), ls_(stack(design, alpha)) {}

  bool full_rank() const { return ls_.full_rank(); }
  void require_full_rank(const std::string& what) const { ls_.require_full_rank(what); }

  Eigen::MatrixXd coefficients(const Eigen::MatrixXd& v) const {
    if (alpha_ == 0) return ls_.solve(v);
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(rows_ + cols_, v.cols());
    padded.topRows(rows_) = v;
    return ls_.solve(padded);
  }

  // (X'X + alpha I)^{-1} b
  Eigen::MatrixXd normal_solve(const Eigen::MatrixXd& b) const { return ls_.normal_solve(b); }

 private:
  static Eigen::MatrixXd stack(const Eigen::MatrixXd& design, double alpha) {
    if (alpha < 0 || !std::isfinite(alpha)) throw InvalidArgument("regularization must be finite and nonnegative");
    if (alpha == 0) return design;
    Eigen::MatrixXd stacked(design.rows() + design.cols(), design.cols());
    stacked.topRows(design.rows()) = design;
    stacked.bottomRows(design.cols()) = std::sqrt(alpha) * Eigen::MatrixXd::Identity(design.cols(), design.cols());
    return stacked;
  }

  double alpha_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  LeastSquares ls_;
};

}  // namespace vmiv
