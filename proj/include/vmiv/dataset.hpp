#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vmiv/combinatorics.hpp"
#include "vmiv/error.hpp"

namespace vmiv {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool empty() const { return lo > hi; }
  double width() const { return hi - lo; }
};

// Outcome, binary treatment, binary instruments (columns of z) and optional controls.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd d;
  Eigen::MatrixXd z;
  Eigen::MatrixXd x;
  std::vector<std::string> instrument_names;
  std::vector<std::string> control_names;

  Eigen::Index n() const { return y.size(); }
  int instruments() const { return int(z.cols()); }
  bool has_controls() const { return x.cols() > 0; }

  void validate() const {
    const Eigen::Index n = y.size();
    if (n == 0) throw InputError("dataset has no rows");
    if (d.size() != n || z.rows() != n) throw InputError("outcome, treatment and instruments differ in length");
    if (x.cols() > 0 && x.rows() != n) throw InputError("controls differ in length from the outcome");
    check_instrument_count(int(z.cols()));
    if (!y.allFinite()) throw InputError("outcome contains non-finite values");
    if (x.cols() > 0 && !x.allFinite()) throw InputError("controls contain non-finite values");
    for (Eigen::Index i = 0; i < n; ++i)
      if (d(i) != 0.0 && d(i) != 1.0) throw InputError("treatment must be 0/1 (row " + std::to_string(i + 1) + ")");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < z.cols(); ++c)
        if (z(i, c) != 0.0 && z(i, c) != 1.0)
          throw InputError("instruments must be 0/1 (row " + std::to_string(i + 1) + ", column " +
                           std::to_string(c + 1) + ")");
  }

  Dataset subset(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    out.y = y(rows);
    out.d = d(rows);
    out.z = z(rows, Eigen::all);
    if (x.cols() > 0) out.x = x(rows, Eigen::all);
    out.instrument_names = instrument_names;
    out.control_names = control_names;
    return out;
  }
};

// Per-row assignment as a bitmask over instrument columns.
inline std::vector<Assignment> row_assignments(const Eigen::MatrixXd& z) {
  std::vector<Assignment> out(std::size_t(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    std::uint32_t b = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      if (z(i, c) != 0.0) b |= 1u << c;
    out[std::size_t(i)] = Assignment(b);
  }
  return out;
}

}  // namespace vmiv
