#pragma once

#include <Eigen/Dense>

namespace opfgen {

struct LpResult {
  enum class Status { optimal, unbounded, infeasible };
  Status status = Status::optimal;
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

/// Maximizes c'x subject to G x <= h with x free.
///
/// Solved as the dual standard-form problem min h'l s.t. G'l = c, l >= 0 with a
/// dense two-phase tableau simplex (Dantzig pricing, Bland's rule once a streak of
/// degenerate pivots appears). The primal point is read back from the final basis.
LpResult maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& g, const Eigen::VectorXd& h);

}  // namespace opfgen
