#pragma once

#include <memory>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace opfgen {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// min f(x) s.t. g(x) = 0, h(x) <= 0, lower <= x <= upper.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual Eigen::Index num_variables() const = 0;
  virtual void bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const = 0;
  virtual Eigen::VectorXd initial_point() const = 0;

  /// Objective value; fills the gradient.
  virtual double objective(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const = 0;

  /// Constraint values and Jacobians (one row per constraint).
  virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::VectorXd& h,
                           SparseMatrix& jac_g, SparseMatrix& jac_h) const = 0;

  /// Hessian of sigma f + lam'g + mu'h.
  virtual SparseMatrix hessian(const Eigen::VectorXd& x, double sigma, const Eigen::VectorXd& lam,
                               const Eigen::VectorXd& mu) const = 0;
};

enum class SolveStatus { converged, infeasible, iteration_limit, numerical_failure };

std::string to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);

struct SolverConfig {
  double tolerance = 1e-6;
  int max_iterations = 300;
  double initial_barrier = 1.0;
  double flat_vm = 1.0;  // pu
  double flat_va = 0.0;  // rad
  double step_fraction = 0.99995;
  double centering = 0.1;
  /// Multiplies the objective inside the solver; reported objectives are unscaled.
  double cost_scale = 1e-4;
  double regularization_start = 1e-8;
  double regularization_max = 1e8;
};

struct NlpResult {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  Eigen::VectorXd lam;  // equality multipliers, problem rows then fixed-variable rows
  Eigen::VectorXd mu;   // inequality multipliers, problem rows then bound rows
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Seam for swapping in another NLP backend.
class NlpSolver {
 public:
  virtual ~NlpSolver() = default;
  virtual NlpResult solve(const NlpProblem& problem, const SolverConfig& cfg) const = 0;
};

/// Primal-dual interior point with a barrier on inequality slacks and a sparse LU on the
/// reduced KKT system. Bounds are folded into the inequalities (equal bounds into the
/// equalities).
class InteriorPointSolver : public NlpSolver {
 public:
  NlpResult solve(const NlpProblem& problem, const SolverConfig& cfg) const override;
};

std::shared_ptr<const NlpSolver> default_solver();

}  // namespace opfgen
