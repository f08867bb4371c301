#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opfgen/grid.hpp"
#include "opfgen/nlp.hpp"
#include "opfgen/polytope.hpp"

namespace opfgen {

/// One sampled load vector, the OPF input.
struct LoadSetpoint {
  Eigen::VectorXd p_hat;  // MW per load
  Eigen::VectorXd q_hat;  // MVAr per load
  double p_tot_target = 0.0;  // MW
  double epsilon = 0.0;  // MW

  Eigen::VectorXd stacked() const;
};

inline constexpr double kDefaultSlackPenalty = 1e4;  // $/MWh

/// Smallest admissible slack penalty: 100 times the largest generator marginal cost at p_max.
double slack_penalty_floor(const Network& net);

/// The penalty a problem will use: an explicit value must exceed the floor (ConfigError
/// otherwise); the default is lifted to twice the floor when the floor exceeds it.
double resolve_slack_penalty(const Network& net, std::optional<double> requested);

/// Offsets into the solver variable vector (pu). The reference angle is not a variable.
struct VariableLayout {
  Eigen::Index va = 0, vm = 0, pg = 0, qg = 0, pd = 0, qd = 0;
  Eigen::Index p_up = 0, p_dw = 0, q_up = 0, q_dw = 0;
  Eigen::Index size = 0;
  std::vector<Eigen::Index> va_of_bus;  // -1 for the reference bus
};

struct OpfProblem {
  const Network* net = nullptr;
  LoadSetpoint setpoint;
  double c_d = kDefaultSlackPenalty;  // $/MWh and $/MVArh
  /// Rows that the realized loads must satisfy: box, plus ratio and slice rows when present.
  LoadPolytope space;
  VariableLayout layout;
  std::vector<BranchEnd> ends;

  /// Counts every modelled quantity, the fixed reference angle included.
  Eigen::Index num_variables() const;
};

/// c_d goes through resolve_slack_penalty.
OpfProblem build_problem(const Network& net, const LoadSetpoint& sp, const LoadPolytope& space,
                         std::optional<double> c_d = std::nullopt);

struct OpfSolution {
  Eigen::VectorXd vm, va;  // pu, rad per bus
  Eigen::VectorXd pg, qg;  // MW, MVAr per generator
  Eigen::VectorXd pd, qd;  // realized MW, MVAr per load
  Eigen::VectorXd slack_p_up, slack_p_dw, slack_q_up, slack_q_dw;
  double objective = 0.0;  // $/h
  SolveStatus status = SolveStatus::numerical_failure;
  double kkt_residual = 0.0;
  int iterations = 0;

  double max_slack() const;
};

/// Solves with the embedded interior point unless another backend is given.
OpfSolution solve(const OpfProblem& prob, const SolverConfig& cfg = {}, const NlpSolver* solver = nullptr);

/// Maximum constraint violation per class, in pu of the network base.
struct ValidationReport {
  std::map<std::string, double> residual;
  double threshold = 1e-5;

  double max_residual() const;
  bool passed() const { return max_residual() <= threshold; }
  std::string worst_class() const;
};

/// Audits a solution from scratch through the Y-bus, independent of the solver's kernels.
ValidationReport validate(const OpfSolution& sol, const Network& net, const OpfProblem& prob);

/// Converged and passes validate(). Slack activation does not make an instance infeasible.
bool is_feasible(const OpfSolution& sol, const OpfProblem& prob);

/// Generation cost plus slack penalty of a solution, $/h.
double objective_value(const OpfProblem& prob, const OpfSolution& sol);

/// The NLP form of a problem, exposed for derivative checks and external solvers.
class OpfNlp : public NlpProblem {
 public:
  OpfNlp(const OpfProblem& prob, const SolverConfig& cfg);

  Eigen::Index num_variables() const override { return prob_.layout.size; }
  void bounds(Eigen::VectorXd& lower, Eigen::VectorXd& upper) const override;
  Eigen::VectorXd initial_point() const override;
  double objective(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::VectorXd& h, SparseMatrix& jac_g,
                   SparseMatrix& jac_h) const override;
  SparseMatrix hessian(const Eigen::VectorXd& x, double sigma, const Eigen::VectorXd& lam,
                       const Eigen::VectorXd& mu) const override;

  /// Splits a solver vector into a solution (status fields left untouched).
  void unpack(const Eigen::VectorXd& x, OpfSolution& sol) const;

 private:
  struct Linear {
    std::vector<std::pair<Eigen::Index, double>> coef;
    double rhs = 0.0;
  };

  const OpfProblem& prob_;
  SolverConfig cfg_;
  std::vector<int> limited_ends_;  // ends with a flow limit
  std::vector<Linear> linear_;     // angle-difference and load coupling rows
};

}  // namespace opfgen
