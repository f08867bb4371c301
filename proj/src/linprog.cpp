#include "opfgen/linprog.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace opfgen {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-10;

class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& g, const Eigen::VectorXd& c)
      : rows_(g.cols()), structural_(g.rows()), t_(rows_, structural_ + rows_ + 1),
        basis_(rows_), sign_(rows_), banned_(structural_ + rows_, 0) {
    t_.setZero();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      sign_(i) = c(i) >= 0.0 ? 1.0 : -1.0;
      t_.row(i).head(structural_) = sign_(i) * g.col(i).transpose();
      t_(i, structural_ + i) = 1.0;
      t_(i, rhs()) = std::abs(c(i));
      basis_[i] = structural_ + i;
    }
  }

  Eigen::Index rhs() const { return structural_ + rows_; }
  bool is_artificial(Eigen::Index j) const { return j >= structural_; }

  // Runs simplex iterations for the given column costs; false when unbounded.
  bool optimize(const Eigen::VectorXd& cost, int& pivots) {
    int degenerate_streak = 0;
    const int max_pivots = 50 * static_cast<int>(rows_ + structural_) + 1000;
    for (int iter = 0; iter < max_pivots; ++iter) {
      const Eigen::VectorXd reduced = reduced_costs(cost);
      const bool bland = degenerate_streak > 25;
      Eigen::Index enter = -1;
      double best = -kCostTol;
      for (Eigen::Index j = 0; j < reduced.size(); ++j) {
        if (banned_[j] || reduced(j) >= -kCostTol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (reduced(j) < best) {
          best = reduced(j);
          enter = j;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double r = t_(i, rhs()) / a;
        if (r < ratio - 1e-12 || (std::abs(r - ratio) <= 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
          ratio = r;
          leave = i;
        }
      }
      if (leave < 0) return false;
      degenerate_streak = ratio <= 1e-12 ? degenerate_streak + 1 : 0;
      pivot(leave, enter);
      ++pivots;
    }
    return true;
  }

  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd cb(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) cb(i) = cost(basis_[i]);
    return cost - (cb.transpose() * t_.leftCols(structural_ + rows_)).transpose();
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  // Pivots remaining artificials out of the basis; rows that cannot be pivoted are redundant.
  void expel_artificials() {
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      Eigen::Index col = -1;
      double best = kPivotTol;
      for (Eigen::Index j = 0; j < structural_; ++j)
        if (std::abs(t_(i, j)) > best) {
          best = std::abs(t_(i, j));
          col = j;
        }
      if (col >= 0) pivot(i, col);
    }
    for (Eigen::Index j = structural_; j < structural_ + rows_; ++j) banned_[j] = 1;
  }

  double objective(const Eigen::VectorXd& cost) const {
    double f = 0.0;
    for (Eigen::Index i = 0; i < rows_; ++i) f += cost(basis_[i]) * t_(i, rhs());
    return f;
  }

  // Dual values of the equality rows, i.e. the primal point of the inequality-form LP.
  Eigen::VectorXd row_duals(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd y(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < rows_; ++k) s += cost(basis_[k]) * t_(k, structural_ + i);
      y(i) = sign_(i) * s;
    }
    return y;
  }

  Eigen::Index structural() const { return structural_; }
  Eigen::Index width() const { return structural_ + rows_; }

 private:
  Eigen::Index rows_;
  Eigen::Index structural_;
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
  Eigen::VectorXd sign_;
  std::vector<char> banned_;
};

}  // namespace

LpResult maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& g, const Eigen::VectorXd& h) {
  LpResult result;
  Tableau tab(g, c);

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(tab.width());
  phase1.tail(tab.width() - tab.structural()).setOnes();
  tab.optimize(phase1, result.pivots);
  if (tab.objective(phase1) > 1e-9 * (1.0 + c.lpNorm<Eigen::Infinity>())) {
    // The dual is infeasible, so the (always feasible here) primal is unbounded.
    result.status = LpResult::Status::unbounded;
    return result;
  }
  tab.expel_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(tab.width());
  phase2.head(tab.structural()) = h;
  if (!tab.optimize(phase2, result.pivots)) {
    result.status = LpResult::Status::infeasible;
    return result;
  }
  result.x = tab.row_duals(phase2);
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace opfgen
