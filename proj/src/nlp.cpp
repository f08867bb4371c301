#include "opfgen/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SparseLU>

#include "opfgen/errors.hpp"

namespace opfgen {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::iteration_limit:
      return "iteration-limit";
    case SolveStatus::numerical_failure:
      return "numerical-failure";
  }
  return "numerical-failure";
}

SolveStatus solve_status_from_string(const std::string& s) {
  for (SolveStatus v : {SolveStatus::converged, SolveStatus::infeasible, SolveStatus::iteration_limit,
                        SolveStatus::numerical_failure})
    if (to_string(v) == s) return v;
  throw ParseError("unknown solver status '" + s + "'", 0);
}

namespace {

using Eigen::Index;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

// Problem rows plus the rows generated from variable bounds.
class Augmented {
 public:
  Augmented(const NlpProblem& p, double cost_scale) : p_(p), scale_(cost_scale) {
    const Index n = p.num_variables();
    VectorXd lo, hi;
    p.bounds(lo, hi);
    if (lo.size() != n || hi.size() != n) throw PreconditionError("bound vectors do not match the variable count");
    Triplets fix, box;
    for (Index i = 0; i < n; ++i) {
      if (lo(i) > hi(i)) throw PreconditionError("inverted variable bounds");
      if (std::isfinite(lo(i)) && hi(i) - lo(i) <= 1e-12 * std::max(1.0, std::abs(lo(i)))) {
        fix.emplace_back(static_cast<Index>(fixed_value_.size()), i, 1.0);
        fixed_value_.push_back(lo(i));
        continue;
      }
      if (std::isfinite(lo(i))) {
        box.emplace_back(static_cast<Index>(box_rhs_.size()), i, -1.0);
        box_rhs_.push_back(-lo(i));
      }
      if (std::isfinite(hi(i))) {
        box.emplace_back(static_cast<Index>(box_rhs_.size()), i, 1.0);
        box_rhs_.push_back(hi(i));
      }
    }
    fix_.resize(static_cast<Index>(fixed_value_.size()), n);
    fix_.setFromTriplets(fix.begin(), fix.end());
    box_.resize(static_cast<Index>(box_rhs_.size()), n);
    box_.setFromTriplets(box.begin(), box.end());
  }

  struct Eval {
    double f = 0.0;  // scaled
    VectorXd df, g, h;
    SparseMatrix jg, jh;
    Index g_rows = 0, h_rows = 0;  // problem rows (before bound rows)
  };

  Eval eval(const VectorXd& x) const {
    Eval e;
    e.f = scale_ * p_.objective(x, e.df);
    e.df *= scale_;
    VectorXd g, h;
    SparseMatrix jg, jh;
    p_.constraints(x, g, h, jg, jh);
    e.g_rows = g.size();
    e.h_rows = h.size();
    e.g.resize(g.size() + fix_.rows());
    e.g << g, fix_ * x - Eigen::Map<const VectorXd>(fixed_value_.data(), fix_.rows());
    e.h.resize(h.size() + box_.rows());
    e.h << h, box_ * x - Eigen::Map<const VectorXd>(box_rhs_.data(), box_.rows());
    e.jg = stack(jg, fix_, x.size());
    e.jh = stack(jh, box_, x.size());
    return e;
  }

  SparseMatrix hessian(const VectorXd& x, const VectorXd& lam, const VectorXd& mu, const Eval& e) const {
    return p_.hessian(x, scale_, lam.head(e.g_rows), mu.head(e.h_rows));
  }

 private:
  static SparseMatrix stack(const SparseMatrix& top, const SparseMatrix& bottom, Index n) {
    Triplets t;
    t.reserve(static_cast<std::size_t>(top.nonZeros() + bottom.nonZeros()));
    for (Index k = 0; k < top.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(top, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (Index k = 0; k < bottom.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(bottom, k); it; ++it)
        t.emplace_back(top.rows() + it.row(), it.col(), it.value());
    SparseMatrix out(top.rows() + bottom.rows(), n);
    out.setFromTriplets(t.begin(), t.end());
    return out;
  }

  const NlpProblem& p_;
  double scale_;
  SparseMatrix fix_, box_;
  std::vector<double> fixed_value_, box_rhs_;
};

bool finite(const VectorXd& v) { return v.allFinite(); }

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// [M jg'; jg 0] with delta added to the M diagonal.
SparseMatrix kkt_matrix(const SparseMatrix& m, const SparseMatrix& jg, double delta) {
  const Index n = m.rows(), neq = jg.rows();
  Triplets t;
  t.reserve(static_cast<std::size_t>(m.nonZeros() + 2 * jg.nonZeros() + n + neq));
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < jg.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(jg, k); it; ++it) {
      t.emplace_back(n + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), n + it.row(), it.value());
    }
  for (Index i = 0; i < n; ++i) t.emplace_back(i, i, delta);
  for (Index i = 0; i < neq; ++i) t.emplace_back(n + i, n + i, 0.0);
  SparseMatrix k(n + neq, n + neq);
  k.setFromTriplets(t.begin(), t.end());
  k.makeCompressed();
  return k;
}

}  // namespace

NlpResult InteriorPointSolver::solve(const NlpProblem& problem, const SolverConfig& cfg) const {
  if (!(cfg.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (cfg.max_iterations < 1) throw ConfigError("solver needs at least one iteration");
  if (!(cfg.cost_scale > 0.0)) throw ConfigError("cost scale must be positive");

  const Augmented aug(problem, cfg.cost_scale);
  NlpResult res;
  VectorXd x = problem.initial_point();
  const Index n = x.size();
  Augmented::Eval e = aug.eval(x);
  const Index neq = e.g.size(), niq = e.h.size();

  const double z0 = cfg.initial_barrier;
  double gamma = 1.0;
  VectorXd lam = VectorXd::Zero(neq);
  VectorXd z = VectorXd::Constant(niq, z0);
  for (Index i = 0; i < niq; ++i)
    if (e.h(i) < -z0) z(i) = -e.h(i);
  VectorXd mu = VectorXd::Constant(niq, z0);
  for (Index i = 0; i < niq; ++i)
    if (gamma / z(i) > z0) mu(i) = gamma / z(i);

  double f0 = e.f;
  double last_delta = 0.0;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;

  auto finish = [&](SolveStatus s, int iters, double kkt) {
    res.status = s;
    res.x = x;
    res.lam = lam;
    res.mu = mu;
    res.objective = e.f / cfg.cost_scale;
    res.iterations = iters;
    res.kkt_residual = kkt;
    return res;
  };

  for (int iter = 0;; ++iter) {
    const VectorXd lx = e.df + e.jg.transpose() * lam + e.jh.transpose() * mu;
    const double hmax = niq ? std::max(0.0, e.h.maxCoeff()) : 0.0;
    const double feascond = std::max(inf_norm(e.g), hmax) / (1.0 + std::max(inf_norm(x), inf_norm(z)));
    const double gradcond = inf_norm(lx) / (1.0 + std::max(inf_norm(lam), inf_norm(mu)));
    const double compcond = (niq ? z.dot(mu) : 0.0) / (1.0 + inf_norm(x));
    const double costcond = std::abs(e.f - f0) / (1.0 + std::abs(f0));
    const double kkt = std::max({feascond, gradcond, compcond});
    if (iter > 0 && kkt <= cfg.tolerance && costcond <= cfg.tolerance)
      return finish(SolveStatus::converged, iter, kkt);
    if (iter >= cfg.max_iterations) return finish(SolveStatus::iteration_limit, iter, kkt);

    const SparseMatrix hess = aug.hessian(x, lam, mu, e);
    const VectorXd zinv = z.cwiseInverse();
    const SparseMatrix jh_scaled = (mu.cwiseProduct(zinv)).asDiagonal() * e.jh;
    const SparseMatrix m = hess + SparseMatrix(e.jh.transpose() * jh_scaled);
    const VectorXd nvec = lx + e.jh.transpose() * (zinv.cwiseProduct(mu.cwiseProduct(e.h).array().matrix() +
                                                                      VectorXd::Constant(niq, gamma)));
    VectorXd rhs(n + neq);
    rhs << -nvec, -e.g;

    // Factor, adding delta*I to the Hessian block while the step is unusable or shows
    // negative curvature along itself.
    VectorXd step;
    bool ok = false;
    double delta = 0.0;
    bool pattern_ready = false;
    while (true) {
      const SparseMatrix k = kkt_matrix(m, e.jg, delta);
      if (!pattern_ready) {
        lu.analyzePattern(k);
        pattern_ready = true;
      }
      lu.factorize(k);
      if (lu.info() == Eigen::Success) {
        step = lu.solve(rhs);
        if (lu.info() == Eigen::Success && finite(step)) {
          const VectorXd dx = step.head(n);
          const double curv = dx.dot(m * dx) + delta * dx.squaredNorm();
          if (curv >= -1e-12 * dx.squaredNorm()) {
            ok = true;
            break;
          }
        }
      }
      delta = delta == 0.0 ? std::max(cfg.regularization_start, last_delta / 4.0) : 2.0 * delta;
      if (delta > cfg.regularization_max) break;
    }
    if (!ok) return finish(SolveStatus::numerical_failure, iter, kkt);
    last_delta = delta;

    const VectorXd dx = step.head(n);
    const VectorXd dlam = step.tail(neq);
    const VectorXd dz = -e.h - z - e.jh * dx;
    const VectorXd dmu = -mu + zinv.cwiseProduct(VectorXd::Constant(niq, gamma) - mu.cwiseProduct(dz));

    double alphap = 1.0, alphad = 1.0;
    for (Index i = 0; i < niq; ++i) {
      if (dz(i) < 0.0) alphap = std::min(alphap, cfg.step_fraction * z(i) / -dz(i));
      if (dmu(i) < 0.0) alphad = std::min(alphad, cfg.step_fraction * mu(i) / -dmu(i));
    }
    x += alphap * dx;
    z += alphap * dz;
    lam += alphad * dlam;
    mu += alphad * dmu;
    if (niq > 0) gamma = cfg.centering * z.dot(mu) / static_cast<double>(niq);

    f0 = e.f;
    e = aug.eval(x);
    if (!finite(x) || !std::isfinite(e.f) || !finite(e.g) || !finite(e.h))
      return finish(SolveStatus::numerical_failure, iter + 1, kkt);
    if (inf_norm(x) > 1e10 || (niq && inf_norm(mu) > 1e20)) return finish(SolveStatus::infeasible, iter + 1, kkt);
  }
}

std::shared_ptr<const NlpSolver> default_solver() {
  static const auto solver = std::make_shared<const InteriorPointSolver>();
  return solver;
}

}  // namespace opfgen
