#include "opfgen/acopf.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "opfgen/errors.hpp"

namespace opfgen {

using Eigen::Index;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

VectorXd LoadSetpoint::stacked() const {
  VectorXd x(p_hat.size() + q_hat.size());
  x << p_hat, q_hat;
  return x;
}

double slack_penalty_floor(const Network& net) {
  double mc = 0.0;
  for (const Generator& g : net.generators) mc = std::max(mc, g.marginal_cost_at_max());
  return 100.0 * mc;
}

double resolve_slack_penalty(const Network& net, std::optional<double> requested) {
  const double floor = slack_penalty_floor(net);
  if (requested) {
    if (!(*requested > floor) || !(*requested > 0.0))
      throw ConfigError("slack penalty must exceed 100 times the largest marginal cost (" + std::to_string(floor) +
                        " $/MWh)");
    return *requested;
  }
  return kDefaultSlackPenalty > floor ? kDefaultSlackPenalty : 2.0 * floor;
}

Index OpfProblem::num_variables() const {
  const auto nb = static_cast<Index>(net->buses.size());
  const auto ng = static_cast<Index>(net->generators.size());
  const auto nd = static_cast<Index>(net->loads.size());
  return 2 * nb + 2 * ng + 6 * nd;
}

double OpfSolution::max_slack() const {
  double m = 0.0;
  for (const VectorXd* v : {&slack_p_up, &slack_p_dw, &slack_q_up, &slack_q_dw})
    if (v->size()) m = std::max(m, v->maxCoeff());
  return m;
}

OpfProblem build_problem(const Network& net, const LoadSetpoint& sp, const LoadPolytope& space,
                         std::optional<double> c_d) {
  const auto nd = static_cast<Index>(net.loads.size());
  if (sp.p_hat.size() != nd || sp.q_hat.size() != nd) throw PreconditionError("setpoint size does not match the loads");
  if (space.num_loads != nd) throw PreconditionError("load space does not match the network");
  if (!space.space.contains(sp.stacked(), 1e-6)) throw PreconditionError("setpoint lies outside its load space");

  OpfProblem prob;
  prob.c_d = resolve_slack_penalty(net, c_d);
  prob.net = &net;
  prob.setpoint = sp;
  prob.space = space;
  prob.ends = branch_admittances(net);

  const auto nb = static_cast<Index>(net.buses.size());
  const auto ng = static_cast<Index>(net.generators.size());
  VariableLayout& l = prob.layout;
  const int ref = net.reference_index();
  l.va_of_bus.assign(static_cast<std::size_t>(nb), -1);
  Index k = 0;
  for (Index i = 0; i < nb; ++i)
    if (i != ref) l.va_of_bus[static_cast<std::size_t>(i)] = k++;
  l.va = 0;
  l.vm = k;
  l.pg = l.vm + nb;
  l.qg = l.pg + ng;
  l.pd = l.qg + ng;
  l.qd = l.pd + nd;
  l.p_up = l.qd + nd;
  l.p_dw = l.p_up + nd;
  l.q_up = l.p_dw + nd;
  l.q_dw = l.q_up + nd;
  l.size = l.q_dw + nd;
  return prob;
}

namespace {

// F = c va^2 + va vb (alpha cos d + beta sin d), d = ta - tb, over (va, vb, ta, tb).
struct Kernel {
  double c, alpha, beta;
};

struct KernelEval {
  double value;
  std::array<double, 4> grad;
  std::array<std::array<double, 4>, 4> hess;
};

Kernel real_part(const BranchEnd& e) { return {e.y_self.real(), e.y_mutual.real(), e.y_mutual.imag()}; }
Kernel imag_part(const BranchEnd& e) { return {-e.y_self.imag(), -e.y_mutual.imag(), e.y_mutual.real()}; }

KernelEval evaluate(const Kernel& k, double va, double vb, double ta, double tb) {
  const double d = ta - tb, cs = std::cos(d), sn = std::sin(d);
  const double a = k.alpha * cs + k.beta * sn;
  const double ap = -k.alpha * sn + k.beta * cs;
  const double app = -a;
  KernelEval r{};
  r.value = k.c * va * va + va * vb * a;
  r.grad = {2.0 * k.c * va + vb * a, va * a, va * vb * ap, -va * vb * ap};
  auto& h = r.hess;
  h[0][0] = 2.0 * k.c;
  h[0][1] = h[1][0] = a;
  h[0][2] = h[2][0] = vb * ap;
  h[0][3] = h[3][0] = -vb * ap;
  h[1][1] = 0.0;
  h[1][2] = h[2][1] = va * ap;
  h[1][3] = h[3][1] = -va * ap;
  h[2][2] = h[3][3] = va * vb * app;
  h[2][3] = h[3][2] = -va * vb * app;
  return r;
}

}  // namespace

OpfNlp::OpfNlp(const OpfProblem& prob, const SolverConfig& cfg) : prob_(prob), cfg_(cfg) {
  const Network& net = *prob.net;
  const VariableLayout& l = prob.layout;
  for (std::size_t e = 0; e < prob.ends.size(); ++e)
    if (net.branches[static_cast<std::size_t>(prob.ends[e].branch)].has_flow_limit()) limited_ends_.push_back(static_cast<int>(e));

  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    const Branch& br = net.branches[b];
    const Index f = l.va_of_bus[static_cast<std::size_t>(net.branch_from[b])];
    const Index t = l.va_of_bus[static_cast<std::size_t>(net.branch_to[b])];
    auto row = [&](double sign, double rhs) {
      Linear lin;
      if (f >= 0) lin.coef.emplace_back(l.va + f, sign);
      if (t >= 0) lin.coef.emplace_back(l.va + t, -sign);
      lin.rhs = rhs;
      linear_.push_back(std::move(lin));
    };
    if (std::isfinite(br.theta_max)) row(1.0, br.theta_max);
    if (std::isfinite(br.theta_min)) row(-1.0, -br.theta_min);
  }

  // Ratio and slice rows act on realized loads; rows are in MW so the right side is scaled.
  // Zero-width coordinates are substituted: a row left without free terms already holds
  // (build_problem checked membership) and would only give the barrier an empty interior.
  const Polytope& sp = prob.space.space;
  const Index nd = prob.space.num_loads;
  const std::vector<char> fixed = prob.space.fixed_mask();
  const VectorXd fixed_value = prob.space.box_lower();
  for (Index r = prob.space.first_coupling_row(); r < sp.rows(); ++r) {
    Linear lin;
    double rhs = sp.b(r);
    for (Index j = 0; j < 2 * nd; ++j) {
      const double a = sp.a(r, j);
      if (a == 0.0) continue;
      if (fixed[static_cast<std::size_t>(j)])
        rhs -= a * fixed_value(j);
      else
        lin.coef.emplace_back(j < nd ? l.pd + j : l.qd + (j - nd), a);
    }
    if (lin.coef.empty()) continue;
    lin.rhs = rhs / net.base_mva;
    linear_.push_back(std::move(lin));
  }
}

void OpfNlp::bounds(VectorXd& lower, VectorXd& upper) const {
  const Network& net = *prob_.net;
  const VariableLayout& l = prob_.layout;
  const double base = net.base_mva;
  lower = VectorXd::Constant(l.size, -kInf);
  upper = VectorXd::Constant(l.size, kInf);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    lower(l.vm + static_cast<Index>(i)) = net.buses[i].v_min;
    upper(l.vm + static_cast<Index>(i)) = net.buses[i].v_max;
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    const auto gi = static_cast<Index>(g);
    lower(l.pg + gi) = gen.p_min / base;
    upper(l.pg + gi) = gen.p_max / base;
    lower(l.qg + gi) = gen.q_min / base;
    upper(l.qg + gi) = gen.q_max / base;
  }
  const Index nd = prob_.space.num_loads;
  lower.segment(l.pd, nd) = prob_.space.p_min / base;
  upper.segment(l.pd, nd) = prob_.space.p_max / base;
  lower.segment(l.qd, nd) = prob_.space.q_min / base;
  upper.segment(l.qd, nd) = prob_.space.q_max / base;
  lower.segment(l.p_up, 4 * nd).setZero();
}

VectorXd OpfNlp::initial_point() const {
  const Network& net = *prob_.net;
  const VariableLayout& l = prob_.layout;
  const double base = net.base_mva;
  VectorXd x = VectorXd::Zero(l.size);
  x.segment(l.va, l.vm - l.va).setConstant(cfg_.flat_va);
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    x(l.vm + static_cast<Index>(i)) = std::clamp(cfg_.flat_vm, net.buses[i].v_min, net.buses[i].v_max);
  auto mid = [](double lo, double hi) {
    if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
    if (std::isfinite(lo)) return std::max(lo, 0.0);
    if (std::isfinite(hi)) return std::min(hi, 0.0);
    return 0.0;
  };
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    x(l.pg + static_cast<Index>(g)) = mid(gen.p_min, gen.p_max) / base;
    x(l.qg + static_cast<Index>(g)) = mid(gen.q_min, gen.q_max) / base;
  }
  const Index nd = prob_.space.num_loads;
  x.segment(l.pd, nd) = prob_.setpoint.p_hat / base;
  x.segment(l.qd, nd) = prob_.setpoint.q_hat / base;
  x.segment(l.p_up, 4 * nd).setConstant(1e-2);
  return x;
}

double OpfNlp::objective(const VectorXd& x, VectorXd& grad) const {
  const Network& net = *prob_.net;
  const VariableLayout& l = prob_.layout;
  const double base = net.base_mva;
  grad = VectorXd::Zero(l.size);
  double f = 0.0;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    const Index k = l.pg + static_cast<Index>(g);
    const double p = base * x(k);
    f += gen.c2 * p * p + gen.c1 * p + gen.c0;
    grad(k) = base * (2.0 * gen.c2 * p + gen.c1);
  }
  const Index nd = prob_.space.num_loads;
  f += prob_.c_d * base * x.segment(l.p_up, 4 * nd).sum();
  grad.segment(l.p_up, 4 * nd).setConstant(prob_.c_d * base);
  return f;
}

void OpfNlp::constraints(const VectorXd& x, VectorXd& g, VectorXd& h, SparseMatrix& jac_g,
                         SparseMatrix& jac_h) const {
  const Network& net = *prob_.net;
  const VariableLayout& l = prob_.layout;
  const double base = net.base_mva;
  const auto nb = static_cast<Index>(net.buses.size());
  const Index nd = prob_.space.num_loads;
  const Index neq = 2 * nb + 2 * nd;
  const Index niq = static_cast<Index>(limited_ends_.size() + linear_.size());

  g = VectorXd::Zero(neq);
  h = VectorXd::Zero(niq);
  Triplets tg, th;

  auto angle = [&](int bus) {
    const Index k = l.va_of_bus[static_cast<std::size_t>(bus)];
    return k < 0 ? 0.0 : x(l.va + k);
  };
  auto indices = [&](const BranchEnd& e) {
    return std::array<Index, 4>{l.vm + e.bus, l.vm + e.other,
                                l.va_of_bus[static_cast<std::size_t>(e.bus)] < 0 ? -1 : l.va + l.va_of_bus[static_cast<std::size_t>(e.bus)],
                                l.va_of_bus[static_cast<std::size_t>(e.other)] < 0 ? -1 : l.va + l.va_of_bus[static_cast<std::size_t>(e.other)]};
  };

  for (const BranchEnd& e : prob_.ends) {
    const auto idx = indices(e);
    const double va = x(l.vm + e.bus), vb = x(l.vm + e.other);
    const KernelEval p = evaluate(real_part(e), va, vb, angle(e.bus), angle(e.other));
    const KernelEval q = evaluate(imag_part(e), va, vb, angle(e.bus), angle(e.other));
    g(e.bus) += p.value;
    g(nb + e.bus) += q.value;
    for (int k = 0; k < 4; ++k) {
      if (idx[k] < 0) continue;
      tg.emplace_back(e.bus, idx[k], p.grad[k]);
      tg.emplace_back(nb + e.bus, idx[k], q.grad[k]);
    }
  }
  for (Index i = 0; i < nb; ++i) {
    const Bus& bus = net.buses[static_cast<std::size_t>(i)];
    const double v = x(l.vm + i);
    g(i) += bus.shunt_g * v * v;
    g(nb + i) -= bus.shunt_b * v * v;
    tg.emplace_back(i, l.vm + i, 2.0 * bus.shunt_g * v);
    tg.emplace_back(nb + i, l.vm + i, -2.0 * bus.shunt_b * v);
  }
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const Index b = net.gen_bus[k], gi = static_cast<Index>(k);
    g(b) -= x(l.pg + gi);
    g(nb + b) -= x(l.qg + gi);
    tg.emplace_back(b, l.pg + gi, -1.0);
    tg.emplace_back(nb + b, l.qg + gi, -1.0);
  }
  for (Index d = 0; d < nd; ++d) {
    const Index b = net.load_bus[static_cast<std::size_t>(d)];
    g(b) += x(l.pd + d);
    g(nb + b) += x(l.qd + d);
    tg.emplace_back(b, l.pd + d, 1.0);
    tg.emplace_back(nb + b, l.qd + d, 1.0);

    // pd = p_hat + p_dw - p_up
    const Index rp = 2 * nb + d, rq = 2 * nb + nd + d;
    g(rp) = x(l.pd + d) - prob_.setpoint.p_hat(d) / base - x(l.p_dw + d) + x(l.p_up + d);
    g(rq) = x(l.qd + d) - prob_.setpoint.q_hat(d) / base - x(l.q_dw + d) + x(l.q_up + d);
    tg.emplace_back(rp, l.pd + d, 1.0);
    tg.emplace_back(rp, l.p_dw + d, -1.0);
    tg.emplace_back(rp, l.p_up + d, 1.0);
    tg.emplace_back(rq, l.qd + d, 1.0);
    tg.emplace_back(rq, l.q_dw + d, -1.0);
    tg.emplace_back(rq, l.q_up + d, 1.0);
  }

  Index row = 0;
  for (int ei : limited_ends_) {
    const BranchEnd& e = prob_.ends[static_cast<std::size_t>(ei)];
    const auto idx = indices(e);
    const double va = x(l.vm + e.bus), vb = x(l.vm + e.other);
    const KernelEval p = evaluate(real_part(e), va, vb, angle(e.bus), angle(e.other));
    const KernelEval q = evaluate(imag_part(e), va, vb, angle(e.bus), angle(e.other));
    const double smax = net.branches[static_cast<std::size_t>(e.branch)].s_max / base;
    h(row) = p.value * p.value + q.value * q.value - smax * smax;
    for (int k = 0; k < 4; ++k)
      if (idx[k] >= 0) th.emplace_back(row, idx[k], 2.0 * (p.value * p.grad[k] + q.value * q.grad[k]));
    ++row;
  }
  for (const Linear& lin : linear_) {
    double s = -lin.rhs;
    for (const auto& [j, a] : lin.coef) {
      s += a * x(j);
      th.emplace_back(row, j, a);
    }
    h(row++) = s;
  }

  jac_g.resize(neq, l.size);
  jac_g.setFromTriplets(tg.begin(), tg.end());
  jac_h.resize(niq, l.size);
  jac_h.setFromTriplets(th.begin(), th.end());
}

SparseMatrix OpfNlp::hessian(const VectorXd& x, double sigma, const VectorXd& lam, const VectorXd& mu) const {
  const Network& net = *prob_.net;
  const VariableLayout& l = prob_.layout;
  const double base = net.base_mva;
  const auto nb = static_cast<Index>(net.buses.size());
  Triplets t;

  auto angle = [&](int bus) {
    const Index k = l.va_of_bus[static_cast<std::size_t>(bus)];
    return k < 0 ? 0.0 : x(l.va + k);
  };
  auto var = [&](int bus) {
    const Index k = l.va_of_bus[static_cast<std::size_t>(bus)];
    return k < 0 ? Index(-1) : l.va + k;
  };
  auto add_block = [&](const std::array<Index, 4>& idx, const auto& block) {
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (idx[a] >= 0 && idx[b] >= 0 && block[a][b] != 0.0) t.emplace_back(idx[a], idx[b], block[a][b]);
  };

  for (const BranchEnd& e : prob_.ends) {
    const std::array<Index, 4> idx{l.vm + e.bus, l.vm + e.other, var(e.bus), var(e.other)};
    const double va = x(l.vm + e.bus), vb = x(l.vm + e.other);
    const KernelEval p = evaluate(real_part(e), va, vb, angle(e.bus), angle(e.other));
    const KernelEval q = evaluate(imag_part(e), va, vb, angle(e.bus), angle(e.other));
    std::array<std::array<double, 4>, 4> block{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) block[a][b] = lam(e.bus) * p.hess[a][b] + lam(nb + e.bus) * q.hess[a][b];
    add_block(idx, block);
  }
  for (Index i = 0; i < nb; ++i) {
    const Bus& bus = net.buses[static_cast<std::size_t>(i)];
    const double v = 2.0 * (lam(i) * bus.shunt_g - lam(nb + i) * bus.shunt_b);
    if (v != 0.0) t.emplace_back(l.vm + i, l.vm + i, v);
  }
  for (std::size_t r = 0; r < limited_ends_.size(); ++r) {
    const double m = mu(static_cast<Index>(r));
    if (m == 0.0) continue;
    const BranchEnd& e = prob_.ends[static_cast<std::size_t>(limited_ends_[r])];
    const std::array<Index, 4> idx{l.vm + e.bus, l.vm + e.other, var(e.bus), var(e.other)};
    const double va = x(l.vm + e.bus), vb = x(l.vm + e.other);
    const KernelEval p = evaluate(real_part(e), va, vb, angle(e.bus), angle(e.other));
    const KernelEval q = evaluate(imag_part(e), va, vb, angle(e.bus), angle(e.other));
    std::array<std::array<double, 4>, 4> block{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        block[a][b] = 2.0 * m *
                      (p.grad[a] * p.grad[b] + p.value * p.hess[a][b] + q.grad[a] * q.grad[b] + q.value * q.hess[a][b]);
    add_block(idx, block);
  }
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const double c2 = net.generators[g].c2;
    if (c2 != 0.0) t.emplace_back(l.pg + static_cast<Index>(g), l.pg + static_cast<Index>(g), sigma * 2.0 * c2 * base * base);
  }
  SparseMatrix hess(l.size, l.size);
  hess.setFromTriplets(t.begin(), t.end());
  return hess;
}

void OpfNlp::unpack(const VectorXd& x, OpfSolution& sol) const {
  const Network& net = *prob_.net;
  const VariableLayout& l = prob_.layout;
  const double base = net.base_mva;
  const auto nb = static_cast<Index>(net.buses.size());
  const auto ng = static_cast<Index>(net.generators.size());
  const Index nd = prob_.space.num_loads;
  sol.vm = x.segment(l.vm, nb);
  sol.va = VectorXd::Zero(nb);
  for (Index i = 0; i < nb; ++i) {
    const Index k = l.va_of_bus[static_cast<std::size_t>(i)];
    if (k >= 0) sol.va(i) = x(l.va + k);
  }
  sol.pg = base * x.segment(l.pg, ng);
  sol.qg = base * x.segment(l.qg, ng);
  sol.pd = base * x.segment(l.pd, nd);
  sol.qd = base * x.segment(l.qd, nd);
  sol.slack_p_up = base * x.segment(l.p_up, nd);
  sol.slack_p_dw = base * x.segment(l.p_dw, nd);
  sol.slack_q_up = base * x.segment(l.q_up, nd);
  sol.slack_q_dw = base * x.segment(l.q_dw, nd);
}

double objective_value(const OpfProblem& prob, const OpfSolution& sol) {
  double f = 0.0;
  for (std::size_t g = 0; g < prob.net->generators.size(); ++g) {
    const Generator& gen = prob.net->generators[g];
    const double p = sol.pg(static_cast<Index>(g));
    f += gen.c2 * p * p + gen.c1 * p + gen.c0;
  }
  return f + prob.c_d * (sol.slack_p_up.sum() + sol.slack_p_dw.sum() + sol.slack_q_up.sum() + sol.slack_q_dw.sum());
}

namespace {

constexpr double kSlackSnap = 1e-7;  // MW / MVAr

// Opposite slacks on one load cancel; barrier-level leftovers are rounded to zero.
void tidy(VectorXd& up, VectorXd& dw) {
  for (Index d = 0; d < up.size(); ++d) {
    const double m = std::min(up(d), dw(d));
    up(d) -= m;
    dw(d) -= m;
    if (up(d) < kSlackSnap) up(d) = 0.0;
    if (dw(d) < kSlackSnap) dw(d) = 0.0;
  }
}

}  // namespace

OpfSolution solve(const OpfProblem& prob, const SolverConfig& cfg, const NlpSolver* solver) {
  const OpfNlp nlp(prob, cfg);
  const NlpResult r = (solver ? *solver : *default_solver()).solve(nlp, cfg);
  OpfSolution sol;
  nlp.unpack(r.x, sol);
  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.kkt_residual = r.kkt_residual;
  tidy(sol.slack_p_up, sol.slack_p_dw);
  tidy(sol.slack_q_up, sol.slack_q_dw);
  sol.pd = prob.setpoint.p_hat + sol.slack_p_dw - sol.slack_p_up;
  sol.qd = prob.setpoint.q_hat + sol.slack_q_dw - sol.slack_q_up;
  sol.objective = objective_value(prob, sol);
  return sol;
}

double ValidationReport::max_residual() const {
  double m = 0.0;
  for (const auto& [name, v] : residual) m = std::max(m, std::isnan(v) ? kInf : v);
  return m;
}

std::string ValidationReport::worst_class() const {
  std::string worst;
  double m = -1.0;
  for (const auto& [name, v] : residual)
    if (v > m) {
      m = v;
      worst = name;
    }
  return worst;
}

ValidationReport validate(const OpfSolution& sol, const Network& net, const OpfProblem& prob) {
  ValidationReport rep;
  const double base = net.base_mva;
  const auto nb = static_cast<Index>(net.buses.size());
  const auto nd = static_cast<Index>(net.loads.size());
  auto& res = rep.residual;
  auto over = [](double v, double lo, double hi) { return std::max({0.0, lo - v, v - hi}); };

  if (sol.vm.size() != nb || sol.va.size() != nb || sol.pg.size() != static_cast<Index>(net.generators.size()) ||
      sol.pd.size() != nd) {
    res["shape"] = kInf;
    return rep;
  }

  const Eigen::VectorXcd inj = bus_injections(build_ybus(net), sol.vm, sol.va);
  Eigen::VectorXcd mismatch = inj;
  for (std::size_t g = 0; g < net.generators.size(); ++g)
    mismatch(net.gen_bus[g]) -= std::complex<double>(sol.pg(static_cast<Index>(g)), sol.qg(static_cast<Index>(g))) / base;
  for (Index d = 0; d < nd; ++d)
    mismatch(net.load_bus[static_cast<std::size_t>(d)]) += std::complex<double>(sol.pd(d), sol.qd(d)) / base;
  double bal = 0.0;
  for (Index i = 0; i < nb; ++i) bal = std::max({bal, std::abs(mismatch(i).real()), std::abs(mismatch(i).imag())});
  res["power_balance"] = bal;

  double def = 0.0, sign = 0.0;
  for (Index d = 0; d < nd; ++d) {
    def = std::max(def, std::abs(sol.pd(d) - (prob.setpoint.p_hat(d) + sol.slack_p_dw(d) - sol.slack_p_up(d))));
    def = std::max(def, std::abs(sol.qd(d) - (prob.setpoint.q_hat(d) + sol.slack_q_dw(d) - sol.slack_q_up(d))));
    for (const VectorXd* s : {&sol.slack_p_up, &sol.slack_p_dw, &sol.slack_q_up, &sol.slack_q_dw})
      sign = std::max(sign, -(*s)(d));
  }
  res["load_definition"] = def / base;
  res["slack_sign"] = sign / base;

  double vmv = 0.0;
  for (Index i = 0; i < nb; ++i) vmv = std::max(vmv, over(sol.vm(i), net.buses[static_cast<std::size_t>(i)].v_min, net.buses[static_cast<std::size_t>(i)].v_max));
  res["voltage"] = vmv;
  res["reference_angle"] = std::abs(sol.va(net.reference_index()));

  double pgv = 0.0, qgv = 0.0;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    pgv = std::max(pgv, over(sol.pg(static_cast<Index>(g)), gen.p_min, gen.p_max));
    qgv = std::max(qgv, over(sol.qg(static_cast<Index>(g)), gen.q_min, gen.q_max));
  }
  res["generator_p"] = pgv / base;
  res["generator_q"] = qgv / base;

  double flow = 0.0, ang = 0.0;
  for (const BranchEnd& e : branch_admittances(net)) {
    const Branch& br = net.branches[static_cast<std::size_t>(e.branch)];
    if (br.has_flow_limit()) flow = std::max(flow, std::abs(end_flow(e, sol.vm, sol.va)) - br.s_max / base);
    if (e.is_from) ang = std::max(ang, over(sol.va(e.bus) - sol.va(e.other), br.theta_min, br.theta_max));
  }
  res["branch_flow"] = std::max(0.0, flow);
  res["angle_difference"] = ang;

  // Realized loads against the load-space rows, per block.
  VectorXd xl(2 * nd);
  xl << sol.pd, sol.qd;
  const VectorXd r = prob.space.space.residual(xl);
  const Index first = prob.space.first_coupling_row();
  double box = 0.0, ratio = 0.0, slice = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    const double v = std::max(0.0, -r(i)) / base;
    if (i < first)
      box = std::max(box, v);
    else if (prob.space.sliced && i >= r.size() - 2)
      slice = std::max(slice, v);
    else
      ratio = std::max(ratio, v);
  }
  res["load_box"] = box;
  res["load_ratio"] = ratio;
  res["load_slice"] = slice;
  return rep;
}

bool is_feasible(const OpfSolution& sol, const OpfProblem& prob) {
  return sol.status == SolveStatus::converged && validate(sol, *prob.net, prob).passed();
}

}  // namespace opfgen
