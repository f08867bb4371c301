#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "opfgen/acopf.hpp"
#include "opfgen/errors.hpp"
#include "support.hpp"

using namespace opfgen;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct FixedLoadCase {
  Network net;
  OpfProblem prob;
};

FixedLoadCase fixed_load(const std::string& file) {
  FixedLoadCase c{parse_case(testing::data_dir() / file), {}};
  c.prob = build_problem(c.net, testing::nominal_setpoint(c.net), build_box_space(c.net, 0.0, 0.0));
  return c;
}

// Random point strictly inside the variable bounds, voltages near flat start.
Eigen::VectorXd random_point(const OpfNlp& nlp, std::mt19937_64& rng) {
  Eigen::VectorXd lo, hi;
  nlp.bounds(lo, hi);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::VectorXd x = nlp.initial_point();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double a = std::isfinite(lo(i)) ? lo(i) : x(i) - 0.3;
    const double b = std::isfinite(hi(i)) ? hi(i) : x(i) + 0.3;
    x(i) = a + u(rng) * (b - a);
  }
  return x;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void check_derivatives(const OpfProblem& prob, int points) {
  const OpfNlp nlp(prob, SolverConfig{});
  std::mt19937_64 rng(1234);
  const double h = 1e-6;
  double worst_jac = 0.0, worst_hess = 0.0, worst_grad = 0.0;
  for (int k = 0; k < points; ++k) {
    const Eigen::VectorXd x = random_point(nlp, rng);
    Eigen::VectorXd g, hv, grad;
    SparseMatrix jg, jh;
    nlp.objective(x, grad);
    nlp.constraints(x, g, hv, jg, jh);
    const Eigen::MatrixXd jgd(jg), jhd(jh);
    std::normal_distribution<double> n01;
    Eigen::VectorXd lam(g.size()), mu(hv.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = n01(rng);
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = std::abs(n01(rng));
    const double sigma = 0.7;
    const Eigen::MatrixXd hess(nlp.hessian(x, sigma, lam, mu));

    for (Eigen::Index j = 0; j < x.size(); ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      Eigen::VectorXd gp, gm, hp, hm, grp, grm;
      SparseMatrix jgp, jgm, jhp, jhm;
      const double fp = nlp.objective(xp, grp), fm = nlp.objective(xm, grm);
      nlp.constraints(xp, gp, hp, jgp, jhp);
      nlp.constraints(xm, gm, hm, jgm, jhm);
      worst_grad = std::max(worst_grad, rel_err(grad(j), (fp - fm) / (2 * h)));
      const Eigen::VectorXd dg = (gp - gm) / (2 * h), dh = (hp - hm) / (2 * h);
      for (Eigen::Index i = 0; i < dg.size(); ++i) worst_jac = std::max(worst_jac, rel_err(jgd(i, j), dg(i)));
      for (Eigen::Index i = 0; i < dh.size(); ++i) worst_jac = std::max(worst_jac, rel_err(jhd(i, j), dh(i)));
      // column j of the Lagrangian Hessian from the analytic first derivatives
      const Eigen::VectorXd lp = sigma * grp + Eigen::MatrixXd(jgp).transpose() * lam + Eigen::MatrixXd(jhp).transpose() * mu;
      const Eigen::VectorXd lm = sigma * grm + Eigen::MatrixXd(jgm).transpose() * lam + Eigen::MatrixXd(jhm).transpose() * mu;
      const Eigen::VectorXd col = (lp - lm) / (2 * h);
      for (Eigen::Index i = 0; i < col.size(); ++i) worst_hess = std::max(worst_hess, rel_err(hess(i, j), col(i)));
    }
  }
  CHECK(worst_grad < 1e-6);
  CHECK(worst_jac < 1e-6);
  CHECK(worst_hess < 1e-6);
}

}  // namespace

TEST_CASE("variable count of the two-bus case") {
  const Network net = testing::two_bus();
  const OpfProblem p = build_problem(net, testing::nominal_setpoint(net), build_box_space(net, 100, 100));
  CHECK(p.num_variables() == 12);
  CHECK(p.layout.size == 11);  // the reference angle is fixed, not a solver variable
}

TEST_CASE("slack penalty guard") {
  const Network net = testing::two_bus();
  const LoadPolytope box = build_box_space(net, 100, 100);
  CHECK_THROWS_AS(build_problem(net, testing::nominal_setpoint(net), box, 0.0), ConfigError);
  CHECK_THROWS_AS(build_problem(net, testing::nominal_setpoint(net), box, slack_penalty_floor(net)), ConfigError);
  CHECK(slack_penalty_floor(net) == doctest::Approx(1000.0));
  CHECK(resolve_slack_penalty(net, std::nullopt) == kDefaultSlackPenalty);
}

TEST_CASE("setpoint outside its space is rejected") {
  const Network net = testing::two_bus();
  LoadSetpoint sp = testing::nominal_setpoint(net);
  sp.p_hat(0) = 250.0;
  CHECK_THROWS_AS(build_problem(net, sp, build_box_space(net, 20, 20)), PreconditionError);
}

TEST_CASE("setpoint on the slice boundary is admissible") {
  const Network net = testing::two_bus();
  const LoadPolytope lp = slice(build_load_polytope(net, 100, 100, 0.05, 0.01, 0.99), 99.0, 1.0);
  LoadSetpoint sp = testing::nominal_setpoint(net);
  sp.p_tot_target = 99.0;
  sp.epsilon = 1.0;
  const OpfProblem p = build_problem(net, sp, lp);
  const OpfSolution s = solve(p);
  CHECK(s.status == SolveStatus::converged);
  CHECK(is_feasible(s, p));
}

TEST_CASE("analytic derivatives match central differences") {
  SUBCASE("case9 with flow limits") {
    const FixedLoadCase c = fixed_load("case9.m");
    check_derivatives(c.prob, 40);
  }
  SUBCASE("tap and phase shift") {
    const FixedLoadCase c = fixed_load("case3_tap.m");
    check_derivatives(c.prob, 40);
  }
  SUBCASE("sliced polytope rows") {
    const Network net = parse_case(testing::data_dir() / "case14.m");
    const LoadPolytope lp = build_load_polytope(net, 100, 100, 0.05, 0.01, 0.99);
    const LoadPolytope s = slice(lp, 250.0, 0.3);
    const Eigen::VectorXd x = sample_load_space(s, 5, 1).front();
    const Eigen::Index nd = s.num_loads;
    const OpfProblem p = build_problem(net, {x.head(nd), x.tail(nd), 250.0, 0.3}, s);
    check_derivatives(p, 20);
  }
}

TEST_CASE("two-bus lossless dispatch") {
  const Network net = testing::two_bus();
  const OpfProblem p = build_problem(net, testing::nominal_setpoint(net), build_box_space(net, 0, 0));
  const OpfSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::converged);
  CHECK(std::abs(s.pg(0) - 100.0) <= 1e-6);
  CHECK(std::abs(s.objective - 1000.0) <= 1e-6);
  CHECK(s.max_slack() == 0.0);
  CHECK(objective_value(p, s) == doctest::Approx(s.objective));
  CHECK(is_feasible(s, p));
}

TEST_CASE("constructed overload sheds the excess through the up slack") {
  const Network net = testing::two_bus(250.0);
  const OpfProblem p = build_problem(net, testing::nominal_setpoint(net), build_box_space(net, 100, 100));
  const OpfSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::converged);
  CHECK(std::abs(s.slack_p_up(0) - 50.0) <= 0.1);
  CHECK(s.slack_p_dw(0) == 0.0);
  CHECK(s.pd(0) == doctest::Approx(200.0).epsilon(1e-6));
  CHECK(s.pg(0) == doctest::Approx(200.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(2000.0 + p.c_d * 50.0).epsilon(1e-6));
  CHECK(is_feasible(s, p));
}

TEST_CASE("fixed-load optimum matches the reference solver") {
  std::ifstream in(std::string(OPFGEN_FIXTURE_DIR) + "/reference_opf.json");
  REQUIRE(in);
  const nlohmann::json ref = nlohmann::json::parse(in);
  for (const auto& [name, r] : ref.at("cases").items()) {
    CAPTURE(name);
    const FixedLoadCase c = fixed_load(name + ".m");
    // case30 is flat in vm around its optimum; the default tolerance leaves ~1.5e-4 pu of drift
    SolverConfig cfg;
    cfg.tolerance = 1e-8;
    const OpfSolution s = solve(c.prob, cfg);
    REQUIRE(s.status == SolveStatus::converged);
    const double obj = r.at("objective");
    CHECK(std::abs(s.objective - obj) / obj < 1e-4);
    const auto vm = r.at("vm").get<std::vector<double>>();
    const auto va = r.at("va_deg").get<std::vector<double>>();
    REQUIRE(vm.size() == static_cast<std::size_t>(s.vm.size()));
    for (std::size_t i = 0; i < vm.size(); ++i) {
      CHECK(std::abs(s.vm(static_cast<Eigen::Index>(i)) - vm[i]) < 1e-4);
      CHECK(std::abs(s.va(static_cast<Eigen::Index>(i)) * 180.0 / kPi - va[i]) < 1e-2);
    }
    CHECK(s.max_slack() <= 1e-6);
  }
}

TEST_CASE("validation") {
  const FixedLoadCase c = fixed_load("case9.m");
  OpfSolution s = solve(c.prob);
  REQUIRE(s.status == SolveStatus::converged);
  const ValidationReport good = validate(s, c.net, c.prob);
  CHECK(good.max_residual() < 1e-6);
  CHECK(good.passed());

  SUBCASE("corrupted voltage") {
    s.vm(4) += 0.1;
    const ValidationReport bad = validate(s, c.net, c.prob);
    CHECK_FALSE(bad.passed());
    CHECK(bad.residual.at("power_balance") > 1e-3);
    CHECK_FALSE(is_feasible(s, c.prob));
  }
  SUBCASE("bus held at its voltage cap") {
    // case9 optimum sits on vm = 1.1 at several buses; snap one exactly onto the cap
    Eigen::Index at_cap = -1;
    CHECK(s.vm.maxCoeff(&at_cap) > 1.1 - 1e-6);
    s.vm(at_cap) = c.net.buses[static_cast<std::size_t>(at_cap)].v_max;
    const ValidationReport snapped = validate(s, c.net, c.prob);
    CHECK(snapped.residual.at("voltage") == 0.0);
  }
}

TEST_CASE("iteration limit is not feasible") {
  const FixedLoadCase c = fixed_load("case9.m");
  SolverConfig cfg;
  cfg.max_iterations = 2;
  const OpfSolution s = solve(c.prob, cfg);
  CHECK(s.status == SolveStatus::iteration_limit);
  CHECK_FALSE(is_feasible(s, c.prob));
}

TEST_CASE("slacks stay off when the sample is servable") {
  const Network net = parse_case(testing::data_dir() / "case_ieee30.m");
  const LoadPolytope lp = build_load_polytope(net, 100, 100, 0.05, 0.01, 0.99);
  for (double target : {150.0, 283.4}) {
    const LoadPolytope s = slice(lp, target, 0.5);
    const Eigen::VectorXd x = sample_load_space(s, 99, 1).front();
    const Eigen::Index nd = s.num_loads;
    const OpfProblem p = build_problem(net, {x.head(nd), x.tail(nd), target, 0.5}, s);
    const OpfSolution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::converged);
    CHECK(sol.max_slack() <= 1e-6);
    Eigen::VectorXd realized(2 * nd);
    realized << sol.pd, sol.qd;
    CHECK(s.space.contains(realized, 1e-6));
    double c0 = 0.0;
    for (const Generator& g : net.generators) c0 += g.c0;
    CHECK(sol.objective >= c0);
  }
}

TEST_CASE("solver seam accepts another backend") {
  struct Counting : NlpSolver {
    mutable int calls = 0;
    NlpResult solve(const NlpProblem& p, const SolverConfig& cfg) const override {
      ++calls;
      return InteriorPointSolver{}.solve(p, cfg);
    }
  } backend;
  const FixedLoadCase c = fixed_load("case3_tap.m");
  const OpfSolution a = solve(c.prob, {}, &backend);
  const OpfSolution b = solve(c.prob);
  CHECK(backend.calls == 1);
  CHECK(a.objective == b.objective);
}

TEST_CASE("solve status names") {
  for (SolveStatus s : {SolveStatus::converged, SolveStatus::infeasible, SolveStatus::iteration_limit,
                        SolveStatus::numerical_failure})
    CHECK(solve_status_from_string(to_string(s)) == s);
  CHECK(to_string(SolveStatus::iteration_limit) == "iteration-limit");
}
