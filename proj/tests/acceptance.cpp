// Acceptance run: one PASS/FAIL line per criterion. Exits non-zero only when a criterion
// could not be evaluated; a FAIL line is a measured result, not a crash.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "opfgen/acopf.hpp"
#include "opfgen/dataset.hpp"
#include "opfgen/metrics.hpp"
#include "opfgen/pipeline.hpp"
#include "opfgen/polytope.hpp"
#include "opfgen/schedule.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace opfgen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::ostringstream g_report;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- criterion 1 ----------------------------------------------------------------------

Verdict metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dk(2, 50), dt(1, 20), state(-1, 1), bins(2, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const int fixtures = 250;
  for (int f = 0; f < fixtures; ++f) {
    const int k = dk(rng), t = dt(rng), b = bins(rng);
    TernaryMatrix a(k, t);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < t; ++j) a(i, j) = static_cast<signed char>(state(rng));
    const BinaryMatrix act = a.cwiseAbs().cast<unsigned char>();
    const Eigen::Index own = q3(act).l_nr;
    worst = std::max(worst, std::abs(q2(a) - oracle::q2(a)));
    worst = std::max(worst, std::abs(q3(act).value - oracle::q3(act, 0)));
    worst = std::max(worst, std::abs(q3(act, own + 2).value - oracle::q3(act, own + 2)));

    VariableMatrix m{"x", Eigen::MatrixXd(k, t), Eigen::VectorXd(t), Eigen::VectorXd(t)};
    double mean = 0.0;
    for (int j = 0; j < t; ++j) {
      m.lower(j) = -1.0 - u(rng);
      m.upper(j) = 1.0 + u(rng);
      std::vector<double> col;
      for (int i = 0; i < k; ++i) {
        m.values(i, j) = m.lower(j) + u(rng) * (m.upper(j) - m.lower(j));
        col.push_back(m.values(i, j));
      }
      mean += oracle::entropy(col, m.lower(j), m.upper(j), b) / t;
    }
    worst = std::max(worst, std::abs(q1(m, b) - mean));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0,
          fmt("%d fixtures, max |library - oracle| = %.2e, %.2f s", fixtures, worst, secs)};
}

// ---- criterion 2 ----------------------------------------------------------------------

Verdict hand_fixtures() {
  Eigen::VectorXd col(100);
  col << Eigen::VectorXd::Constant(50, 0.5), Eigen::VectorXd::Constant(25, 1.5), Eigen::VectorXd::Constant(25, 2.5);
  const double h = column_entropy(col, 0.0, 4.0, 4);
  TernaryMatrix a(2, 3);
  a << 0, 1, -1, 0, -1, -1;
  const double d = q2(a);
  BinaryMatrix b = BinaryMatrix::Zero(10, 2);
  b.col(0).head(7).setOnes();
  const double r = q3(b, 2).value;
  return {h == 0.75 && d == 1.0 / 3.0 && r == 0.25, fmt("entropy %.17g, Q2 %.17g, Q3 %.17g", h, d, r)};
}

// ---- criterion 3 ----------------------------------------------------------------------

Verdict cdhr_uniformity() {
  const auto t0 = Clock::now();
  Polytope sq;
  sq.a.resize(4, 2);
  sq.a << 1, 0, 0, 1, -1, 0, 0, -1;
  sq.b = Eigen::Vector4d(1, 1, 0, 0);
  const auto pts = cdhr_sample(sq, Eigen::Vector2d(0.5, 0.5), WalkConfig::for_dimension(2, 2024), 10000);
  double ks = 0.0, dev = 0.0;
  for (int k = 0; k < 2; ++k) {
    std::vector<double> c;
    for (const auto& p : pts) c.push_back(p(k));
    ks = std::max(ks, testing::ks_uniform(c, 0.0, 1.0));
    dev = std::max(dev, std::abs(std::accumulate(c.begin(), c.end(), 0.0) / double(c.size()) - 0.5));
  }
  const double secs = seconds_since(t0);
  return {ks < 0.03 && dev <= 0.02 && secs < 5.0,
          fmt("10000 samples, max KS %.4f, max |mean - 0.5| %.4f, %.2f s", ks, dev, secs)};
}

// ---- criterion 5 ----------------------------------------------------------------------

std::string synthetic_case(int loads, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> p(5.0, 50.0);
  std::ostringstream s;
  s << "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n";
  for (int d = 0; d < loads; ++d) s << " " << d + 2 << " 1 " << p(rng) << " 5 0 0 1 1 0 230 1 1.1 0.9;\n";
  s << "];\nmpc.gen = [\n 1 0 0 1000 -1000 1 100 1 10000 0;\n];\nmpc.branch = [\n";
  for (int d = 0; d < loads; ++d) s << " 1 " << d + 2 << " 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n";
  s << "];\nmpc.gencost = [\n 2 0 0 3 0 10 0;\n];\n";
  return s.str();
}

double m0_total_cv(int loads, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Network net = parse_case_text(synthetic_case(loads, rng));
  const LoadPolytope box = build_box_space(net, 100, 100);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> tot(20000);
  for (double& t : tot) {
    t = 0.0;
    for (Eigen::Index d = 0; d < box.num_loads; ++d) t += box.p_min(d) + u(rng) * (box.p_max(d) - box.p_min(d));
  }
  const double mean = std::accumulate(tot.begin(), tot.end(), 0.0) / double(tot.size());
  double var = 0.0;
  for (double t : tot) var += (t - mean) * (t - mean);
  return std::sqrt(var / double(tot.size() - 1)) / mean;
}

Verdict clt_scaling() {
  const auto t0 = Clock::now();
  const double cv10 = m0_total_cv(10, 10), cv100 = m0_total_cv(100, 100);
  const double ratio = cv10 / cv100, lo = std::sqrt(10.0) / 1.3, hi = std::sqrt(10.0) * 1.3;
  const double secs = seconds_since(t0);
  return {ratio >= lo && ratio <= hi && secs < 5.0,
          fmt("CV(|D|=10) %.4f, CV(|D|=100) %.4f, ratio %.3f in [%.3f, %.3f], %.2f s", cv10, cv100, ratio, lo, hi, secs)};
}

// ---- paired 30-bus run (criteria 4, 6, 8, 9, 10, 11) ----------------------------------

struct PairedRun {
  Network net;
  fs::path mx_dir, m0_dir;
  GenerationResult mx, m0;
  double seconds = 0.0;
};

PairedRun paired_run() {
  PairedRun r;
  r.net = parse_case(testing::data_dir() / "case_ieee30.m");
  const fs::path root = fs::temp_directory_path() / "opfgen_acceptance";
  fs::remove_all(root);
  r.mx_dir = root / "mx";
  r.m0_dir = root / "m0";
  const auto t0 = Clock::now();
  for (Method m : {Method::mx, Method::m0}) {
    GenerationConfig cfg = GenerationConfig::for_method(m);
    cfg.samples = 500;
    cfg.batches = 4;
    cfg.target_k = 2000;
    cfg.seed = 7;
    (m == Method::mx ? r.mx : r.m0) = generate(r.net, cfg, m == Method::mx ? r.mx_dir : r.m0_dir);
  }
  r.seconds = seconds_since(t0);
  return r;
}

Verdict slice_adherence(const LoadedDataset& mx) {
  const DatasetMeta& m = mx.handle.meta;
  const double eps = 0.001 * m.support->width();
  long bad = 0;
  double worst = 0.0;
  for (const InstanceRecord& r : mx.records) {
    const double gap = std::abs(r.p_hat.sum() - r.p_tot_target);
    worst = std::max(worst, gap);
    bad += gap > eps;
  }
  return {bad == 0 && std::abs(m.epsilon - eps) < 1e-12,
          fmt("%zu setpoints, %ld outside, max |sum p - p_tot| %.4f MW <= eps %.4f MW", mx.records.size(), bad, worst, eps)};
}

Verdict total_load_uniformity(const LoadedDataset& mx) {
  const TotalLoadSupport sup = *mx.handle.meta.truncated_support;
  std::vector<double> tot;
  for (const InstanceRecord& r : mx.records) tot.push_back(r.pd.sum());
  const double ks = testing::ks_uniform(tot, sup.lo, sup.hi);
  return {tot.size() >= 2000 && ks < 0.05,
          fmt("K = %zu on [%.1f, %.1f] MW, KS %.4f", tot.size(), sup.lo, sup.hi, ks)};
}

Verdict feasibility_audit(const std::vector<const LoadedDataset*>& sets) {
  long n = 0, bad = 0;
  double worst = 0.0;
  for (const LoadedDataset* ds : sets)
    for (const InstanceRecord& r : ds->records) {
      const ValidationReport rep = audit_record(*ds, r);
      worst = std::max(worst, rep.max_residual());
      bad += rep.max_residual() >= 1e-5;
      ++n;
    }
  return {bad == 0, fmt("%ld persisted instances, %ld violations, max residual %.2e pu", n, bad, worst)};
}

struct PairedMetrics {
  Comparison cmp;
  Eigen::VectorXd h_mx, h_m0;
};

PairedMetrics paired_metrics(const LoadedDataset& mx, const LoadedDataset& m0) {
  const DatasetMatrices a = dataset_matrices(mx, mx.net), b = dataset_matrices(m0, mx.net);
  PairedMetrics pm{compare({&a, &b}, {"MX", "M0"}, mx.net), {}, {}};
  pm.h_mx = pm.cmp.reports[0].at("pg").entropies;
  pm.h_m0 = pm.cmp.reports[1].at("pg").entropies;
  return pm;
}

Verdict table_trend(const PairedMetrics& pm, double seconds) {
  const double q1_mx = *pm.cmp.reports[0].at("pg").q1, q1_m0 = *pm.cmp.reports[1].at("pg").q1;
  const double q2_mx = *pm.cmp.reports[0].at("pg").q2, q2_m0 = *pm.cmp.reports[1].at("pg").q2;
  const double rel = q1_mx / q1_m0 - 1.0;
  return {rel >= 0.10 && q2_mx > q2_m0 && seconds <= 3600.0,
          fmt("Q1(pg) MX %.1f%% vs M0 %.1f%% (+%.1f%% relative), Q2(pg) MX %.1f%% vs M0 %.1f%%, run %.0f s",
              100 * q1_mx, 100 * q1_m0, 100 * rel, 100 * q2_mx, 100 * q2_m0, seconds)};
}

Verdict degeneracy_share(const PairedMetrics& pm) {
  auto share = [](const Eigen::VectorXd& h) { return double((h.array() < 0.05).count()) / double(h.size()); };
  std::string mx, m0;
  for (Eigen::Index g = 0; g < pm.h_mx.size(); ++g) mx += fmt("%s%.3f", g ? " " : "", pm.h_mx(g));
  for (Eigen::Index g = 0; g < pm.h_m0.size(); ++g) m0 += fmt("%s%.3f", g ? " " : "", pm.h_m0(g));
  const double smx = share(pm.h_mx), sm0 = share(pm.h_m0);
  return {smx < sm0, fmt("share below 5%%: MX %.2f, M0 %.2f; entropies MX [%s], M0 [%s]", smx, sm0, mx.c_str(),
                         m0.c_str())};
}

Verdict solve_time(const PairedRun& r) {
  std::vector<double> t = r.mx.solve_seconds;
  t.insert(t.end(), r.m0.solve_seconds.begin(), r.m0.solve_seconds.end());
  std::nth_element(t.begin(), t.begin() + long(t.size() / 2), t.end());
  const double median = t[t.size() / 2];
  return {median < 2.0, fmt("median %.4f s over %zu solves on a 30-bus case", median, t.size())};
}

// ---- criterion 7 ----------------------------------------------------------------------

double derivative_error(const OpfProblem& prob, int points) {
  const OpfNlp nlp(prob, SolverConfig{});
  Eigen::VectorXd lo, hi;
  nlp.bounds(lo, hi);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::normal_distribution<double> n01;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  auto lagr_grad = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& lam, const Eigen::VectorXd& mu) {
    Eigen::VectorXd g, h, grad;
    SparseMatrix jg, jh;
    nlp.objective(x, grad);
    nlp.constraints(x, g, h, jg, jh);
    return Eigen::VectorXd(grad + jg.transpose() * lam + jh.transpose() * mu);
  };
  const double step = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    Eigen::VectorXd x = nlp.initial_point();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double a = std::isfinite(lo(i)) ? lo(i) : x(i) - 0.3, b = std::isfinite(hi(i)) ? hi(i) : x(i) + 0.3;
      x(i) = a + u(rng) * (b - a);
    }
    Eigen::VectorXd g, h, grad;
    SparseMatrix jg, jh;
    nlp.objective(x, grad);
    nlp.constraints(x, g, h, jg, jh);
    Eigen::VectorXd lam(g.size()), mu(h.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = n01(rng);
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = std::abs(n01(rng));
    const Eigen::MatrixXd hess(nlp.hessian(x, 1.0, lam, mu));
    const Eigen::MatrixXd jgd(jg), jhd(jh);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += step;
      xm(j) -= step;
      Eigen::VectorXd gp, gm, hp, hm, d1, d2;
      SparseMatrix a1, a2, b1, b2;
      nlp.constraints(xp, gp, hp, a1, b1);
      nlp.constraints(xm, gm, hm, a2, b2);
      const Eigen::VectorXd dg = (gp - gm) / (2 * step), dh = (hp - hm) / (2 * step);
      for (Eigen::Index i = 0; i < dg.size(); ++i) worst = std::max(worst, rel(jgd(i, j), dg(i)));
      for (Eigen::Index i = 0; i < dh.size(); ++i) worst = std::max(worst, rel(jhd(i, j), dh(i)));
      worst = std::max(worst, rel(grad(j), (nlp.objective(xp, d1) - nlp.objective(xm, d2)) / (2 * step)));
      const Eigen::VectorXd col = (lagr_grad(xp, lam, mu) - lagr_grad(xm, lam, mu)) / (2 * step);
      for (Eigen::Index i = 0; i < col.size(); ++i) worst = std::max(worst, rel(hess(i, j), col(i)));
    }
  }
  return worst;
}

Verdict solver_correctness() {
  const Network c9 = parse_case(testing::data_dir() / "case9.m");
  const OpfProblem p9 = build_problem(c9, testing::nominal_setpoint(c9), build_box_space(c9, 0, 0));
  const double deriv = derivative_error(p9, 100);

  const Network two = testing::two_bus();
  const OpfProblem pt = build_problem(two, testing::nominal_setpoint(two), build_box_space(two, 0, 0));
  const OpfSolution st = solve(pt);

  const Network over = testing::two_bus(250.0);
  const OpfProblem po = build_problem(over, testing::nominal_setpoint(over), build_box_space(over, 100, 100));
  const OpfSolution so = solve(po);

  const bool ok = deriv < 1e-6 && st.status == SolveStatus::converged && std::abs(st.pg(0) - 100.0) <= 1e-6 &&
                  std::abs(st.objective - 1000.0) <= 1e-6 && so.status == SolveStatus::converged &&
                  std::abs(so.slack_p_up(0) - 50.0) <= 0.1;
  return {ok, fmt("max derivative rel. error %.2e (100 points); two-bus pg %.9f MW, objective %.9f $/h; "
                  "overload slack_p_up %.6f MW",
                  deriv, st.pg(0), st.objective, so.slack_p_up(0))};
}

// ---- criterion 12 ---------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPFGEN_CLI) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "opfgen_acceptance_det";
  fs::remove_all(root);
  const std::string common =
      "generate --case " + (testing::data_dir() / "case_ieee30.m").string() + " --samples 60 --batches 2 --seed 31";
  const int a = run_cli(common + " --workers 1 --out " + (root / "w1").string());
  const int b = run_cli(common + " --workers 4 --out " + (root / "w4").string());
  const std::string x = slurp(root / "w1" / "instances.jsonl"), y = slurp(root / "w4" / "instances.jsonl");
  return {a == 0 && b == 0 && !x.empty() && x == y,
          fmt("exit codes %d/%d, %zu vs %zu bytes, %s", a, b, x.size(), y.size(), x == y ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string report_path = argc > 1 ? argv[1] : "";
  int passed = 0, errors = 0;
  auto emit = [&](int id, const std::function<Verdict()>& f) {
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    passed += v.pass;
    const std::string line = fmt("%s criterion %2d: ", v.pass ? "PASS" : "FAIL", id) + v.detail;
    std::cout << line << std::endl;
    g_report << line << "\n";
  };

  emit(1, metric_oracles);
  emit(2, hand_fixtures);
  emit(3, cdhr_uniformity);

  std::optional<PairedRun> run;
  std::optional<LoadedDataset> mx, m0;
  std::optional<PairedMetrics> pm;
  try {
    run = paired_run();
    mx = load_dataset(run->mx_dir);
    m0 = load_dataset(run->m0_dir);
    pm = paired_metrics(*mx, *m0);
  } catch (const std::exception& e) {
    std::cout << "paired 30-bus run failed: " << e.what() << std::endl;
  }
  auto need = [&](auto f) {
    return [&, f]() -> Verdict {
      if (!pm) throw std::runtime_error("paired run unavailable");
      return f();
    };
  };

  emit(4, need([&] { return slice_adherence(*mx); }));
  emit(5, clt_scaling);
  emit(6, need([&] { return total_load_uniformity(*mx); }));
  emit(7, solver_correctness);
  emit(8, need([&] { return feasibility_audit({&*mx, &*m0}); }));
  emit(9, need([&] { return table_trend(*pm, run->seconds); }));
  emit(10, need([&] { return degeneracy_share(*pm); }));
  emit(11, need([&] { return solve_time(*run); }));
  emit(12, determinism);

  const std::string summary = fmt("%d of 12 criteria pass", passed);
  std::cout << summary << std::endl;
  g_report << summary << "\n";
  if (!report_path.empty()) std::ofstream(report_path) << g_report.str();
  return errors == 0 ? 0 : 1;
}
