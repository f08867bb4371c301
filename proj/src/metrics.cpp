#include "opfgen/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace opfgen {

using Eigen::Index;
using Eigen::VectorXd;

std::vector<Index> degenerate_columns(const VariableMatrix& m) {
  std::vector<Index> out;
  for (Index j = 0; j < m.values.cols(); ++j)
    if (m.lower(j) == m.upper(j)) out.push_back(j);
  return out;
}

VectorXd column_entropies(const VariableMatrix& m, int bins) {
  if (m.values.rows() == 0) throw PreconditionError("Q1 of an empty matrix");
  std::vector<double> h;
  for (Index j = 0; j < m.values.cols(); ++j) {
    if (m.lower(j) == m.upper(j)) continue;
    double lo = m.lower(j), hi = m.upper(j);
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      lo = m.values.col(j).minCoeff();
      hi = m.values.col(j).maxCoeff();
    }
    h.push_back(column_entropy(m.values.col(j), lo, hi, bins));
  }
  return Eigen::Map<VectorXd>(h.data(), static_cast<Index>(h.size()));
}

double q1(const VariableMatrix& m, int bins) {
  const VectorXd h = column_entropies(m, bins);
  return h.size() ? h.mean() : 0.0;
}

Activation activation_matrices(const VariableMatrix& m, double tol) {
  if (!(tol > 0.0 && tol < 0.5)) throw PreconditionError("activation tolerance must lie in (0, 0.5)");
  Activation a;
  for (Index j = 0; j < m.values.cols(); ++j) {
    if (m.lower(j) == m.upper(j))
      a.degenerate.push_back(j);
    else
      a.kept.push_back(j);
  }
  const Index k = m.values.rows(), t = static_cast<Index>(a.kept.size());
  a.binary = BinaryMatrix::Zero(k, 2 * t);
  a.ternary = TernaryMatrix::Zero(k, t);
  for (Index c = 0; c < t; ++c) {
    const Index j = a.kept[static_cast<std::size_t>(c)];
    const double lb = m.lower(j), ub = m.upper(j);
    if (!std::isfinite(lb) || !std::isfinite(ub)) throw PreconditionError("activation needs finite bounds");
    const double r = ub - lb;
    for (Index i = 0; i < k; ++i) {
      const double v = m.values(i, j);
      const bool lower = v <= lb + tol * r;
      const bool upper = v >= ub - tol * r;
      a.binary(i, c) = lower;
      a.binary(i, t + c) = upper;
      a.ternary(i, c) = lower ? -1 : (upper ? 1 : 0);
    }
  }
  return a;
}

Activation branch_activation(const Eigen::MatrixXd& s_from, const Eigen::MatrixXd& s_to, const VectorXd& s_max,
                             double tol) {
  if (!(tol > 0.0 && tol < 0.5)) throw PreconditionError("activation tolerance must lie in (0, 0.5)");
  if (s_from.cols() != s_max.size() || s_to.cols() != s_max.size() || s_from.rows() != s_to.rows())
    throw SchemaError("branch flow matrices do not match the limit vector");
  Activation a;
  const Index k = s_from.rows(), t = s_max.size();
  for (Index j = 0; j < t; ++j) a.kept.push_back(j);
  a.binary = BinaryMatrix::Zero(k, 2 * t);
  a.ternary = TernaryMatrix::Zero(k, t);
  for (Index j = 0; j < t; ++j) {
    const double limit = (1.0 - tol) * s_max(j);
    for (Index i = 0; i < k; ++i) {
      const bool from = s_from(i, j) >= limit;
      const bool to = s_to(i, j) >= limit;
      a.binary(i, j) = from;
      a.binary(i, t + j) = to;
      if (from && to)
        a.ternary(i, j) = s_to(i, j) > s_from(i, j) ? 1 : -1;
      else
        a.ternary(i, j) = from ? -1 : (to ? 1 : 0);
    }
  }
  return a;
}

DatasetMatrices empty_matrices(const Network& net) {
  DatasetMatrices ds;
  const auto nb = static_cast<Index>(net.buses.size());
  const auto ng = static_cast<Index>(net.generators.size());
  ds.pg = {"pg", Eigen::MatrixXd(0, ng), VectorXd(ng), VectorXd(ng)};
  ds.qg = {"qg", Eigen::MatrixXd(0, ng), VectorXd(ng), VectorXd(ng)};
  for (Index g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[static_cast<std::size_t>(g)];
    ds.pg.lower(g) = gen.p_min;
    ds.pg.upper(g) = gen.p_max;
    ds.qg.lower(g) = gen.q_min;
    ds.qg.upper(g) = gen.q_max;
  }
  ds.vm = {"vm", Eigen::MatrixXd(0, nb), VectorXd(nb), VectorXd(nb)};
  ds.va = {"va", Eigen::MatrixXd(0, nb), VectorXd::Constant(nb, -kInf), VectorXd::Constant(nb, kInf)};
  for (Index i = 0; i < nb; ++i) {
    ds.vm.lower(i) = net.buses[static_cast<std::size_t>(i)].v_min;
    ds.vm.upper(i) = net.buses[static_cast<std::size_t>(i)].v_max;
  }
  // The reference angle is fixed at zero.
  ds.va.lower(net.reference_index()) = 0.0;
  ds.va.upper(net.reference_index()) = 0.0;
  std::vector<double> smax;
  for (std::size_t b = 0; b < net.branches.size(); ++b)
    if (net.branches[b].has_flow_limit()) {
      ds.limited_branches.push_back(static_cast<Index>(b));
      smax.push_back(net.branches[b].s_max);
    }
  ds.s_max = Eigen::Map<VectorXd>(smax.data(), static_cast<Index>(smax.size()));
  ds.s_from.resize(0, ds.s_max.size());
  ds.s_to.resize(0, ds.s_max.size());
  const auto nd = static_cast<Index>(net.loads.size());
  ds.pd.resize(0, nd);
  ds.qd.resize(0, nd);
  return ds;
}

const ClassMetrics& MetricReport::at(const std::string& name) const {
  for (const ClassMetrics& c : classes)
    if (c.name == name) return c;
  throw PreconditionError("no metric class '" + name + "'");
}

namespace {

void check_schema(const DatasetMatrices& ds, const Network& net) {
  const auto nb = static_cast<Index>(net.buses.size());
  const auto ng = static_cast<Index>(net.generators.size());
  Index nl = 0;
  for (const Branch& b : net.branches) nl += b.has_flow_limit();
  const Index k = ds.instances();
  auto fits = [&](const Eigen::MatrixXd& m, Index cols) { return m.rows() == k && m.cols() == cols; };
  if (!fits(ds.pg.values, ng) || !fits(ds.qg.values, ng) || !fits(ds.vm.values, nb) || !fits(ds.va.values, nb) ||
      !fits(ds.s_from, nl) || !fits(ds.s_to, nl))
    throw SchemaError("dataset columns do not match the network");
  if (k == 0) throw PreconditionError("dataset has no instances");
}

void bounded_class(ClassMetrics& c, const VariableMatrix& m, int bins, double tol) {
  c.entropies = column_entropies(m, bins);
  c.q1 = c.entropies.size() ? c.entropies.mean() : 0.0;
  const Activation a = activation_matrices(m, tol);
  c.columns = static_cast<Index>(a.kept.size());
  c.degenerate = a.degenerate;
  if (a.ternary.rows() >= 2) c.q2 = q2(a.ternary);
  const Q3Result r = q3(a.binary);
  c.q3 = r.value;
  c.l_nr = c.l_nr_max = r.l_nr;
}

MetricReport evaluate_checked(const DatasetMatrices& ds, int bins, double tol) {
  MetricReport rep;
  rep.instances = ds.instances();
  rep.bins = bins;
  rep.tol = tol;
  for (const VariableMatrix* m : {&ds.pg, &ds.qg, &ds.vm}) {
    ClassMetrics c;
    c.name = m->name;
    bounded_class(c, *m, bins, tol);
    rep.classes.push_back(std::move(c));
  }
  ClassMetrics va;
  va.name = "va";
  va.entropies = column_entropies(ds.va, bins);
  va.q1 = va.entropies.size() ? va.entropies.mean() : 0.0;
  va.degenerate = degenerate_columns(ds.va);
  va.columns = ds.va.values.cols() - static_cast<Index>(va.degenerate.size());
  rep.classes.push_back(std::move(va));

  ClassMetrics br;
  br.name = "branch";
  const Activation a = branch_activation(ds.s_from, ds.s_to, ds.s_max, tol);
  br.columns = ds.s_max.size();
  if (a.ternary.rows() >= 2) br.q2 = q2(a.ternary);
  const Q3Result r = q3(a.binary);
  br.q3 = r.value;
  br.l_nr = br.l_nr_max = r.l_nr;
  rep.classes.push_back(std::move(br));

  for (const ClassMetrics& c : rep.classes) {
    if (c.q1 && (*c.q1 < -1e-12 || *c.q1 > 1.0 + 1e-12)) throw Error("Q1 out of range in class " + c.name);
    if (c.q2 && (*c.q2 < -1e-12 || *c.q2 > 1.0 + 1e-12)) throw Error("Q2 out of range in class " + c.name);
    if (c.q3 && (*c.q3 < -1e-12 || *c.q3 > 0.5 + 1e-12)) throw Error("Q3 out of range in class " + c.name);
  }
  return rep;
}

// Binary activation of a class, used to renormalize Q3.
BinaryMatrix class_binary(const DatasetMatrices& ds, const std::string& name, double tol) {
  if (name == "pg") return activation_matrices(ds.pg, tol).binary;
  if (name == "qg") return activation_matrices(ds.qg, tol).binary;
  if (name == "vm") return activation_matrices(ds.vm, tol).binary;
  return branch_activation(ds.s_from, ds.s_to, ds.s_max, tol).binary;
}

double percent(double v) { return std::round(v * 1000.0) / 10.0; }

nlohmann::json class_json(const ClassMetrics& c) {
  nlohmann::json j;
  if (c.q1) j["q1"] = percent(*c.q1);
  if (c.q2) j["q2"] = percent(*c.q2);
  if (c.q3) {
    j["q3"] = percent(*c.q3);
    j["l_nr"] = c.l_nr;
    j["l_nr_max"] = c.l_nr_max;
  }
  j["columns"] = c.columns;
  j["degenerate"] = c.degenerate;
  return j;
}

std::string fmt_percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", percent(*v));
  return buf;
}

}  // namespace

MetricReport evaluate(const DatasetMatrices& ds, const Network& net, int bins, double tol) {
  check_schema(ds, net);
  return evaluate_checked(ds, bins, tol);
}

Comparison compare(const std::vector<const DatasetMatrices*>& datasets, const std::vector<std::string>& names,
                   const Network& net, int bins, double tol) {
  if (datasets.size() < 2) throw PreconditionError("compare needs at least two datasets");
  if (names.size() != datasets.size()) throw PreconditionError("one name per dataset is required");
  Comparison cmp;
  cmp.names = names;
  for (const DatasetMatrices* ds : datasets) cmp.reports.push_back(evaluate(*ds, net, bins, tol));
  for (std::size_t c = 0; c < cmp.reports.front().classes.size(); ++c) {
    if (!cmp.reports.front().classes[c].q3) continue;
    Index l_max = 0;
    for (const MetricReport& r : cmp.reports) l_max = std::max(l_max, r.classes[c].l_nr);
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      ClassMetrics& cm = cmp.reports[d].classes[c];
      cm.l_nr_max = l_max;
      cm.q3 = q3(class_binary(*datasets[d], cm.name, tol), l_max).value;
    }
  }
  for (MetricReport& r : cmp.reports) r.self_normalized = false;
  return cmp;
}

std::string report_json(const MetricReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["instances"] = r.instances;
  j["bins"] = r.bins;
  j["tol"] = r.tol;
  j["q3_self_normalized"] = r.self_normalized;
  for (const ClassMetrics& c : r.classes) j["classes"][c.name] = class_json(c);
  return j.dump(2);
}

std::string comparison_json(const Comparison& c) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["methods"] = c.names;
  j["bins"] = c.reports.front().bins;
  j["tol"] = c.reports.front().tol;
  for (std::size_t d = 0; d < c.reports.size(); ++d) {
    j["instances"][c.names[d]] = c.reports[d].instances;
    for (const ClassMetrics& cm : c.reports[d].classes) {
      if (cm.q1) j["q1"][cm.name][c.names[d]] = percent(*cm.q1);
      if (cm.q2) j["q2"][cm.name][c.names[d]] = percent(*cm.q2);
      if (cm.q3) {
        j["q3"][cm.name][c.names[d]] = percent(*cm.q3);
        j["l_nr"][cm.name][c.names[d]] = cm.l_nr;
        j["l_nr_max"][cm.name] = cm.l_nr_max;
      }
    }
  }
  return j.dump(2);
}

std::string report_table(const MetricReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %6s\n", "class", "Q1 %", "Q2 %", "Q3 %", "|Lnr|");
  out << line;
  for (const ClassMetrics& c : r.classes) {
    std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %6s\n", c.name.c_str(), fmt_percent(c.q1).c_str(),
                  fmt_percent(c.q2).c_str(), fmt_percent(c.q3).c_str(), c.q3 ? std::to_string(c.l_nr).c_str() : "-");
    out << line;
  }
  out << "K = " << r.instances << ", bins = " << r.bins << ", tol = " << r.tol;
  if (r.self_normalized) out << " (Q3 self-normalized, not comparable across datasets)";
  out << "\n";
  return out.str();
}

std::string comparison_table(const Comparison& c) {
  std::ostringstream out;
  auto block = [&](const char* metric, auto get) {
    out << metric << "\n";
    out << "  " << std::string(8, ' ');
    for (const std::string& n : c.names) {
      char cell[64];
      std::snprintf(cell, sizeof cell, " %12s", n.substr(0, 12).c_str());
      out << cell;
    }
    out << "\n";
    for (std::size_t k = 0; k < c.reports.front().classes.size(); ++k) {
      std::vector<std::optional<double>> row;
      for (const MetricReport& r : c.reports) row.push_back(get(r.classes[k]));
      if (!row.front()) continue;
      double best = -1.0;
      for (const auto& v : row) best = std::max(best, percent(*v));
      char head[32];
      std::snprintf(head, sizeof head, "  %-8s", c.reports.front().classes[k].name.c_str());
      out << head;
      for (const auto& v : row) {
        const std::string s = fmt_percent(v) + (percent(*v) == best ? "**" : "");
        char cell[64];
        std::snprintf(cell, sizeof cell, " %12s", s.c_str());
        out << cell;
      }
      out << "\n";
    }
  };
  block("Q1 %", [](const ClassMetrics& m) { return m.q1; });
  block("Q2 %", [](const ClassMetrics& m) { return m.q2; });
  block("Q3 %", [](const ClassMetrics& m) { return m.q3; });
  return out.str();
}

}  // namespace opfgen
