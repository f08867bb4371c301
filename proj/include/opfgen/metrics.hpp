#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opfgen/errors.hpp"
#include "opfgen/grid.hpp"

namespace opfgen {

inline constexpr int kDefaultBins = 100;
inline constexpr double kDefaultTolerance = 0.01;

using TernaryMatrix = Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic>;
using BinaryMatrix = Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic>;

/// K x |T| values of one variable type with per-column bounds (infinite when unbounded).
struct VariableMatrix {
  std::string name;
  Eigen::MatrixXd values;
  Eigen::VectorXd lower, upper;
};

/// Normalized Shannon entropy of one column over B equal bins on [lo, hi]. Values outside
/// the range fall into the edge bins; a zero-width range gives 0.
template <typename Derived>
double column_entropy(const Eigen::MatrixBase<Derived>& col, double lo, double hi, int bins) {
  if (bins < 2) throw PreconditionError("entropy needs at least two bins");
  const Eigen::Index k = col.size();
  if (k == 0) throw PreconditionError("entropy of an empty column");
  if (!(hi > lo)) return 0.0;
  std::vector<Eigen::Index> count(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double u = (double(col(i)) - lo) / (hi - lo) * bins;
    const int b = std::clamp(static_cast<int>(std::floor(u)), 0, bins - 1);
    ++count[static_cast<std::size_t>(b)];
  }
  double h = 0.0;
  for (Eigen::Index c : count) {
    if (c == 0) continue;
    const double p = double(c) / double(k);
    h -= p * std::log2(p);
  }
  return h / std::log2(double(bins));
}

/// Columns with lb = ub; excluded from every metric.
std::vector<Eigen::Index> degenerate_columns(const VariableMatrix& m);

/// Entropy of each non-degenerate column. Bounded columns bin over their feasible range,
/// unbounded ones over the empirical min-max.
Eigen::VectorXd column_entropies(const VariableMatrix& m, int bins);

/// Mean column entropy.
double q1(const VariableMatrix& m, int bins = kDefaultBins);

/// Mean normalized Hamming distance over all row pairs, by per-column state counts.
template <typename Derived>
double q2(const Eigen::MatrixBase<Derived>& a) {
  const Eigen::Index k = a.rows(), t = a.cols();
  if (k < 2) throw PreconditionError("Q2 needs at least two instances");
  if (t == 0) return 0.0;
  auto pairs = [](double n) { return n * (n - 1.0) / 2.0; };
  const double all = pairs(double(k));
  double differing = 0.0;
  for (Eigen::Index j = 0; j < t; ++j) {
    std::array<Eigen::Index, 3> count{0, 0, 0};
    for (Eigen::Index i = 0; i < k; ++i) ++count[static_cast<std::size_t>(int(a(i, j)) + 1)];
    differing += all - pairs(double(count[0])) - pairs(double(count[1])) - pairs(double(count[2]));
  }
  return differing / (all * double(t));
}

struct Q3Result {
  double value = 0.0;
  Eigen::Index l_nr = 0;
};

/// Sum over ever-active limit columns of min(frequency, 1/2), divided by l_nr_max
/// (0 uses this matrix's own non-redundant count).
template <typename Derived>
Q3Result q3(const Eigen::MatrixBase<Derived>& a, Eigen::Index l_nr_max = 0) {
  const Eigen::Index k = a.rows();
  Q3Result r;
  if (k == 0) return r;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < k; ++i) hits += a(i, j) != 0;
    if (hits == 0) continue;
    ++r.l_nr;
    sum += std::min(double(hits) / double(k), 0.5);
  }
  if (l_nr_max == 0) l_nr_max = r.l_nr;
  if (l_nr_max < r.l_nr) throw PreconditionError("l_nr_max is smaller than the dataset's own non-redundant set");
  r.value = l_nr_max > 0 ? sum / double(l_nr_max) : 0.0;
  return r;
}

struct Activation {
  BinaryMatrix binary;    // [limit 1 of every kept column | limit 2 of every kept column]
  TernaryMatrix ternary;  // -1 lower / from end, +1 upper / to end, 0 inactive
  std::vector<Eigen::Index> kept;
  std::vector<Eigen::Index> degenerate;
};

/// Lower active iff v <= lb + tol r, upper iff v >= ub - tol r with r = ub - lb.
Activation activation_matrices(const VariableMatrix& m, double tol = kDefaultTolerance);

/// Branch ends against [0, s_max]: active iff |s| >= (1 - tol) s_max. When both ends are
/// active the ternary entry names the end with the larger loading, the from end on ties.
Activation branch_activation(const Eigen::MatrixXd& s_from, const Eigen::MatrixXd& s_to,
                             const Eigen::VectorXd& s_max, double tol = kDefaultTolerance);

/// Everything the metrics read from a dataset. Flow magnitudes are in MVA and only cover
/// branches with a thermal limit.
struct DatasetMatrices {
  VariableMatrix pg, qg, vm, va;
  Eigen::MatrixXd s_from, s_to;
  Eigen::VectorXd s_max;
  std::vector<Eigen::Index> limited_branches;
  Eigen::MatrixXd pd, qd;  // realized loads

  Eigen::Index instances() const { return pg.values.rows(); }
};

/// Bounds of every variable class for a network; values left empty.
DatasetMatrices empty_matrices(const Network& net);

struct ClassMetrics {
  std::string name;
  std::optional<double> q1, q2, q3;
  Eigen::Index l_nr = 0;
  Eigen::Index l_nr_max = 0;
  Eigen::Index columns = 0;
  std::vector<Eigen::Index> degenerate;
  Eigen::VectorXd entropies;
};

struct MetricReport {
  Eigen::Index instances = 0;
  int bins = kDefaultBins;
  double tol = kDefaultTolerance;
  bool self_normalized = true;  // Q3 divided by the dataset's own |L_nr|
  std::vector<ClassMetrics> classes;  // pg, qg, vm, va, branch

  const ClassMetrics& at(const std::string& name) const;
};

/// Q1 over pg, qg, vm, va; Q2 and Q3 over pg, qg, vm and branch flow limits.
MetricReport evaluate(const DatasetMatrices& ds, const Network& net, int bins = kDefaultBins,
                      double tol = kDefaultTolerance);

struct Comparison {
  std::vector<std::string> names;
  std::vector<MetricReport> reports;  // Q3 renormalized by the shared l_nr_max
};

/// Shared normalizer: l_nr_max per class is the largest |L_nr| over the datasets.
Comparison compare(const std::vector<const DatasetMatrices*>& datasets, const std::vector<std::string>& names,
                   const Network& net, int bins = kDefaultBins, double tol = kDefaultTolerance);

/// JSON documents laid out class -> (method ->) value, percentages with one decimal.
std::string report_json(const MetricReport& r);
std::string comparison_json(const Comparison& c);

/// Plain-text tables; compare marks the best value of each row with `**`.
std::string report_table(const MetricReport& r);
std::string comparison_table(const Comparison& c);

}  // namespace opfgen
