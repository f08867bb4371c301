#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "opfgen/grid.hpp"

namespace opfgen {

/// Interval [lo, hi] of admissible total active load, MW.
struct TotalLoadSupport {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Total-load targets of converged instances with the batch that produced them.
struct ConvergedSet {
  std::vector<double> values;
  std::vector<int> batch;

  void add(double value, int batch_index) {
    values.push_back(value);
    batch.push_back(batch_index);
  }
  std::size_t size() const { return values.size(); }
};

struct Attempt {
  double p_tot = 0.0;
  bool converged = false;
};

enum class BandwidthRule { silverman };

/// Inverse-KDE sampling density pi(p) on a uniform grid over the support.
struct WeightedDensity {
  TotalLoadSupport support;
  Eigen::VectorXd grid;
  Eigen::VectorXd kde;      // truncated, renormalized KDE of the converged set
  Eigen::VectorXd density;  // pi(p), integrates to 1 over the support
  double bandwidth = 0.0;
  double eta = 0.0;
  double normalization = 0.0;  // integral of 1 / (kde + eta) before normalizing
};

inline constexpr int kDensityGridSize = 512;

/// Intersection of the summed load box with the summed generator limits.
TotalLoadSupport support(const Network& net, double delta_p);

std::vector<double> draw_uniform(const TotalLoadSupport& sup, std::size_t n, std::uint64_t seed);

/// Cuts extremal dead zones: a side moves to the converged hull plus a margin of 1% of the
/// original width when some attempt failed beyond the hull on that side.
TotalLoadSupport truncate_support(const TotalLoadSupport& sup, const ConvergedSet& converged,
                                  const std::vector<Attempt>& attempts);

/// Silverman bandwidth of a sample.
double silverman_bandwidth(const std::vector<double>& values);

/// pi(p) proportional to 1 / (KDE(C)(p) + eta). Without an explicit eta, eta is 5% of the
/// largest KDE value on the grid.
WeightedDensity fit_weighted(const ConvergedSet& converged, const TotalLoadSupport& sup,
                             std::optional<double> eta = std::nullopt,
                             BandwidthRule rule = BandwidthRule::silverman);

/// Inverse-CDF draws using the trapezoidal CDF of the gridded density, linearly interpolated.
std::vector<double> draw_weighted(const WeightedDensity& w, std::size_t n, std::uint64_t seed);

/// Probability mass of pi on [a, b] (trapezoidal, clipped to the support).
double weighted_mass(const WeightedDensity& w, double a, double b);

}  // namespace opfgen
