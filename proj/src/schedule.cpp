#include "opfgen/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "opfgen/errors.hpp"
#include "opfgen/polytope.hpp"

namespace opfgen {

TotalLoadSupport support(const Network& net, double delta_p) {
  double dmin = 0.0, dmax = 0.0, gmin = 0.0, gmax = 0.0;
  for (const Load& d : net.loads) {
    const auto [lo, hi] = load_box(d.p_nom, delta_p);
    dmin += lo;
    dmax += hi;
  }
  for (const Generator& g : net.generators) {
    gmin += g.p_min;
    gmax += g.p_max;
  }
  const TotalLoadSupport sup{std::max(dmin, gmin), std::min(dmax, gmax)};
  if (!(sup.lo < sup.hi))
    throw EmptySupport("total-load support is empty: [" + std::to_string(sup.lo) + ", " +
                       std::to_string(sup.hi) + "] MW");
  return sup;
}

std::vector<double> draw_uniform(const TotalLoadSupport& sup, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(sup.lo, sup.hi);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

TotalLoadSupport truncate_support(const TotalLoadSupport& sup, const ConvergedSet& converged,
                                  const std::vector<Attempt>& attempts) {
  if (attempts.empty()) throw PreconditionError("truncation needs the first batch's attempts");
  if (converged.size() == 0) throw GenerationFailed("no instance converged in the first batch");
  const auto [cmin, cmax] = std::minmax_element(converged.values.begin(), converged.values.end());
  bool failed_below = false, failed_above = false;
  for (const Attempt& a : attempts) {
    if (a.converged) continue;
    failed_below = failed_below || a.p_tot < *cmin;
    failed_above = failed_above || a.p_tot > *cmax;
  }
  const double margin = 0.01 * sup.width();
  TotalLoadSupport out = sup;
  if (failed_below) out.lo = std::max(sup.lo, *cmin - margin);
  if (failed_above) out.hi = std::min(sup.hi, *cmax + margin);
  return out;
}

double silverman_bandwidth(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / std::max(1.0, n - 1.0));

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, sorted.size() - 1);
    return sorted[i] + (pos - std::floor(pos)) * (sorted[j] - sorted[i]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

namespace {

double trapezoid(const Eigen::VectorXd& y, double h) {
  if (y.size() < 2) return 0.0;
  return h * (y.sum() - 0.5 * (y(0) + y(y.size() - 1)));
}

}  // namespace

WeightedDensity fit_weighted(const ConvergedSet& converged, const TotalLoadSupport& sup,
                             std::optional<double> eta, BandwidthRule rule) {
  if (converged.size() < 2) throw InsufficientData("weighted density needs at least two converged values");
  if (eta && !(*eta > 0.0)) throw ConfigError("eta must be strictly positive");
  if (!(sup.lo < sup.hi)) throw EmptySupport("weighted density over an empty support");

  WeightedDensity w;
  w.support = sup;
  w.grid = Eigen::VectorXd::LinSpaced(kDensityGridSize, sup.lo, sup.hi);
  const double h_grid = sup.width() / (kDensityGridSize - 1);

  double bw = 0.0;
  switch (rule) {
    case BandwidthRule::silverman:
      bw = silverman_bandwidth(converged.values);
      break;
  }
  if (!(bw > 0.0)) bw = 1e-3 * sup.width();
  w.bandwidth = bw;

  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bw * static_cast<double>(converged.size()));
  w.kde = Eigen::VectorXd::Zero(kDensityGridSize);
  for (Eigen::Index i = 0; i < w.grid.size(); ++i) {
    double s = 0.0;
    for (double c : converged.values) {
      const double u = (w.grid(i) - c) / bw;
      s += std::exp(-0.5 * u * u);
    }
    w.kde(i) = s * norm;
  }
  const double mass = trapezoid(w.kde, h_grid);
  if (mass > 0.0) w.kde /= mass;

  w.eta = eta ? *eta : 0.05 * w.kde.maxCoeff();
  if (!(w.eta > 0.0)) w.eta = 1.0 / sup.width();
  w.density = (w.kde.array() + w.eta).inverse().matrix();
  w.normalization = trapezoid(w.density, h_grid);
  w.density /= w.normalization;
  return w;
}

namespace {

Eigen::VectorXd cumulative(const WeightedDensity& w) {
  const Eigen::Index n = w.grid.size();
  Eigen::VectorXd cdf(n);
  cdf(0) = 0.0;
  for (Eigen::Index i = 1; i < n; ++i)
    cdf(i) = cdf(i - 1) + 0.5 * (w.density(i - 1) + w.density(i)) * (w.grid(i) - w.grid(i - 1));
  cdf /= cdf(n - 1);
  return cdf;
}

double interpolate(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, double x) {
  if (x <= xs(0)) return ys(0);
  if (x >= xs(xs.size() - 1)) return ys(ys.size() - 1);
  const auto it = std::upper_bound(xs.data(), xs.data() + xs.size(), x);
  const auto i = static_cast<Eigen::Index>(it - xs.data()) - 1;
  const double t = (x - xs(i)) / (xs(i + 1) - xs(i));
  return ys(i) + t * (ys(i + 1) - ys(i));
}

}  // namespace

std::vector<double> draw_weighted(const WeightedDensity& w, std::size_t n, std::uint64_t seed) {
  const Eigen::VectorXd cdf = cumulative(w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) {
    const double u = unit(rng);
    // First grid index whose CDF exceeds u; flat stretches are skipped.
    const auto it = std::upper_bound(cdf.data(), cdf.data() + cdf.size(), u);
    auto i = static_cast<Eigen::Index>(it - cdf.data());
    i = std::clamp<Eigen::Index>(i, 1, cdf.size() - 1);
    const double span = cdf(i) - cdf(i - 1);
    const double t = span > 0.0 ? (u - cdf(i - 1)) / span : 0.0;
    v = std::clamp(w.grid(i - 1) + t * (w.grid(i) - w.grid(i - 1)), w.support.lo, w.support.hi);
  }
  return out;
}

double weighted_mass(const WeightedDensity& w, double a, double b) {
  const Eigen::VectorXd cdf = cumulative(w);
  a = std::clamp(a, w.support.lo, w.support.hi);
  b = std::clamp(b, w.support.lo, w.support.hi);
  return interpolate(w.grid, cdf, b) - interpolate(w.grid, cdf, a);
}

}  // namespace opfgen
