#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "opfgen/errors.hpp"
#include "opfgen/grid.hpp"

namespace opfgen {

/// Convex set {x : A x <= b}.
template <typename Scalar = double>
struct HPolytope {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix a;
  Vector b;

  Eigen::Index dim() const { return a.cols(); }
  Eigen::Index rows() const { return a.rows(); }

  template <typename Derived>
  Vector residual(const Eigen::MatrixBase<Derived>& x) const {
    return b - a * x;
  }

  /// Membership with slack rel_tol * (1 + |b_i|) per row.
  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar rel_tol = Scalar(1e-9)) const {
    const Vector r = residual(x);
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (r(i) < -rel_tol * (Scalar(1) + std::abs(b(i)))) return false;
    return true;
  }

  HPolytope append(const Matrix& rows_a, const Vector& rows_b) const {
    HPolytope out;
    out.a.resize(a.rows() + rows_a.rows(), a.cols());
    out.a << a, rows_a;
    out.b.resize(b.size() + rows_b.size());
    out.b << b, rows_b;
    return out;
  }
};

using Polytope = HPolytope<double>;

/// Writes `n m` followed by one line per row: the m coefficients then b.
void dump_polytope(const Polytope& poly, std::ostream& out);
Polytope read_polytope(std::istream& in);

/// q/p ratio limits of one load, applied to sign * q / p.
struct PfBounds {
  double r_min = 0.0;
  double r_max = 0.0;
  int sign = 1;

  /// Interval for the raw ratio q / p.
  std::pair<double, double> q_over_p() const {
    return sign > 0 ? std::pair{r_min, r_max} : std::pair{-r_max, -r_min};
  }
};

class RatioUndefined : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

PfBounds pf_bounds(const Load& load, double delta_pf, double alpha_min, double alpha_max);

struct WalkConfig {
  long burn_in = 0;
  long thin = 1;
  std::uint64_t rng_seed = 0;

  /// burn_in = 50 n, thin = n.
  static WalkConfig for_dimension(Eigen::Index n, std::uint64_t seed) {
    const long d = std::max<long>(1, static_cast<long>(n));
    return {50 * d, d, seed};
  }
};

/// Load space over x = [p_1..p_D, q_1..q_D] (MW, MVAr) plus the bookkeeping needed
/// to slice it and to reproduce its rows inside the OPF.
struct LoadPolytope {
  Polytope space;
  int num_loads = 0;
  Eigen::VectorXd p_min, p_max, q_min, q_max;
  std::vector<std::optional<PfBounds>> pf;  // empty optional: ratio rows skipped
  bool has_ratio_rows = true;
  bool sliced = false;
  double p_tot = 0.0;
  double epsilon = 0.0;

  Eigen::Index dim() const { return space.dim(); }
  /// Coordinates whose box has zero width; they are held at the box value.
  std::vector<char> fixed_mask() const;
  Eigen::VectorXd box_lower() const;
  Eigen::VectorXd box_upper() const;
  /// Rows beyond the 4D box rows (ratio and slice rows).
  Eigen::Index first_coupling_row() const { return 4 * num_loads; }
};

/// Per-load box of the load space, lower/upper swapped for negative nominals.
std::pair<double, double> load_box(double nominal, double delta_percent);

/// Box, power-factor ratio rows in the block order +p, -p, +q, -q, ratio-upper, ratio-lower.
LoadPolytope build_load_polytope(const Network& net, double delta_p, double delta_q,
                                 double delta_pf, double alpha_min, double alpha_max);

/// Box rows only (independent per-load sampling space).
LoadPolytope build_box_space(const Network& net, double delta_p, double delta_q);

/// Appends p_tot - eps <= sum p <= p_tot + eps; the input is left untouched.
Polytope slice(const Polytope& poly, double p_tot, double epsilon);
LoadPolytope slice(const LoadPolytope& poly, double p_tot, double epsilon);

struct ChebyshevBall {
  Eigen::VectorXd center;
  double radius = 0.0;
};

ChebyshevBall chebyshev_center(const Polytope& poly);

/// Affine restriction x = base + embed(z) over the free coordinates.
struct Restriction {
  Polytope reduced;
  std::vector<Eigen::Index> free;
  Eigen::VectorXd base;

  Eigen::VectorXd lift(const Eigen::VectorXd& z) const {
    Eigen::VectorXd x = base;
    for (std::size_t i = 0; i < free.size(); ++i) x(free[i]) = z(static_cast<Eigen::Index>(i));
    return x;
  }
};

/// Substitutes fixed coordinates; rows left with no coefficients are dropped when
/// satisfied and raise InfeasibleSpace otherwise.
Restriction restrict_fixed(const Polytope& poly, const std::vector<char>& fixed,
                           const Eigen::VectorXd& values);

/// Chord [lo, hi] of the line x + t e_axis inside the polytope, given residual b - A x.
template <typename Scalar, typename Derived>
std::pair<Scalar, Scalar> chord(const HPolytope<Scalar>& poly, const Eigen::MatrixBase<Derived>& residual,
                                Eigen::Index axis, Scalar guard = Scalar(1e9)) {
  Scalar lo = -guard, hi = guard;
  for (Eigen::Index j = 0; j < poly.rows(); ++j) {
    const Scalar a = poly.a(j, axis);
    if (a == Scalar(0)) continue;
    const Scalar s = std::max(residual(j), Scalar(0));
    if (a > 0)
      hi = std::min(hi, s / a);
    else
      lo = std::max(lo, s / a);
  }
  return {lo, hi};
}

/// Coordinate-direction hit-and-run. Each step picks an axis uniformly, intersects the
/// axis line with the polytope and moves to a uniform point on that chord. The first
/// burn_in states are discarded, then every thin-th state is returned.
template <typename Scalar>
std::vector<typename HPolytope<Scalar>::Vector> cdhr_sample(const HPolytope<Scalar>& poly,
                                                          const typename HPolytope<Scalar>::Vector& start,
                                                          const WalkConfig& cfg, Eigen::Index count) {
  using Vector = typename HPolytope<Scalar>::Vector;
  if (cfg.burn_in < 0 || cfg.thin < 1) throw ConfigError("walk needs burn_in >= 0 and thin >= 1");
  if (count < 1) throw PreconditionError("sample count must be positive");
  const Eigen::Index n = poly.dim();
  Vector x = start;
  Vector s = poly.residual(x);
  if (s.size() > 0 && !(s.minCoeff() > Scalar(0)))
    throw PreconditionError("walk start is not strictly interior");

  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  if (n == 0) {
    out.assign(static_cast<std::size_t>(count), x);
    return out;
  }

  bool can_move = false;
  for (Eigen::Index k = 0; k < n && !can_move; ++k) {
    const auto [lo, hi] = chord(poly, s, k);
    can_move = hi - lo > Scalar(1e-14) * (Scalar(1) + std::abs(x(k)));
  }
  if (!can_move) throw StuckWalk("every coordinate chord through the start has zero length");

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_int_distribution<Eigen::Index> pick_axis(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long total = cfg.burn_in + cfg.thin * static_cast<long>(count);
  for (long step = 1; step <= total; ++step) {
    const Eigen::Index k = pick_axis(rng);
    const auto [lo, hi] = chord(poly, s, k);
    const Scalar t = lo + Scalar(unit(rng)) * (hi - lo);
    x(k) += t;
    s.noalias() -= t * poly.a.col(k);
    if (step % (4 * n) == 0) s = poly.residual(x);
    if (step > cfg.burn_in && (step - cfg.burn_in) % cfg.thin == 0) {
      s = poly.residual(x);
      out.push_back(x);
    }
  }
  return out;
}

/// Uniform setpoints x = [p; q] from a (sliced) load polytope: fixed coordinates are
/// substituted, the walk runs in coordinates where total active load is an axis, and
/// the Chebyshev center seeds the chain.
std::vector<Eigen::VectorXd> sample_load_space(const LoadPolytope& poly, std::uint64_t seed,
                                               Eigen::Index count = 1,
                                               std::optional<WalkConfig> walk = std::nullopt);

}  // namespace opfgen
