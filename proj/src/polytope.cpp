#include "opfgen/polytope.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>

#include "opfgen/linprog.hpp"

namespace opfgen {

void dump_polytope(const Polytope& poly, std::ostream& out) {
  out << poly.dim() << ' ' << poly.rows() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < poly.rows(); ++i) {
    for (Eigen::Index j = 0; j < poly.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", poly.a(i, j));
      out << buf << ' ';
    }
    std::snprintf(buf, sizeof buf, "%.17g", poly.b(i));
    out << buf << '\n';
  }
}

Polytope read_polytope(std::istream& in) {
  Eigen::Index n = 0, m = 0;
  if (!(in >> n >> m) || n < 0 || m < 0) throw ParseError("bad polytope header", 1);
  Polytope poly;
  poly.a.resize(m, n);
  poly.b.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(in >> poly.a(i, j))) throw ParseError("truncated polytope row", static_cast<int>(i + 2));
    if (!(in >> poly.b(i))) throw ParseError("truncated polytope row", static_cast<int>(i + 2));
  }
  return poly;
}

namespace {

void check_pf_parameters(double delta_pf, double alpha_min, double alpha_max) {
  if (!(alpha_min >= 0.0 && alpha_min < alpha_max && alpha_max <= 1.0))
    throw ConfigError("power-factor limits need 0 <= alpha_min < alpha_max <= 1");
  if (!(delta_pf >= 0.0)) throw ConfigError("delta_pf must be nonnegative");
}

}  // namespace

PfBounds pf_bounds(const Load& load, double delta_pf, double alpha_min, double alpha_max) {
  check_pf_parameters(delta_pf, alpha_min, alpha_max);
  if (load.p_nom == 0.0)
    throw RatioUndefined("load " + std::to_string(load.id) + " has zero nominal active power");

  const double ratio = load.q_nom / load.p_nom;
  const double cos_nom = 1.0 / std::sqrt(1.0 + ratio * ratio);
  const double cos_min = std::max(cos_nom - delta_pf, alpha_min);
  const double cos_max = std::max(cos_nom, alpha_max);
  auto tan_of = [](double c) { return std::sqrt(std::max(0.0, 1.0 - c * c)) / c; };

  PfBounds pf;
  pf.r_min = tan_of(cos_max);
  pf.r_max = tan_of(cos_min);
  pf.sign = ratio >= 0.0 ? 1 : -1;
  return pf;
}

std::pair<double, double> load_box(double nominal, double delta_percent) {
  const double a = (1.0 - delta_percent / 100.0) * nominal;
  const double b = (1.0 + delta_percent / 100.0) * nominal;
  return {std::min(a, b), std::max(a, b)};
}

std::vector<char> LoadPolytope::fixed_mask() const {
  std::vector<char> mask(static_cast<std::size_t>(2 * num_loads), 0);
  for (int d = 0; d < num_loads; ++d) {
    mask[d] = p_min(d) == p_max(d);
    mask[num_loads + d] = q_min(d) == q_max(d);
  }
  return mask;
}

Eigen::VectorXd LoadPolytope::box_lower() const {
  Eigen::VectorXd v(2 * num_loads);
  v << p_min, q_min;
  return v;
}

Eigen::VectorXd LoadPolytope::box_upper() const {
  Eigen::VectorXd v(2 * num_loads);
  v << p_max, q_max;
  return v;
}

namespace {

LoadPolytope box_rows(const Network& net, double delta_p, double delta_q, int extra_blocks) {
  if (net.loads.empty()) throw ConfigError("network has no loads to sample");
  if (!(delta_p >= 0.0) || !(delta_q >= 0.0)) throw ConfigError("load ranges must be nonnegative");
  const int nd = static_cast<int>(net.loads.size());
  LoadPolytope lp;
  lp.num_loads = nd;
  lp.p_min.resize(nd);
  lp.p_max.resize(nd);
  lp.q_min.resize(nd);
  lp.q_max.resize(nd);
  for (int d = 0; d < nd; ++d) {
    std::tie(lp.p_min(d), lp.p_max(d)) = load_box(net.loads[d].p_nom, delta_p);
    std::tie(lp.q_min(d), lp.q_max(d)) = load_box(net.loads[d].q_nom, delta_q);
  }
  const int n = 2 * nd;
  lp.space.a = Eigen::MatrixXd::Zero((4 + extra_blocks) * nd, n);
  lp.space.b = Eigen::VectorXd::Zero((4 + extra_blocks) * nd);
  for (int d = 0; d < nd; ++d) {
    lp.space.a(d, d) = 1.0;
    lp.space.b(d) = lp.p_max(d);
    lp.space.a(nd + d, d) = -1.0;
    lp.space.b(nd + d) = -lp.p_min(d);
    lp.space.a(2 * nd + d, nd + d) = 1.0;
    lp.space.b(2 * nd + d) = lp.q_max(d);
    lp.space.a(3 * nd + d, nd + d) = -1.0;
    lp.space.b(3 * nd + d) = -lp.q_min(d);
  }
  return lp;
}

void require_nonempty(const LoadPolytope& lp) {
  const auto fixed = lp.fixed_mask();
  const Restriction r = restrict_fixed(lp.space, fixed, lp.box_lower());
  if (r.reduced.dim() == 0) return;  // single point, satisfied by construction of restrict_fixed
  const ChebyshevBall ball = chebyshev_center(r.reduced);
  if (!(ball.radius > 0.0)) throw InfeasibleSpace("load space has an empty interior");
}

}  // namespace

LoadPolytope build_load_polytope(const Network& net, double delta_p, double delta_q,
                                 double delta_pf, double alpha_min, double alpha_max) {
  LoadPolytope lp = box_rows(net, delta_p, delta_q, 2);
  const int nd = lp.num_loads;
  lp.pf.resize(nd);
  check_pf_parameters(delta_pf, alpha_min, alpha_max);
  for (int d = 0; d < nd; ++d) {
    const Load& load = net.loads[d];
    if (load.p_nom == 0.0) {
      // Ratio undefined; the rows stay all-zero so the block layout is preserved.
      continue;
    }
    const PfBounds pf = pf_bounds(load, delta_pf, alpha_min, alpha_max);
    lp.pf[d] = pf;
    const auto [lo, hi] = pf.q_over_p();
    const Eigen::Index up = 4 * nd + d;
    const Eigen::Index dn = 5 * nd + d;
    if (load.p_nom > 0.0) {
      lp.space.a(up, d) = -hi;  // q <= hi p
      lp.space.a(up, nd + d) = 1.0;
      lp.space.a(dn, d) = lo;  // q >= lo p
      lp.space.a(dn, nd + d) = -1.0;
    } else {
      lp.space.a(up, d) = hi;  // q / p <= hi with p < 0
      lp.space.a(up, nd + d) = -1.0;
      lp.space.a(dn, d) = -lo;
      lp.space.a(dn, nd + d) = 1.0;
    }
  }
  lp.has_ratio_rows = true;
  require_nonempty(lp);
  return lp;
}

LoadPolytope build_box_space(const Network& net, double delta_p, double delta_q) {
  LoadPolytope lp = box_rows(net, delta_p, delta_q, 0);
  lp.pf.assign(lp.num_loads, std::nullopt);
  lp.has_ratio_rows = false;
  return lp;
}

Polytope slice(const Polytope& poly, double p_tot, double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("slice half-width must be positive");
  const Eigen::Index n = poly.dim();
  const Eigen::Index nd = n / 2;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(2, n);
  rows.row(0).head(nd).setOnes();
  rows.row(1).head(nd).setConstant(-1.0);
  Eigen::VectorXd rhs(2);
  rhs << p_tot + epsilon, epsilon - p_tot;
  return poly.append(rows, rhs);
}

LoadPolytope slice(const LoadPolytope& poly, double p_tot, double epsilon) {
  if (poly.sliced) throw PreconditionError("load polytope is already sliced");
  LoadPolytope out = poly;
  out.space = slice(poly.space, p_tot, epsilon);
  out.sliced = true;
  out.p_tot = p_tot;
  out.epsilon = epsilon;
  return out;
}

ChebyshevBall chebyshev_center(const Polytope& poly) {
  const Eigen::Index n = poly.dim();
  Eigen::MatrixXd g(poly.rows(), n + 1);
  g.leftCols(n) = poly.a;
  for (Eigen::Index i = 0; i < poly.rows(); ++i) {
    const double norm = poly.a.row(i).norm();
    if (norm == 0.0) throw PreconditionError("polytope row " + std::to_string(i) + " is zero");
    g(i, n) = norm;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c(n) = 1.0;
  const LpResult lp = maximize(c, g, poly.b);
  if (lp.status != LpResult::Status::optimal)
    throw UnboundedError("Chebyshev program is unbounded; the polytope is not a bounded load space");
  return {lp.x.head(n), lp.x(n)};
}

Restriction restrict_fixed(const Polytope& poly, const std::vector<char>& fixed,
                           const Eigen::VectorXd& values) {
  Restriction r;
  const Eigen::Index n = poly.dim();
  r.base = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (fixed[j])
      r.base(j) = values(j);
    else
      r.free.push_back(j);
  }
  const Eigen::VectorXd shifted = poly.b - poly.a * r.base;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < poly.rows(); ++i) {
    bool any = false;
    for (Eigen::Index j : r.free) any = any || poly.a(i, j) != 0.0;
    if (any) {
      keep.push_back(i);
    } else if (shifted(i) < -1e-9 * (1.0 + std::abs(poly.b(i)))) {
      throw InfeasibleSpace("fixed coordinates violate polytope row " + std::to_string(i));
    }
  }
  const auto nf = static_cast<Eigen::Index>(r.free.size());
  r.reduced.a.resize(static_cast<Eigen::Index>(keep.size()), nf);
  r.reduced.b.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    for (Eigen::Index j = 0; j < nf; ++j) r.reduced.a(row, j) = poly.a(keep[k], r.free[j]);
    r.reduced.b(row) = shifted(keep[k]);
  }
  return r;
}

std::vector<Eigen::VectorXd> sample_load_space(const LoadPolytope& poly, std::uint64_t seed,
                                               Eigen::Index count, std::optional<WalkConfig> walk) {
  const Restriction r = restrict_fixed(poly.space, poly.fixed_mask(), poly.box_lower());
  const Eigen::Index nf = r.reduced.dim();
  if (nf == 0) return std::vector<Eigen::VectorXd>(static_cast<std::size_t>(count), r.base);

  // Change of variables with unit determinant: z_j = p_j for free loads except a pivot,
  // z_pivot = sum of free p. Thin total-load slices become an axis-aligned slab in z.
  Eigen::Index pivot = -1;
  double widest = -1.0;
  for (Eigen::Index j = 0; j < nf; ++j) {
    const Eigen::Index full = r.free[j];
    if (full >= poly.num_loads) continue;
    const double width = poly.p_max(full) - poly.p_min(full);
    if (width > widest) {
      widest = width;
      pivot = j;
    }
  }
  auto is_free_p = [&](Eigen::Index j) { return r.free[j] < poly.num_loads; };

  Polytope walk_space = r.reduced;
  if (pivot >= 0)
    for (Eigen::Index j = 0; j < nf; ++j)
      if (j != pivot && is_free_p(j)) walk_space.a.col(j) -= r.reduced.a.col(pivot);

  const ChebyshevBall ball = chebyshev_center(walk_space);
  const double scale = 1.0 + walk_space.b.lpNorm<Eigen::Infinity>();
  if (!(ball.radius > 1e-12 * scale)) throw InfeasibleSpace("load-space slice has an empty interior");

  const WalkConfig cfg = walk ? *walk : WalkConfig::for_dimension(nf, seed);
  const auto zs = cdhr_sample(walk_space, Eigen::VectorXd(ball.center), cfg, count);

  std::vector<Eigen::VectorXd> out;
  out.reserve(zs.size());
  for (const Eigen::VectorXd& z : zs) {
    Eigen::VectorXd y = z;
    if (pivot >= 0) {
      double others = 0.0;
      for (Eigen::Index j = 0; j < nf; ++j)
        if (j != pivot && is_free_p(j)) others += z(j);
      y(pivot) = z(pivot) - others;
    }
    out.push_back(r.lift(y));
  }
  return out;
}

}  // namespace opfgen
