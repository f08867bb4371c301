#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "opfgen/errors.hpp"
#include "opfgen/rng.hpp"
#include "opfgen/schedule.hpp"
#include "support.hpp"

using namespace opfgen;

namespace {

// Loads summing 0..400 MW at range 100%, generators summing 20..300 MW.
Network support_case() {
  return parse_case_text(
      "mpc.baseMVA = 100;\n"
      "mpc.bus = [\n 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n 2 1 120 10 0 0 1 1 0 230 1 1.1 0.9;\n"
      " 3 1 80 10 0 0 1 1 0 230 1 1.1 0.9;\n];\n"
      "mpc.gen = [\n 1 0 0 300 -300 1 100 1 200 20;\n 2 0 0 300 -300 1 100 1 100 0;\n];\n"
      "mpc.branch = [\n 1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n 1 3 0.01 0.1 0 0 0 0 0 0 1 -360 360;\n];\n"
      "mpc.gencost = [\n 2 0 0 3 0 10 0;\n 2 0 0 3 0 10 0;\n];\n");
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

}  // namespace

TEST_CASE("total-load support") {
  const Network net = support_case();
  const TotalLoadSupport s = support(net, 100.0);
  CHECK(s.lo == doctest::Approx(20.0));
  CHECK(s.hi == doctest::Approx(300.0));

  const TotalLoadSupport narrow = support(net, 20.0);
  CHECK(narrow.lo == doctest::Approx(160.0));
  CHECK(narrow.hi == doctest::Approx(240.0));
  CHECK_THROWS_AS(support(net, 0.0), EmptySupport);
}

TEST_CASE("uniform targets") {
  const TotalLoadSupport s{20.0, 300.0};
  const auto v = draw_uniform(s, 10000, 5);
  CHECK(mean(v) == doctest::Approx(160.0).epsilon(2.0 / 160.0));
  CHECK(testing::ks_uniform(v, 20.0, 300.0) < 0.02);
  for (double x : v) REQUIRE(s.contains(x));
  CHECK(draw_uniform(s, 10000, 5) == v);
  const auto one = draw_uniform(s, 1, 9);
  CHECK(s.contains(one.at(0)));
}

TEST_CASE("support truncation") {
  const TotalLoadSupport s{20.0, 300.0};
  ConvergedSet c;
  std::vector<Attempt> attempts;
  for (int i = 0; i <= 80; ++i) {
    const double p = 120.0 + 2.0 * i;
    c.add(p, 0);
    attempts.push_back({p, true});
  }
  SUBCASE("all converged leaves the support") {
    const TotalLoadSupport t = truncate_support(s, c, attempts);
    CHECK(t.lo == s.lo);
    CHECK(t.hi == s.hi);
  }
  SUBCASE("failures on both extremes") {
    attempts.push_back({25.0, false});
    attempts.push_back({295.0, false});
    const TotalLoadSupport t = truncate_support(s, c, attempts);
    CHECK(t.lo == doctest::Approx(117.2));
    CHECK(t.hi == doctest::Approx(282.8));
  }
  SUBCASE("converged span covers the support") {
    ConvergedSet full;
    full.add(20.0, 0);
    full.add(300.0, 0);
    std::vector<Attempt> a{{20.0, true}, {300.0, true}, {150.0, false}};
    const TotalLoadSupport t = truncate_support(s, full, a);
    CHECK(t.lo == s.lo);
    CHECK(t.hi == s.hi);
  }
  CHECK_THROWS_AS(truncate_support(s, ConvergedSet{}, {{50.0, false}}), GenerationFailed);
}

TEST_CASE("Silverman bandwidth") {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const double m = 5.5;
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  const double sd = std::sqrt(var / 9.0);
  // quartiles of 1..10 by linear interpolation: 3.25, 7.75
  const double iqr = 4.5;
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(10.0, -0.2)));
}

TEST_CASE("inverse-KDE density downweights the crowded region") {
  const TotalLoadSupport s{0.0, 100.0};
  ConvergedSet c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> near(49.0, 51.0);
  for (int i = 0; i < 1000; ++i) c.add(near(rng), 0);
  const WeightedDensity w = fit_weighted(c, s);
  CHECK(w.eta == doctest::Approx(0.05 * w.kde.maxCoeff()));
  CHECK(weighted_mass(w, 40.0, 60.0) < 0.2);
  CHECK(weighted_mass(w, 0.0, 100.0) == doctest::Approx(1.0).epsilon(1e-9));
  // higher converged density, lower sampling density
  for (Eigen::Index i = 1; i < w.grid.size(); ++i)
    if (w.kde(i) > w.kde(i - 1) + 1e-12) CHECK(w.density(i) < w.density(i - 1));

  CHECK_THROWS_AS(fit_weighted(c, s, 0.0), ConfigError);
  ConvergedSet one;
  one.add(10.0, 0);
  CHECK_THROWS_AS(fit_weighted(one, s), InsufficientData);
}

TEST_CASE("large eta makes the density flat") {
  const TotalLoadSupport s{0.0, 100.0};
  ConvergedSet c;
  for (int i = 0; i < 200; ++i) c.add(0.5 * i, 0);
  const WeightedDensity w = fit_weighted(c, s, 1e9);
  CHECK((w.density.array() - 0.01).abs().maxCoeff() < 1e-8);
  const auto v = draw_weighted(w, 10000, 8);
  CHECK(testing::ks_uniform(v, 0.0, 100.0) < 0.02);
}

TEST_CASE("weighted draws follow their mass") {
  const TotalLoadSupport s{0.0, 100.0};
  ConvergedSet c;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> low(0.0, 50.0);
  for (int i = 0; i < 2000; ++i) c.add(low(rng), 0);
  for (int i = 0; i < 200; ++i) c.add(50.0 + 0.25 * i, 0);
  const WeightedDensity w = fit_weighted(c, s);
  const double upper = weighted_mass(w, 50.0, 100.0);
  CHECK(upper > 0.5);
  const auto v = draw_weighted(w, 10000, 21);
  const double share = double(std::count_if(v.begin(), v.end(), [](double x) { return x > 50.0; })) / 1e4;
  CHECK(std::abs(share - upper) < 0.02);
  for (double x : v) REQUIRE(s.contains(x));
  CHECK(draw_weighted(w, 10000, 21) == v);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 1, 0));
  CHECK(derive_seed(1, 0, 0, 1) != derive_seed(1, 0, 0, 2));
  CHECK(derive_seed(9, 4, 7, 2) == derive_seed(9, 4, 7, 2));
  static_assert(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}
