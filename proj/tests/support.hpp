#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

#include "opfgen/acopf.hpp"
#include "opfgen/grid.hpp"
#include "opfgen/polytope.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return OPFGEN_DATA_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("opfgen_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Lossless two-bus line, generator 0-200 MW at c1 = 10 on the reference bus, load at bus 2.
inline std::string two_bus_text(double load_mw = 100.0, double load_mvar = 0.0) {
  return "function mpc = two_bus\n"
         "mpc.version = '2';\n"
         "mpc.baseMVA = 100;\n"
         "mpc.bus = [\n"
         "  1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
         "  2 1 " + std::to_string(load_mw) + " " + std::to_string(load_mvar) + " 0 0 1 1 0 230 1 1.1 0.9;\n"
         "];\n"
         "mpc.gen = [\n"
         "  1 0 0 300 -300 1 100 1 200 0;\n"
         "];\n"
         "mpc.branch = [\n"
         "  1 2 0 0.1 0 0 0 0 0 0 1 -360 360;\n"
         "];\n"
         "mpc.gencost = [\n"
         "  2 0 0 3 0 10 0;\n"
         "];\n";
}

inline opfgen::Network two_bus(double load_mw = 100.0, double load_mvar = 0.0) {
  return opfgen::parse_case_text(two_bus_text(load_mw, load_mvar), "two_bus");
}

inline opfgen::LoadSetpoint nominal_setpoint(const opfgen::Network& net) {
  opfgen::LoadSetpoint sp;
  const auto nd = static_cast<Eigen::Index>(net.loads.size());
  sp.p_hat.resize(nd);
  sp.q_hat.resize(nd);
  for (Eigen::Index d = 0; d < nd; ++d) {
    sp.p_hat(d) = net.loads[static_cast<std::size_t>(d)].p_nom;
    sp.q_hat(d) = net.loads[static_cast<std::size_t>(d)].q_nom;
  }
  sp.p_tot_target = sp.p_hat.sum();
  return sp;
}

// Kolmogorov-Smirnov distance of a sample against the uniform law on [lo, hi].
template <typename Container>
double ks_uniform(Container v, double lo, double hi) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
  }
  return d;
}

}  // namespace testing
