#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace opfgen {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Angle-difference limit applied when a case file carries none (30 degrees).
inline constexpr double kDefaultAngleLimit = 0.5235987755982988;

struct Bus {
  int id = 0;
  double v_min = 0.9;  // pu
  double v_max = 1.1;  // pu
  bool is_reference = false;
  double shunt_g = 0.0;  // pu at 1 pu voltage
  double shunt_b = 0.0;  // pu at 1 pu voltage
};

struct Generator {
  int id = 0;
  int bus = 0;  // bus id
  double p_min = 0.0, p_max = 0.0;  // MW
  double q_min = 0.0, q_max = 0.0;  // MVAr
  double c2 = 0.0;  // $/MW^2h
  double c1 = 0.0;  // $/MWh
  double c0 = 0.0;  // $/h
  bool in_service = true;

  /// Marginal cost at p_max, $/MWh.
  double marginal_cost_at_max() const { return 2.0 * c2 * p_max + c1; }
};

/// Nominal demand at a bus. Negative values model embedded generation.
struct Load {
  int id = 0;
  int bus = 0;
  double p_nom = 0.0;  // MW
  double q_nom = 0.0;  // MVAr
};

struct Branch {
  int from = 0, to = 0;  // bus ids
  double r = 0.0, x = 0.0;  // pu
  double b_charge = 0.0;  // pu, total
  double tap = 1.0;
  double shift = 0.0;  // rad
  double s_max = kInf;  // MVA; infinite when the file gives no thermal limit
  double theta_min = -kDefaultAngleLimit;  // rad
  double theta_max = kDefaultAngleLimit;   // rad
  bool in_service = true;
  bool angle_defaulted = false;  // limits absent from the source file

  bool has_flow_limit() const { return std::isfinite(s_max); }
  bool has_angle_limit() const { return std::isfinite(theta_min) || std::isfinite(theta_max); }
};

/// Validated, in-service-only grid model. Treat as immutable once built.
struct Network {
  std::string case_name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<Branch> branches;

  // Element-to-bus connection maps (positions into `buses`).
  std::vector<int> gen_bus;
  std::vector<int> load_bus;
  std::vector<int> branch_from;
  std::vector<int> branch_to;

  int reference_index() const;
  int index_of(int bus_id) const;
  /// Branches whose angle limits were filled in with the default.
  int angle_limits_defaulted() const;

  double to_pu(double mw) const { return mw / base_mva; }
  double to_mw(double pu) const { return pu * base_mva; }
};

/// Checks every structural invariant and fills the connection maps.
void finalize(Network& net);

Network parse_case(const std::filesystem::path& path);
Network parse_case_text(const std::string& text, const std::string& case_name = "case");

/// Writes the network back in the same tabular case format.
void write_case(const Network& net, std::ostream& out);
void write_case(const Network& net, const std::filesystem::path& path);
std::string case_text(const Network& net);

/// FNV-1a digest of the canonical case text; identifies a network in dataset metadata.
std::string fingerprint(const Network& net);

using SparseComplex = Eigen::SparseMatrix<std::complex<double>>;

SparseComplex build_ybus(const Network& net);

/// Two-port parameters of one branch end: S_end = v_a conj(y_self v_a + y_mutual v_b).
struct BranchEnd {
  int branch = 0;
  int bus = 0;    // bus index of this end
  int other = 0;  // bus index of the opposite end
  std::complex<double> y_self;
  std::complex<double> y_mutual;
  bool is_from = true;
};

/// Both orientations of every branch: entry 2k is the from end of branch k, 2k+1 the to end.
std::vector<BranchEnd> branch_admittances(const Network& net);

/// Complex power (pu) leaving the given end, polar voltages.
template <typename DerivedM, typename DerivedA>
std::complex<double> end_flow(const BranchEnd& e, const Eigen::MatrixBase<DerivedM>& vm,
                              const Eigen::MatrixBase<DerivedA>& va) {
  const std::complex<double> vi = std::polar(double(vm(e.bus)), double(va(e.bus)));
  const std::complex<double> vj = std::polar(double(vm(e.other)), double(va(e.other)));
  return vi * std::conj(e.y_self * vi + e.y_mutual * vj);
}

/// Complex bus injections V .* conj(Ybus V) in pu.
Eigen::VectorXcd bus_injections(const SparseComplex& ybus, const Eigen::VectorXd& vm,
                                const Eigen::VectorXd& va);

}  // namespace opfgen
