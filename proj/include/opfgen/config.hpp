#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "opfgen/nlp.hpp"

namespace opfgen {

enum class Method { mx, m0, m0_20 };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct GenerationConfig {
  Method method = Method::mx;
  int samples = 1000;  // per batch
  int batches = 10;
  double delta_p = 100.0;  // %
  double delta_q = 100.0;  // %
  double delta_pf = 0.05;
  double alpha_min = 0.01;
  double alpha_max = 0.99;
  double epsilon_fraction = 0.001;  // of the support width
  std::optional<double> eta;
  std::uint64_t seed = 0;
  int workers = 1;
  std::optional<long> target_k;
  std::optional<double> slack_penalty;  // $/MWh
  SolverConfig solver;

  /// Defaults of a method; M0/20 narrows both ranges to 20%.
  static GenerationConfig for_method(Method m);

  /// Raises ConfigError on the first invalid field.
  void validate() const;
};

}  // namespace opfgen
