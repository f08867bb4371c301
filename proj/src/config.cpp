#include "opfgen/config.hpp"

#include "opfgen/errors.hpp"

namespace opfgen {

std::string to_string(Method m) {
  switch (m) {
    case Method::mx:
      return "mx";
    case Method::m0:
      return "m0";
    case Method::m0_20:
      return "m0-20";
  }
  return "mx";
}

Method method_from_string(const std::string& s) {
  if (s == "mx") return Method::mx;
  if (s == "m0") return Method::m0;
  if (s == "m0-20") return Method::m0_20;
  throw ConfigError("unknown method '" + s + "' (expected mx, m0 or m0-20)");
}

GenerationConfig GenerationConfig::for_method(Method m) {
  GenerationConfig c;
  c.method = m;
  if (m == Method::m0_20) c.delta_p = c.delta_q = 20.0;
  return c;
}

void GenerationConfig::validate() const {
  if (samples < 1) throw ConfigError("samples per batch must be at least 1");
  if (batches < 1) throw ConfigError("batch count must be at least 1");
  if (!(delta_p >= 0.0) || !(delta_q >= 0.0)) throw ConfigError("load ranges must be non-negative");
  if (!(delta_pf >= 0.0)) throw ConfigError("delta_pf must be non-negative");
  if (!(alpha_min >= 0.0 && alpha_min < alpha_max && alpha_max <= 1.0))
    throw ConfigError("power factor limits need 0 <= alpha_min < alpha_max <= 1");
  if (!(epsilon_fraction > 0.0 && epsilon_fraction < 1.0)) throw ConfigError("epsilon fraction must lie in (0, 1)");
  if (eta && !(*eta > 0.0)) throw ConfigError("eta must be strictly positive");
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  if (target_k && *target_k < 1) throw ConfigError("target K must be at least 1");
  if (slack_penalty && !(*slack_penalty > 0.0)) throw ConfigError("slack penalty must be positive");
  if (!(solver.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (solver.max_iterations < 1) throw ConfigError("solver needs at least one iteration");
}

}  // namespace opfgen
