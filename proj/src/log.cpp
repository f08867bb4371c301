#include "opfgen/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

namespace opfgen {

spdlog::logger& log() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_logger_mt("opfgen");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("OPFGEN_LOG_LEVEL")) {
      const auto level = spdlog::level::from_str(env);
      // from_str maps unknown names to off; only accept it when asked for.
      if (level != spdlog::level::off || std::string(env) == "off") l->set_level(level);
    }
    return l;
  }();
  return *logger;
}

}  // namespace opfgen
