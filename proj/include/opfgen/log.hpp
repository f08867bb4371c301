#pragma once

#include <spdlog/spdlog.h>

namespace opfgen {

/// Shared stderr logger. The level comes from OPFGEN_LOG_LEVEL (trace, debug, info, warn,
/// error, off) and defaults to warn.
spdlog::logger& log();

}  // namespace opfgen
