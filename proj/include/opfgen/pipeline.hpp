#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "opfgen/config.hpp"
#include "opfgen/dataset.hpp"
#include "opfgen/grid.hpp"

namespace opfgen {

struct BatchProgress {
  int batch = 0;
  long attempted = 0;
  long converged = 0;
  long total = 0;  // K so far
};

struct GenerationResult {
  DatasetHandle handle;
  long attempted = 0;
  std::vector<double> solve_seconds;  // per attempted instance that reached the solver
  std::vector<BatchProgress> batches;
};

using ProgressFn = std::function<void(const BatchProgress&)>;

/// Runs the batched generation loop and writes the dataset under `out`.
///
/// MX: batch targets are uniform on the total-load support first, then drawn from the
/// inverse-KDE density on the truncated support. Each target is sliced, sampled once
/// and solved. M0 and M0/20: every load coordinate is uniform in its box and the OPF
/// keeps only the box rows. Targets and per-instance seeds are derived from
/// (seed, batch, index) up front, so the output does not depend on the worker count.
GenerationResult generate(const Network& net, const GenerationConfig& cfg, const std::filesystem::path& out,
                          const ProgressFn& progress = {});

}  // namespace opfgen
