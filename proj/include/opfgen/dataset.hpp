#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opfgen/acopf.hpp"
#include "opfgen/config.hpp"
#include "opfgen/grid.hpp"
#include "opfgen/metrics.hpp"
#include "opfgen/schedule.hpp"

namespace opfgen {

inline constexpr int kFormatVersion = 1;

/// One persisted instance. Loads: p_hat/q_hat is the sample, pd/qd the realized load
/// (the canonical model input).
struct InstanceRecord {
  long id = 0;
  int batch = 0;
  double p_tot_target = 0.0;
  Eigen::VectorXd p_hat, q_hat, pd, qd;
  Eigen::VectorXd vm, va, pg, qg;
  Eigen::VectorXd slack_p_up, slack_p_dw, slack_q_up, slack_q_dw;
  double objective = 0.0;
  SolveStatus status = SolveStatus::converged;
  int iterations = 0;
  double kkt_residual = 0.0;
};

std::string to_json_line(const InstanceRecord& r);
InstanceRecord record_from_json_line(const std::string& line);

struct FailureRecord {
  int batch = 0;
  long index = 0;
  double p_tot_target = 0.0;
  std::string status;  // solver status, or the reason sampling failed
};

struct BatchSchedule {
  int batch = 0;
  std::vector<double> targets;
};

struct DatasetMeta {
  int format_version = kFormatVersion;
  std::string case_name;
  double base_mva = 100.0;
  std::string network_fingerprint;
  GenerationConfig config;
  std::optional<TotalLoadSupport> support;
  std::optional<TotalLoadSupport> truncated_support;
  double epsilon = 0.0;
  double slack_penalty = 0.0;
  int angle_limits_defaulted = 0;
  long instances = 0;  // K
  long attempted = 0;
  std::string created_at;
  std::string records_hash;  // FNV-1a of instances.jsonl
  std::vector<BatchSchedule> schedule;
};

std::string meta_json(const DatasetMeta& m);
DatasetMeta meta_from_json(const std::string& text);

struct DatasetHandle {
  std::filesystem::path dir;
  DatasetMeta meta;

  long instances() const { return meta.instances; }
};

/// Appends records to a dataset directory; the single writer of a generation run.
class DatasetWriter {
 public:
  /// Creates the directory, copies the network as case.m and truncates the record files.
  DatasetWriter(const std::filesystem::path& dir, const Network& net);

  /// Persists a feasible solution; returns its id. Raises PreconditionError otherwise.
  long append_instance(const OpfProblem& prob, const OpfSolution& sol, int batch);
  void append_failure(const FailureRecord& f);

  /// Writes meta.json with the final count and the record hash.
  DatasetHandle finish(DatasetMeta meta);

  long instances() const { return next_id_; }

 private:
  std::filesystem::path dir_;
  std::ofstream records_, failures_;
  long next_id_ = 0;
  std::uint64_t hash_;
};

std::string fnv1a_hex(std::uint64_t h);
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

struct LoadedDataset {
  DatasetHandle handle;
  Network net;  // from the dataset's case.m
  std::vector<InstanceRecord> records;
  std::vector<FailureRecord> failures;
};

/// Reads and checks a dataset directory. Raises LoadError naming the file (and line) at fault.
LoadedDataset load_dataset(const std::filesystem::path& dir);

/// Metric inputs of a dataset; raises SchemaError when records do not fit the network.
DatasetMatrices dataset_matrices(const LoadedDataset& ds, const Network& net);

/// Re-validates a record against its network, rebuilding the problem from the metadata.
ValidationReport audit_record(const LoadedDataset& ds, const InstanceRecord& r);

/// One CSV per variable class (pg, qg, vm, va, pd, qd, sf, st) under `out`.
void export_csv(const LoadedDataset& ds, const std::filesystem::path& out);

}  // namespace opfgen
