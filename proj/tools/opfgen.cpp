// opfgen: generate, evaluate, compare and inspect AC-OPF datasets.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration or usage error,
// 3 generation failed, 4 dataset load or schema error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opfgen/dataset.hpp"
#include "opfgen/errors.hpp"
#include "opfgen/log.hpp"
#include "opfgen/metrics.hpp"
#include "opfgen/pipeline.hpp"
#include "opfgen/polytope.hpp"
#include "opfgen/schedule.hpp"

namespace {

using namespace opfgen;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kGeneration = 3, kSchema = 4 };

struct GenerateArgs {
  std::string case_path, out, method = "mx";
  int samples = 1000, batches = 10, workers = 1;
  std::optional<double> range_p, range_q, eta;
  double delta_pf = 0.05, alpha_min = 0.01, alpha_max = 0.99, epsilon_frac = 0.001;
  std::uint64_t seed = 0;
  std::optional<long> target_k;
};

struct EvaluateArgs {
  std::string dataset, report;
  int bins = kDefaultBins;
  double tol = kDefaultTolerance;
};

struct CompareArgs {
  std::vector<std::string> datasets, names;
  std::string report;
  int bins = kDefaultBins;
  double tol = kDefaultTolerance;
};

struct InspectArgs {
  std::string case_path, dataset, dump_polytope, export_csv;
  double range_p = 100.0, range_q = 100.0, delta_pf = 0.05, alpha_min = 0.01, alpha_max = 0.99;
  bool audit = false;
};

int run_generate(const GenerateArgs& a) {
  GenerationConfig cfg = GenerationConfig::for_method(method_from_string(a.method));
  cfg.samples = a.samples;
  cfg.batches = a.batches;
  if (a.range_p) cfg.delta_p = *a.range_p;
  if (a.range_q) cfg.delta_q = *a.range_q;
  cfg.delta_pf = a.delta_pf;
  cfg.alpha_min = a.alpha_min;
  cfg.alpha_max = a.alpha_max;
  cfg.epsilon_fraction = a.epsilon_frac;
  cfg.eta = a.eta;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  cfg.target_k = a.target_k;
  cfg.validate();

  Network net;
  try {
    net = parse_case(a.case_path);
  } catch (const Error& e) {
    throw ConfigError(a.case_path + ": " + e.what());
  }
  const GenerationResult r = generate(net, cfg, a.out, [](const BatchProgress& p) {
    std::printf("batch %d: %ld attempted, %ld converged (K = %ld)\n", p.batch, p.attempted, p.converged, p.total);
    std::fflush(stdout);
  });
  std::printf("K = %ld of %ld attempted, written to %s\n", r.handle.instances(), r.attempted, a.out.c_str());
  return kOk;
}

int run_evaluate(const EvaluateArgs& a) {
  const LoadedDataset ds = load_dataset(a.dataset);
  const DatasetMatrices m = dataset_matrices(ds, ds.net);
  const MetricReport rep = evaluate(m, ds.net, a.bins, a.tol);
  std::cout << report_table(rep);
  const fs::path out = a.report.empty() ? fs::path(a.dataset) / "report.json" : fs::path(a.report);
  std::ofstream(out) << report_json(rep) << "\n";
  return kOk;
}

int run_compare(const CompareArgs& a) {
  std::vector<LoadedDataset> loaded;
  for (const std::string& d : a.datasets) loaded.push_back(load_dataset(d));
  for (const LoadedDataset& d : loaded)
    if (d.handle.meta.network_fingerprint != loaded.front().handle.meta.network_fingerprint)
      throw SchemaError("datasets were generated on different networks: " + loaded.front().handle.dir.string() +
                        " and " + d.handle.dir.string());
  std::vector<std::string> names = a.names;
  if (names.empty())
    for (const LoadedDataset& d : loaded) names.push_back(fs::path(d.handle.dir).lexically_normal().filename().string());
  if (names.size() != loaded.size()) throw ConfigError("--names needs one name per dataset");
  std::vector<DatasetMatrices> mats;
  for (const LoadedDataset& d : loaded) mats.push_back(dataset_matrices(d, loaded.front().net));
  std::vector<const DatasetMatrices*> ptrs;
  for (const DatasetMatrices& m : mats) ptrs.push_back(&m);
  const Comparison cmp = compare(ptrs, names, loaded.front().net, a.bins, a.tol);
  std::cout << comparison_table(cmp);
  if (!a.report.empty()) std::ofstream(a.report) << comparison_json(cmp) << "\n";
  return kOk;
}

int run_inspect(const InspectArgs& a) {
  if (a.case_path.empty() == a.dataset.empty()) throw ConfigError("inspect needs exactly one of --case or --dataset");
  if (!a.case_path.empty()) {
    Network net;
    try {
      net = parse_case(a.case_path);
    } catch (const Error& e) {
      throw ConfigError(a.case_path + ": " + e.what());
    }
    std::printf("%s: %zu buses, %zu generators, %zu loads, %zu branches, base %.6g MVA\n", net.case_name.c_str(),
                net.buses.size(), net.generators.size(), net.loads.size(), net.branches.size(), net.base_mva);
    std::printf("angle limits defaulted on %d branches\n", net.angle_limits_defaulted());
    const TotalLoadSupport sup = support(net, a.range_p);
    std::printf("total-load support [%.6g, %.6g] MW\n", sup.lo, sup.hi);
    const LoadPolytope lp = build_load_polytope(net, a.range_p, a.range_q, a.delta_pf, a.alpha_min, a.alpha_max);
    std::printf("load polytope: dimension %ld, %ld rows\n", static_cast<long>(lp.dim()), static_cast<long>(lp.space.rows()));
    if (!a.dump_polytope.empty()) {
      std::ofstream out(a.dump_polytope);
      dump_polytope(lp.space, out);
    }
    return kOk;
  }
  const LoadedDataset ds = load_dataset(a.dataset);
  const DatasetMeta& m = ds.handle.meta;
  std::printf("%s: method %s, K = %ld of %ld attempted, %zu batches\n", m.case_name.c_str(),
              to_string(m.config.method).c_str(), m.instances, m.attempted, m.schedule.size());
  if (m.truncated_support)
    std::printf("support [%.6g, %.6g] MW, truncated to [%.6g, %.6g] MW, epsilon %.6g MW\n", m.support->lo,
                m.support->hi, m.truncated_support->lo, m.truncated_support->hi, m.epsilon);
  if (!a.export_csv.empty()) export_csv(ds, a.export_csv);
  if (a.audit) {
    long bad = 0;
    double worst = 0.0;
    for (const InstanceRecord& r : ds.records) {
      const ValidationReport rep = audit_record(ds, r);
      worst = std::max(worst, rep.max_residual());
      bad += !rep.passed();
    }
    std::printf("audit: %ld of %zu records fail, max residual %.3e\n", bad, ds.records.size(), worst);
    if (bad) return kSchema;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC-OPF dataset generation and quality metrics"};
  app.require_subcommand(1);

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "Generate a dataset");
  gen->add_option("--case", g.case_path, "Case file")->required();
  gen->add_option("--out", g.out, "Output dataset directory")->required();
  gen->add_option("--method", g.method, "mx, m0 or m0-20")->check(CLI::IsMember({"mx", "m0", "m0-20"}));
  gen->add_option("--samples", g.samples, "Samples per batch");
  gen->add_option("--batches", g.batches, "Number of batches");
  gen->add_option("--range-p", g.range_p, "Active load range, % of nominal");
  gen->add_option("--range-q", g.range_q, "Reactive load range, % of nominal");
  gen->add_option("--delta-pf", g.delta_pf, "Power factor widening");
  gen->add_option("--alpha-min", g.alpha_min, "Lowest power factor");
  gen->add_option("--alpha-max", g.alpha_max, "Power factor cap for the upper bound");
  gen->add_option("--epsilon-frac", g.epsilon_frac, "Slice half-width, fraction of the support width");
  gen->add_option("--eta", g.eta, "Density floor of the inverse-KDE weights");
  gen->add_option("--seed", g.seed, "Random seed");
  gen->add_option("--workers", g.workers, "Worker threads");
  gen->add_option("--target-k", g.target_k, "Add batches until this many instances exist");

  EvaluateArgs e;
  auto* ev = app.add_subcommand("evaluate", "Compute Q1/Q2/Q3 of a dataset");
  ev->add_option("dataset", e.dataset, "Dataset directory")->required();
  ev->add_option("--bins", e.bins, "Histogram bins")->check(CLI::Range(2, 1000000));
  ev->add_option("--tol", e.tol, "Activation tolerance, fraction of range");
  ev->add_option("--report", e.report, "Report path (default <dataset>/report.json)");

  CompareArgs c;
  auto* cmp = app.add_subcommand("compare", "Compare datasets with a shared Q3 normalizer");
  cmp->add_option("datasets", c.datasets, "Dataset directories")->required()->expected(2, -1);
  cmp->add_option("--names", c.names, "Column names, one per dataset");
  cmp->add_option("--bins", c.bins, "Histogram bins")->check(CLI::Range(2, 1000000));
  cmp->add_option("--tol", c.tol, "Activation tolerance, fraction of range");
  cmp->add_option("--report", c.report, "Write the comparison JSON here");

  InspectArgs in;
  auto* ins = app.add_subcommand("inspect", "Summarize a case or a dataset");
  ins->add_option("--case", in.case_path, "Case file");
  ins->add_option("--dataset", in.dataset, "Dataset directory");
  ins->add_option("--range-p", in.range_p, "Active load range, %");
  ins->add_option("--range-q", in.range_q, "Reactive load range, %");
  ins->add_option("--delta-pf", in.delta_pf, "Power factor widening");
  ins->add_option("--alpha-min", in.alpha_min, "Lowest power factor");
  ins->add_option("--alpha-max", in.alpha_max, "Power factor cap");
  ins->add_option("--dump-polytope", in.dump_polytope, "Write the load polytope (n m header, rows of A then b)");
  ins->add_option("--export-csv", in.export_csv, "Write one CSV per variable class into this directory");
  ins->add_flag("--audit", in.audit, "Re-validate every record");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return run_generate(g);
    if (*ev) return run_evaluate(e);
    if (*cmp) return run_compare(c);
    if (*ins) return run_inspect(in);
  } catch (const ConfigError& err) {
    std::cerr << "configuration error: " << err.what() << "\n";
    return kConfig;
  } catch (const GenerationFailed& err) {
    std::cerr << "generation failed: " << err.what() << "\n";
    return kGeneration;
  } catch (const EmptySupport& err) {
    std::cerr << "generation failed: " << err.what() << "\n";
    return kGeneration;
  } catch (const InfeasibleSpace& err) {
    std::cerr << "generation failed: " << err.what() << "\n";
    return kGeneration;
  } catch (const LoadError& err) {
    std::cerr << "dataset error: " << err.what() << "\n";
    return kSchema;
  } catch (const SchemaError& err) {
    std::cerr << "schema error: " << err.what() << "\n";
    return kSchema;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kOther;
  }
  return kOther;
}
