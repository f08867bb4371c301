#include "opfgen/dataset.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "json.hpp"
#include "opfgen/errors.hpp"

namespace opfgen {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::VectorXd;
using ojson = nlohmann::ordered_json;

namespace {

ojson vec(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd to_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

ojson support_json(const std::optional<TotalLoadSupport>& s) {
  if (!s) return nullptr;
  return ojson{{"lo", s->lo}, {"hi", s->hi}};
}

std::optional<TotalLoadSupport> support_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return TotalLoadSupport{j.at("lo").get<double>(), j.at("hi").get<double>()};
}

ojson config_json(const GenerationConfig& c) {
  ojson j;
  j["method"] = to_string(c.method);
  j["samples"] = c.samples;
  j["batches"] = c.batches;
  j["delta_p"] = c.delta_p;
  j["delta_q"] = c.delta_q;
  j["delta_pf"] = c.delta_pf;
  j["alpha_min"] = c.alpha_min;
  j["alpha_max"] = c.alpha_max;
  j["epsilon_fraction"] = c.epsilon_fraction;
  j["eta"] = c.eta ? ojson(*c.eta) : ojson(nullptr);
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["target_k"] = c.target_k ? ojson(*c.target_k) : ojson(nullptr);
  j["slack_penalty"] = c.slack_penalty ? ojson(*c.slack_penalty) : ojson(nullptr);
  j["solver"] = {{"tolerance", c.solver.tolerance},
                 {"max_iterations", c.solver.max_iterations},
                 {"initial_barrier", c.solver.initial_barrier},
                 {"cost_scale", c.solver.cost_scale}};
  return j;
}

GenerationConfig config_from(const nlohmann::json& j) {
  GenerationConfig c;
  c.method = method_from_string(j.at("method").get<std::string>());
  c.samples = j.at("samples").get<int>();
  c.batches = j.at("batches").get<int>();
  c.delta_p = j.at("delta_p").get<double>();
  c.delta_q = j.at("delta_q").get<double>();
  c.delta_pf = j.at("delta_pf").get<double>();
  c.alpha_min = j.at("alpha_min").get<double>();
  c.alpha_max = j.at("alpha_max").get<double>();
  c.epsilon_fraction = j.at("epsilon_fraction").get<double>();
  if (!j.at("eta").is_null()) c.eta = j.at("eta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.workers = j.at("workers").get<int>();
  if (!j.at("target_k").is_null()) c.target_k = j.at("target_k").get<long>();
  if (!j.at("slack_penalty").is_null()) c.slack_penalty = j.at("slack_penalty").get<double>();
  const auto& s = j.at("solver");
  c.solver.tolerance = s.at("tolerance").get<double>();
  c.solver.max_iterations = s.at("max_iterations").get<int>();
  c.solver.initial_barrier = s.at("initial_barrier").get<double>();
  c.solver.cost_scale = s.at("cost_scale").get<double>();
  return c;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError(p.filename().string() + ": cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string to_json_line(const InstanceRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["batch"] = r.batch;
  j["p_tot_target"] = r.p_tot_target;
  j["setpoint"] = {{"p", vec(r.p_hat)}, {"q", vec(r.q_hat)}};
  j["realized"] = {{"p", vec(r.pd)}, {"q", vec(r.qd)}};
  j["vm"] = vec(r.vm);
  j["va"] = vec(r.va);
  j["pg"] = vec(r.pg);
  j["qg"] = vec(r.qg);
  j["slacks"] = {{"p_up", vec(r.slack_p_up)}, {"p_dw", vec(r.slack_p_dw)},
                 {"q_up", vec(r.slack_q_up)}, {"q_dw", vec(r.slack_q_dw)}};
  j["objective"] = r.objective;
  j["solver"] = {{"status", to_string(r.status)}, {"iterations", r.iterations}, {"kkt_residual", r.kkt_residual}};
  return j.dump();
}

InstanceRecord record_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  InstanceRecord r;
  r.id = j.at("id").get<long>();
  r.batch = j.at("batch").get<int>();
  r.p_tot_target = j.at("p_tot_target").get<double>();
  r.p_hat = to_vec(j.at("setpoint").at("p"));
  r.q_hat = to_vec(j.at("setpoint").at("q"));
  r.pd = to_vec(j.at("realized").at("p"));
  r.qd = to_vec(j.at("realized").at("q"));
  r.vm = to_vec(j.at("vm"));
  r.va = to_vec(j.at("va"));
  r.pg = to_vec(j.at("pg"));
  r.qg = to_vec(j.at("qg"));
  const auto& s = j.at("slacks");
  r.slack_p_up = to_vec(s.at("p_up"));
  r.slack_p_dw = to_vec(s.at("p_dw"));
  r.slack_q_up = to_vec(s.at("q_up"));
  r.slack_q_dw = to_vec(s.at("q_dw"));
  r.objective = j.at("objective").get<double>();
  const auto& sv = j.at("solver");
  r.status = solve_status_from_string(sv.at("status").get<std::string>());
  r.iterations = sv.at("iterations").get<int>();
  r.kkt_residual = sv.at("kkt_residual").get<double>();
  return r;
}

std::string meta_json(const DatasetMeta& m) {
  ojson j;
  j["format_version"] = m.format_version;
  j["case_name"] = m.case_name;
  j["base_mva"] = m.base_mva;
  j["network_fingerprint"] = m.network_fingerprint;
  j["config"] = config_json(m.config);
  j["support"] = support_json(m.support);
  j["truncated_support"] = support_json(m.truncated_support);
  j["epsilon"] = m.epsilon;
  j["slack_penalty"] = m.slack_penalty;
  j["angle_limits_defaulted"] = m.angle_limits_defaulted;
  j["K"] = m.instances;
  j["attempted"] = m.attempted;
  j["created_at"] = m.created_at;
  j["records_hash"] = m.records_hash;
  ojson sched = ojson::array();
  for (const BatchSchedule& b : m.schedule) sched.push_back({{"batch", b.batch}, {"targets", b.targets}});
  j["schedule"] = sched;
  return j.dump(2) + "\n";
}

DatasetMeta meta_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DatasetMeta m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kFormatVersion)
    throw LoadError("meta.json: unsupported format_version " + std::to_string(m.format_version));
  m.case_name = j.at("case_name").get<std::string>();
  m.base_mva = j.at("base_mva").get<double>();
  m.network_fingerprint = j.at("network_fingerprint").get<std::string>();
  m.config = config_from(j.at("config"));
  m.support = support_from(j.at("support"));
  m.truncated_support = support_from(j.at("truncated_support"));
  m.epsilon = j.at("epsilon").get<double>();
  m.slack_penalty = j.at("slack_penalty").get<double>();
  m.angle_limits_defaulted = j.at("angle_limits_defaulted").get<int>();
  m.instances = j.at("K").get<long>();
  m.attempted = j.at("attempted").get<long>();
  m.created_at = j.at("created_at").get<std::string>();
  m.records_hash = j.at("records_hash").get<std::string>();
  for (const auto& b : j.at("schedule"))
    m.schedule.push_back({b.at("batch").get<int>(), b.at("targets").get<std::vector<double>>()});
  return m;
}

DatasetWriter::DatasetWriter(const fs::path& dir, const Network& net) : dir_(dir), hash_(fnv1a("")) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create dataset directory " + dir.string() + ": " + ec.message());
  write_case(net, dir / "case.m");
  records_.open(dir / "instances.jsonl", std::ios::binary | std::ios::trunc);
  failures_.open(dir / "failures.jsonl", std::ios::binary | std::ios::trunc);
  if (!records_ || !failures_) throw Error("cannot write dataset files in " + dir.string());
  fs::remove(dir / "meta.json", ec);
}

long DatasetWriter::append_instance(const OpfProblem& prob, const OpfSolution& sol, int batch) {
  if (!is_feasible(sol, prob)) throw PreconditionError("only feasible solutions are persisted");
  InstanceRecord r;
  r.id = next_id_;
  r.batch = batch;
  r.p_tot_target = prob.setpoint.p_tot_target;
  r.p_hat = prob.setpoint.p_hat;
  r.q_hat = prob.setpoint.q_hat;
  r.pd = sol.pd;
  r.qd = sol.qd;
  r.vm = sol.vm;
  r.va = sol.va;
  r.pg = sol.pg;
  r.qg = sol.qg;
  r.slack_p_up = sol.slack_p_up;
  r.slack_p_dw = sol.slack_p_dw;
  r.slack_q_up = sol.slack_q_up;
  r.slack_q_dw = sol.slack_q_dw;
  r.objective = sol.objective;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.kkt_residual = sol.kkt_residual;
  const std::string line = to_json_line(r) + "\n";
  records_ << line;
  if (!records_) throw Error("write failed on " + (dir_ / "instances.jsonl").string());
  hash_ = fnv1a(line, hash_);
  return next_id_++;
}

void DatasetWriter::append_failure(const FailureRecord& f) {
  ojson j;
  j["batch"] = f.batch;
  j["index"] = f.index;
  j["p_tot_target"] = f.p_tot_target;
  j["status"] = f.status;
  failures_ << j.dump() << "\n";
}

DatasetHandle DatasetWriter::finish(DatasetMeta meta) {
  records_.flush();
  failures_.flush();
  meta.instances = next_id_;
  meta.records_hash = fnv1a_hex(hash_);
  if (meta.created_at.empty()) meta.created_at = utc_now();
  std::ofstream out(dir_ / "meta.json", std::ios::binary | std::ios::trunc);
  out << meta_json(meta);
  if (!out) throw Error("cannot write " + (dir_ / "meta.json").string());
  return {dir_, meta};
}

LoadedDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("dataset directory not found: " + dir.string());
  LoadedDataset ds;
  ds.handle.dir = dir;
  try {
    ds.handle.meta = meta_from_json(read_file(dir / "meta.json"));
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError("meta.json: " + std::string(e.what()));
  }
  try {
    ds.net = parse_case(dir / "case.m");
  } catch (const std::exception& e) {
    throw LoadError("case.m: " + std::string(e.what()));
  }
  if (fingerprint(ds.net) != ds.handle.meta.network_fingerprint)
    throw LoadError("case.m: network does not match the fingerprint in meta.json");

  const std::string text = read_file(dir / "instances.jsonl");
  if (fnv1a_hex(fnv1a(text)) != ds.handle.meta.records_hash)
    throw LoadError("instances.jsonl: content does not match records_hash in meta.json");
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      ds.records.push_back(record_from_json_line(line));
    } catch (const std::exception& e) {
      throw LoadError("instances.jsonl line " + std::to_string(n) + ": " + e.what());
    }
    if (ds.records.back().id != static_cast<long>(ds.records.size()) - 1)
      throw LoadError("instances.jsonl line " + std::to_string(n) + ": ids are not dense");
  }
  if (static_cast<long>(ds.records.size()) != ds.handle.meta.instances)
    throw LoadError("instances.jsonl: " + std::to_string(ds.records.size()) + " records but meta.json says K = " +
                    std::to_string(ds.handle.meta.instances));

  if (fs::exists(dir / "failures.jsonl")) {
    std::istringstream fin(read_file(dir / "failures.jsonl"));
    n = 0;
    while (std::getline(fin, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        ds.failures.push_back({j.at("batch").get<int>(), j.at("index").get<long>(),
                               j.at("p_tot_target").get<double>(), j.at("status").get<std::string>()});
      } catch (const std::exception& e) {
        throw LoadError("failures.jsonl line " + std::to_string(n) + ": " + e.what());
      }
    }
  }
  return ds;
}

DatasetMatrices dataset_matrices(const LoadedDataset& ds, const Network& net) {
  DatasetMatrices m = empty_matrices(net);
  const auto k = static_cast<Index>(ds.records.size());
  const auto nb = static_cast<Index>(net.buses.size());
  const auto ng = static_cast<Index>(net.generators.size());
  const auto nd = static_cast<Index>(net.loads.size());
  const Index nl = m.s_max.size();
  m.pg.values.resize(k, ng);
  m.qg.values.resize(k, ng);
  m.vm.values.resize(k, nb);
  m.va.values.resize(k, nb);
  m.pd.resize(k, nd);
  m.qd.resize(k, nd);
  m.s_from.resize(k, nl);
  m.s_to.resize(k, nl);
  const std::vector<BranchEnd> ends = branch_admittances(net);
  for (Index i = 0; i < k; ++i) {
    const InstanceRecord& r = ds.records[static_cast<std::size_t>(i)];
    if (r.pg.size() != ng || r.qg.size() != ng || r.vm.size() != nb || r.va.size() != nb || r.pd.size() != nd ||
        r.qd.size() != nd)
      throw SchemaError("record " + std::to_string(r.id) + " does not match the network dimensions");
    m.pg.values.row(i) = r.pg.transpose();
    m.qg.values.row(i) = r.qg.transpose();
    m.vm.values.row(i) = r.vm.transpose();
    m.va.values.row(i) = r.va.transpose();
    m.pd.row(i) = r.pd.transpose();
    m.qd.row(i) = r.qd.transpose();
    for (Index c = 0; c < nl; ++c) {
      const auto b = static_cast<std::size_t>(m.limited_branches[static_cast<std::size_t>(c)]);
      m.s_from(i, c) = net.base_mva * std::abs(end_flow(ends[2 * b], r.vm, r.va));
      m.s_to(i, c) = net.base_mva * std::abs(end_flow(ends[2 * b + 1], r.vm, r.va));
    }
  }
  return m;
}

ValidationReport audit_record(const LoadedDataset& ds, const InstanceRecord& r) {
  const DatasetMeta& meta = ds.handle.meta;
  const GenerationConfig& c = meta.config;
  LoadPolytope space = c.method == Method::mx
                           ? slice(build_load_polytope(ds.net, c.delta_p, c.delta_q, c.delta_pf, c.alpha_min, c.alpha_max),
                                   r.p_tot_target, meta.epsilon)
                           : build_box_space(ds.net, c.delta_p, c.delta_q);
  LoadSetpoint sp{r.p_hat, r.q_hat, r.p_tot_target, meta.epsilon};
  const OpfProblem prob = build_problem(ds.net, sp, space, meta.slack_penalty);
  OpfSolution sol;
  sol.vm = r.vm;
  sol.va = r.va;
  sol.pg = r.pg;
  sol.qg = r.qg;
  sol.pd = r.pd;
  sol.qd = r.qd;
  sol.slack_p_up = r.slack_p_up;
  sol.slack_p_dw = r.slack_p_dw;
  sol.slack_q_up = r.slack_q_up;
  sol.slack_q_dw = r.slack_q_dw;
  sol.objective = r.objective;
  sol.status = r.status;
  return validate(sol, ds.net, prob);
}

namespace {

void write_csv(const fs::path& p, const std::string& prefix, const std::vector<int>& ids, const Eigen::MatrixXd& m) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << "id";
  for (int id : ids) out << "," << prefix << id;
  out << "\n";
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    out << i;
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", m(i, j));
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace

void export_csv(const LoadedDataset& ds, const fs::path& out) {
  fs::create_directories(out);
  const Network& net = ds.net;
  const DatasetMatrices m = dataset_matrices(ds, net);
  std::vector<int> gens, buses, loads, branches;
  for (const Generator& g : net.generators) gens.push_back(g.id);
  for (const Bus& b : net.buses) buses.push_back(b.id);
  for (const Load& d : net.loads) loads.push_back(d.id);
  for (Index b : m.limited_branches) branches.push_back(static_cast<int>(b) + 1);
  write_csv(out / "pg.csv", "pg_", gens, m.pg.values);
  write_csv(out / "qg.csv", "qg_", gens, m.qg.values);
  write_csv(out / "vm.csv", "vm_", buses, m.vm.values);
  write_csv(out / "va.csv", "va_", buses, m.va.values);
  write_csv(out / "pd.csv", "pd_", loads, m.pd);
  write_csv(out / "qd.csv", "qd_", loads, m.qd);
  write_csv(out / "sf.csv", "sf_", branches, m.s_from);
  write_csv(out / "st.csv", "st_", branches, m.s_to);
}

}  // namespace opfgen
