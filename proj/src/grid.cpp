#include "opfgen/grid.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>

#include "opfgen/errors.hpp"

namespace opfgen {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Row {
  std::vector<double> values;
  int line = 0;
};

struct Table {
  std::vector<Row> rows;
  int line = 0;  // line of the opening bracket
};

struct RawCase {
  std::string name;
  std::optional<double> base_mva;
  int base_line = 0;
  std::map<std::string, Table> tables;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_quote = !in_quote;
    if (!in_quote && (line[i] == '%' || line[i] == '#')) return line.substr(0, i);
  }
  return line;
}

double parse_number(const std::string& tok, int line) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw ParseError("malformed table entry '" + tok + "'", line);
  return v;
}

// Splits the contents of a matrix literal segment into numbers; ';' closes a row.
void consume_matrix_text(const std::string& text, int line, Table& table, Row& pending) {
  std::string tok;
  auto flush = [&] {
    if (!tok.empty()) {
      pending.values.push_back(parse_number(tok, line));
      if (pending.line == 0) pending.line = line;
      tok.clear();
    }
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      flush();
    } else if (c == ';') {
      flush();
      if (!pending.values.empty()) table.rows.push_back(std::move(pending));
      pending = Row{};
    } else {
      tok.push_back(c);
    }
  }
  flush();
}

RawCase read_raw(const std::string& text, const std::string& fallback_name) {
  RawCase raw;
  raw.name = fallback_name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string open_table;  // name of the matrix being read, empty otherwise
  bool in_cell = false;
  Row pending;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (in_cell) {
      if (body.find('}') != std::string::npos) in_cell = false;
      continue;
    }
    if (!open_table.empty()) {
      const auto close = body.find(']');
      Table& table = raw.tables[open_table];
      consume_matrix_text(body.substr(0, close), lineno, table, pending);
      if (close == std::string::npos) {
        // A newline also terminates a row.
        if (!pending.values.empty()) table.rows.push_back(std::move(pending));
        pending = Row{};
      } else {
        if (!pending.values.empty()) table.rows.push_back(std::move(pending));
        pending = Row{};
        open_table.clear();
      }
      continue;
    }
    if (body.rfind("function", 0) == 0) {
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        const std::string name = trim(body.substr(eq + 1));
        if (!name.empty()) raw.name = name;
      }
      continue;
    }
    if (body.rfind("mpc.", 0) != 0) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected assignment", lineno);
    const std::string key = trim(body.substr(4, eq - 4));
    std::string rhs = trim(body.substr(eq + 1));
    if (!rhs.empty() && rhs.front() == '{') {
      in_cell = rhs.find('}') == std::string::npos;
      continue;
    }
    if (!rhs.empty() && rhs.front() == '[') {
      Table& table = raw.tables[key];
      table.rows.clear();
      table.line = lineno;
      rhs = rhs.substr(1);
      const auto close = rhs.find(']');
      consume_matrix_text(rhs.substr(0, close), lineno, table, pending);
      if (!pending.values.empty()) table.rows.push_back(std::move(pending));
      pending = Row{};
      if (close == std::string::npos) open_table = key;
      continue;
    }
    if (key == "baseMVA") {
      if (!rhs.empty() && rhs.back() == ';') rhs.pop_back();
      raw.base_mva = parse_number(trim(rhs), lineno);
      raw.base_line = lineno;
    }
  }
  if (!open_table.empty()) throw ParseError("unterminated matrix mpc." + open_table, lineno);
  return raw;
}

const Table& require_table(const RawCase& raw, const std::string& name, std::size_t min_cols) {
  const auto it = raw.tables.find(name);
  if (it == raw.tables.end()) throw ParseError("missing table mpc." + name, 0);
  const Table& t = it->second;
  if (t.rows.empty()) throw ParseError("empty table mpc." + name, t.line);
  const std::size_t width = t.rows.front().values.size();
  for (const Row& r : t.rows) {
    if (r.values.size() != width)
      throw ParseError("row of mpc." + name + " has " + std::to_string(r.values.size()) +
                           " columns, expected " + std::to_string(width),
                       r.line);
    if (r.values.size() < min_cols)
      throw ParseError("mpc." + name + " needs at least " + std::to_string(min_cols) + " columns",
                       r.line);
  }
  return t;
}

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int Network::reference_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].is_reference) return static_cast<int>(i);
  throw ValidationError("network has no reference bus");
}

int Network::index_of(int bus_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  throw ValidationError("unknown bus id " + std::to_string(bus_id));
}

int Network::angle_limits_defaulted() const {
  return static_cast<int>(std::count_if(branches.begin(), branches.end(),
                                        [](const Branch& br) { return br.angle_defaulted; }));
}

void finalize(Network& net) {
  if (!(net.base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
  if (net.buses.empty()) throw ValidationError("network has no buses");

  std::map<int, int> index;
  int refs = 0;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    if (!index.emplace(b.id, static_cast<int>(i)).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (!(b.v_min > 0.0) || b.v_min > b.v_max)
      throw ValidationError("bus " + std::to_string(b.id) + " has invalid voltage bounds");
    refs += b.is_reference ? 1 : 0;
  }
  if (refs != 1)
    throw ValidationError("expected exactly one reference bus, found " + std::to_string(refs));

  auto lookup = [&](int id, const char* what) {
    const auto it = index.find(id);
    if (it == index.end())
      throw ValidationError(std::string(what) + " references unknown bus " + std::to_string(id));
    return it->second;
  };

  net.gen_bus.clear();
  for (const Generator& g : net.generators) {
    if (g.p_min > g.p_max || g.q_min > g.q_max)
      throw ValidationError("generator " + std::to_string(g.id) + " has inverted limits");
    if (g.c2 < 0.0)
      throw ValidationError("generator " + std::to_string(g.id) + " has negative quadratic cost");
    net.gen_bus.push_back(lookup(g.bus, "generator"));
  }
  net.load_bus.clear();
  for (const Load& d : net.loads) net.load_bus.push_back(lookup(d.bus, "load"));

  net.branch_from.clear();
  net.branch_to.clear();
  const int nb = static_cast<int>(net.buses.size());
  std::vector<std::vector<int>> adj(nb);
  for (const Branch& br : net.branches) {
    const int f = lookup(br.from, "branch");
    const int t = lookup(br.to, "branch");
    if (br.r == 0.0 && br.x == 0.0)
      throw ValidationError("zero-impedance branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to));
    if (br.theta_min > br.theta_max)
      throw ValidationError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                            " has inverted angle limits");
    if (!(br.s_max > 0.0))
      throw ValidationError("branch thermal limit must be positive");
    net.branch_from.push_back(f);
    net.branch_to.push_back(t);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }

  std::vector<char> seen(nb, 0);
  std::queue<int> todo;
  todo.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!todo.empty()) {
    const int u = todo.front();
    todo.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        todo.push(v);
      }
  }
  if (reached != nb) throw ValidationError("network is not a single connected island");
}

Network parse_case_text(const std::string& text, const std::string& case_name) {
  const RawCase raw = read_raw(text, case_name);
  if (!raw.base_mva) throw ParseError("missing mpc.baseMVA", 0);

  const Table& bus_t = require_table(raw, "bus", 13);
  const Table& gen_t = require_table(raw, "gen", 10);
  const Table& br_t = require_table(raw, "branch", 11);
  const Table& cost_t = require_table(raw, "gencost", 4);

  Network net;
  net.case_name = raw.name;
  net.base_mva = *raw.base_mva;
  if (!(net.base_mva > 0.0)) throw ParseError("baseMVA must be positive", raw.base_line);

  std::map<int, bool> kept;  // bus id -> in service
  for (const Row& r : bus_t.rows) {
    const auto& v = r.values;
    const int id = static_cast<int>(v[0]);
    const int type = static_cast<int>(v[1]);
    kept[id] = type != 4;
    if (type == 4) continue;
    Bus b;
    b.id = id;
    b.is_reference = type == 3;
    b.shunt_g = v[4] / net.base_mva;
    b.shunt_b = v[5] / net.base_mva;
    b.v_max = v[11];
    b.v_min = v[12];
    net.buses.push_back(b);
    if (v[2] != 0.0 || v[3] != 0.0) {
      Load d;
      d.id = static_cast<int>(net.loads.size());
      d.bus = id;
      d.p_nom = v[2];
      d.q_nom = v[3];
      net.loads.push_back(d);
    }
  }
  auto bus_alive = [&](int id) {
    const auto it = kept.find(id);
    return it != kept.end() && it->second;
  };

  if (cost_t.rows.size() < gen_t.rows.size())
    throw ParseError("mpc.gencost has fewer rows than mpc.gen", cost_t.line);
  for (std::size_t i = 0; i < gen_t.rows.size(); ++i) {
    const auto& v = gen_t.rows[i].values;
    const Row& cost_row = cost_t.rows[i];
    const auto& c = cost_row.values;
    if (v[7] <= 0.0 || !bus_alive(static_cast<int>(v[0]))) continue;
    Generator g;
    g.id = static_cast<int>(net.generators.size());
    g.bus = static_cast<int>(v[0]);
    g.q_max = v[3];
    g.q_min = v[4];
    g.p_max = v[8];
    g.p_min = v[9];

    const int model = static_cast<int>(c[0]);
    if (model == 1) throw UnsupportedFeature("piecewise-linear generator costs are not supported");
    if (model != 2) throw ParseError("unknown cost model " + std::to_string(model), cost_row.line);
    const int n = static_cast<int>(c[3]);
    if (n < 0 || c.size() < static_cast<std::size_t>(4 + n))
      throw ParseError("gencost row shorter than its coefficient count", cost_row.line);
    std::vector<double> coef(c.begin() + 4, c.begin() + 4 + n);  // high to low
    while (coef.size() > 3 && coef.front() == 0.0) coef.erase(coef.begin());
    if (coef.size() > 3)
      throw UnsupportedFeature("polynomial cost of degree " + std::to_string(coef.size() - 1) +
                               " (line " + std::to_string(cost_row.line) + ")");
    while (coef.size() < 3) coef.insert(coef.begin(), 0.0);
    g.c2 = coef[0];
    g.c1 = coef[1];
    g.c0 = coef[2];
    net.generators.push_back(g);
  }

  for (const Row& r : br_t.rows) {
    const auto& v = r.values;
    if (v[10] <= 0.0) continue;
    Branch br;
    br.from = static_cast<int>(v[0]);
    br.to = static_cast<int>(v[1]);
    if (!bus_alive(br.from) || !bus_alive(br.to)) continue;
    br.r = v[2];
    br.x = v[3];
    br.b_charge = v[4];
    br.s_max = v[5] == 0.0 ? kInf : v[5];
    br.tap = v[8] == 0.0 ? 1.0 : v[8];
    br.shift = v[9] * kDegToRad;
    const bool has_angles = v.size() >= 13 && !(v[11] == 0.0 && v[12] == 0.0);
    if (has_angles) {
      br.theta_min = v[11] <= -360.0 ? -kInf : v[11] * kDegToRad;
      br.theta_max = v[12] >= 360.0 ? kInf : v[12] * kDegToRad;
    } else {
      br.theta_min = -kDefaultAngleLimit;
      br.theta_max = kDefaultAngleLimit;
      br.angle_defaulted = true;
    }
    net.branches.push_back(br);
  }

  finalize(net);
  return net;
}

Network parse_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case_text(ss.str(), path.stem().string());
}

void write_case(const Network& net, std::ostream& out) {
  out << "function mpc = " << net.case_name << "\n\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << fmt_num(net.base_mva) << ";\n\n";

  std::vector<double> pd(net.buses.size(), 0.0), qd(net.buses.size(), 0.0);
  std::vector<char> has_gen(net.buses.size(), 0);
  for (std::size_t k = 0; k < net.loads.size(); ++k) {
    pd[net.load_bus[k]] += net.loads[k].p_nom;
    qd[net.load_bus[k]] += net.loads[k].q_nom;
  }
  for (int b : net.gen_bus) has_gen[b] = 1;

  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out << "mpc.bus = [\n";
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    const int type = b.is_reference ? 3 : (has_gen[i] ? 2 : 1);
    out << '\t' << b.id << '\t' << type << '\t' << fmt_num(pd[i]) << '\t' << fmt_num(qd[i]) << '\t'
        << fmt_num(b.shunt_g * net.base_mva) << '\t' << fmt_num(b.shunt_b * net.base_mva)
        << "\t1\t1\t0\t0\t1\t" << fmt_num(b.v_max) << '\t' << fmt_num(b.v_min) << ";\n";
  }
  out << "];\n\n";

  out << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out << "mpc.gen = [\n";
  for (const Generator& g : net.generators)
    out << '\t' << g.bus << "\t0\t0\t" << fmt_num(g.q_max) << '\t' << fmt_num(g.q_min) << "\t1\t"
        << fmt_num(net.base_mva) << "\t1\t" << fmt_num(g.p_max) << '\t' << fmt_num(g.p_min)
        << ";\n";
  out << "];\n\n";

  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  out << "mpc.branch = [\n";
  for (const Branch& br : net.branches) {
    const double rate = br.has_flow_limit() ? br.s_max : 0.0;
    double amin = 0.0, amax = 0.0;
    if (!br.angle_defaulted) {
      amin = std::isfinite(br.theta_min) ? br.theta_min / kDegToRad : -360.0;
      amax = std::isfinite(br.theta_max) ? br.theta_max / kDegToRad : 360.0;
    }
    out << '\t' << br.from << '\t' << br.to << '\t' << fmt_num(br.r) << '\t' << fmt_num(br.x)
        << '\t' << fmt_num(br.b_charge) << '\t' << fmt_num(rate) << '\t' << fmt_num(rate) << '\t'
        << fmt_num(rate) << '\t' << fmt_num(br.tap == 1.0 ? 0.0 : br.tap) << '\t'
        << fmt_num(br.shift / kDegToRad) << "\t1\t" << fmt_num(amin) << '\t' << fmt_num(amax)
        << ";\n";
  }
  out << "];\n\n";

  out << "%\tmodel\tstartup\tshutdown\tn\tc2\tc1\tc0\n";
  out << "mpc.gencost = [\n";
  for (const Generator& g : net.generators)
    out << "\t2\t0\t0\t3\t" << fmt_num(g.c2) << '\t' << fmt_num(g.c1) << '\t' << fmt_num(g.c0)
        << ";\n";
  out << "];\n";
}

void write_case(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write case file " + path.string());
  write_case(net, out);
}

std::string case_text(const Network& net) {
  std::ostringstream ss;
  write_case(net, ss);
  return ss.str();
}

std::string fingerprint(const Network& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : case_text(net)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<BranchEnd> branch_admittances(const Network& net) {
  std::vector<BranchEnd> ends;
  ends.reserve(2 * net.branches.size());
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (br.r == 0.0 && br.x == 0.0)
      throw ValidationError("zero-impedance branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to));
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> ytt = ys + std::complex<double>(0.0, br.b_charge / 2.0);
    const std::complex<double> tap = std::polar(br.tap, br.shift);
    const std::complex<double> yff = ytt / (br.tap * br.tap);
    const std::complex<double> yft = -ys / std::conj(tap);
    const std::complex<double> ytf = -ys / tap;
    const int f = net.branch_from[k];
    const int t = net.branch_to[k];
    ends.push_back({static_cast<int>(k), f, t, yff, yft, true});
    ends.push_back({static_cast<int>(k), t, f, ytt, ytf, false});
  }
  return ends;
}

SparseComplex build_ybus(const Network& net) {
  const int nb = static_cast<int>(net.buses.size());
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  for (const BranchEnd& e : branch_admittances(net)) {
    trip.emplace_back(e.bus, e.bus, e.y_self);
    trip.emplace_back(e.bus, e.other, e.y_mutual);
  }
  for (int i = 0; i < nb; ++i) {
    const Bus& b = net.buses[i];
    if (b.shunt_g != 0.0 || b.shunt_b != 0.0)
      trip.emplace_back(i, i, std::complex<double>(b.shunt_g, b.shunt_b));
  }
  SparseComplex y(nb, nb);
  y.setFromTriplets(trip.begin(), trip.end());
  return y;
}

Eigen::VectorXcd bus_injections(const SparseComplex& ybus, const Eigen::VectorXd& vm,
                                const Eigen::VectorXd& va) {
  Eigen::VectorXcd v(vm.size());
  for (Eigen::Index i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
  const Eigen::VectorXcd current = ybus * v;
  return v.cwiseProduct(current.conjugate());
}

}  // namespace opfgen
