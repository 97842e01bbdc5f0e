#include "gnopt/matpower.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>

namespace gnopt::acopf {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kAngleClamp = kPi / 2 - 1e-3;

struct Table {
  std::vector<std::vector<double>> rows;
  int first_line = 0;
};

// Extracts `mpc.<name> = [ ... ];` as rows of numbers. Tracks line numbers
// for error messages. Comments run from % to end of line.
Table read_table(const std::string& text, const std::string& name, bool required) {
  const std::string key = "mpc." + name;
  size_t pos = 0;
  while (true) {
    pos = text.find(key, pos);
    if (pos == std::string::npos) {
      if (required) throw ParseError("no " + key + " matrix");
      return {};
    }
    size_t j = pos + key.size();
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j < text.size() && text[j] == '=') break;
    pos += key.size();
  }
  const size_t open = text.find('[', pos);
  const size_t close = text.find(']', open);
  if (open == std::string::npos || close == std::string::npos)
    throw ParseError("unterminated " + key + " matrix");

  Table tab;
  tab.first_line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + open, '\n'));
  int line = tab.first_line;
  std::string body = text.substr(open + 1, close - open - 1);
  std::string row_buf;
  auto flush_row = [&](int at_line) {
    std::istringstream is(row_buf);
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    if (!is.eof()) throw ParseError("bad number in " + key, at_line);
    if (!row.empty()) tab.rows.push_back(std::move(row));
    row_buf.clear();
  };
  bool in_comment = false;
  for (char c : body) {
    if (c == '\n') {
      ++line;
      in_comment = false;
      row_buf += ' ';
      continue;
    }
    if (in_comment) continue;
    if (c == '%') {
      in_comment = true;
      continue;
    }
    if (c == ';') {
      flush_row(line);
      continue;
    }
    row_buf += c;
  }
  flush_row(line);
  return tab;
}

double field(const std::vector<double>& row, size_t i, double fallback = 0.0) {
  return i < row.size() ? row[i] : fallback;
}

void check_cols(const Table& t, size_t need, const std::string& what) {
  int line = t.first_line;
  for (const auto& row : t.rows) {
    ++line;
    if (row.size() < need)
      throw ParseError(what + " row has " + std::to_string(row.size()) + " columns, needs " +
                           std::to_string(need),
                       line);
  }
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int NetworkModel::index_of(int bus_id) const {
  auto it = bus_index.find(bus_id);
  if (it == bus_index.end()) throw Error("unknown bus id " + std::to_string(bus_id));
  return it->second;
}

NetworkModel parse_matpower(const std::string& source) {
  NetworkModel m;
  {
    const size_t fn = source.find("function mpc =");
    if (fn != std::string::npos) {
      std::istringstream is(source.substr(fn + 14));
      is >> m.name;
    }
    const size_t bp = source.find("mpc.baseMVA");
    if (bp == std::string::npos) throw ParseError("no mpc.baseMVA");
    const size_t eq = source.find('=', bp);
    m.base_mva = std::strtod(source.c_str() + eq + 1, nullptr);
    if (!(m.base_mva > 0)) throw ParseError("baseMVA must be positive");
  }

  const Table bus = read_table(source, "bus", true);
  check_cols(bus, 13, "bus");
  int line = bus.first_line;
  for (const auto& r : bus.rows) {
    ++line;
    Bus b;
    b.id = static_cast<int>(r[0]);
    b.type = static_cast<int>(r[1]);
    if (b.type == 4) throw ParseError("isolated bus (type 4) unsupported", line);
    if (b.type < 1 || b.type > 3) throw ParseError("unknown bus type", line);
    b.pd_mw = r[2];
    b.qd_mvar = r[3];
    b.gs_mw = r[4];
    b.bs_mvar = r[5];
    b.area = static_cast<int>(r[6]);
    b.vm = r[7];
    b.va = r[8];
    b.base_kv = r[9];
    b.zone = static_cast<int>(r[10]);
    b.vmax = r[11];
    b.vmin = r[12];
    if (b.vmin > b.vmax) throw ParseError("Vmin > Vmax at bus " + std::to_string(b.id), line);
    if (m.bus_index.count(b.id)) throw ParseError("duplicate bus id", line);
    m.bus_index[b.id] = static_cast<int>(m.buses.size());
    if (b.type == 3 && m.ref_bus < 0) m.ref_bus = static_cast<int>(m.buses.size());
    m.buses.push_back(b);
  }
  if (m.ref_bus < 0) throw ParseError("no reference bus (type 3)");

  const Table gen = read_table(source, "gen", true);
  check_cols(gen, 10, "gen");
  std::vector<int> live_gen_rows;
  line = gen.first_line;
  {
    int idx = 0;
    for (const auto& r : gen.rows) {
      ++line;
      ++idx;
      const int status = static_cast<int>(field(r, 7, 1));
      if (status == 0) continue;
      Gen g;
      g.bus_id = static_cast<int>(r[0]);
      if (!m.bus_index.count(g.bus_id))
        throw ParseError("generator references unknown bus " + std::to_string(g.bus_id), line);
      g.pg_mw = r[1];
      g.qg_mvar = r[2];
      g.qmax_mvar = r[3];
      g.qmin_mvar = r[4];
      g.vg = r[5];
      g.mbase = r[6];
      g.pmax_mw = r[8];
      g.pmin_mw = r[9];
      if (g.pmin_mw > g.pmax_mw) throw ParseError("Pmin > Pmax", line);
      if (g.qmin_mvar > g.qmax_mvar) throw ParseError("Qmin > Qmax", line);
      live_gen_rows.push_back(idx - 1);
      m.gens.push_back(g);
    }
  }

  const Table cost = read_table(source, "gencost", true);
  check_cols(cost, 4, "gencost");
  if (cost.rows.size() != gen.rows.size())
    throw ParseError("gencost rows (" + std::to_string(cost.rows.size()) +
                     ") do not match generator rows (" + std::to_string(gen.rows.size()) +
                     "); reactive-power cost tables are unsupported");
  line = cost.first_line;
  for (size_t k = 0; k < live_gen_rows.size(); ++k) {
    const auto& r = cost.rows[static_cast<size_t>(live_gen_rows[k])];
    const int at = cost.first_line + live_gen_rows[k] + 1;
    const int model = static_cast<int>(r[0]);
    if (model == 1) throw ParseError("piecewise-linear gencost (model 1) unsupported", at);
    if (model != 2) throw ParseError("unknown gencost model", at);
    const int n = static_cast<int>(r[3]);
    if (n < 1 || n > 3)
      throw ParseError("polynomial gencost must have degree <= 2 (n <= 3)", at);
    if (r.size() < 4 + static_cast<size_t>(n)) throw ParseError("short gencost row", at);
    Gen& g = m.gens[k];
    if (n == 3) {
      g.c2 = r[4];
      g.c1 = r[5];
      g.c0 = r[6];
    } else if (n == 2) {
      g.c1 = r[4];
      g.c0 = r[5];
    } else {
      g.c0 = r[4];
    }
    if (g.c2 < 0) throw ParseError("concave generation cost (c2 < 0)", at);
  }

  const Table br = read_table(source, "branch", true);
  check_cols(br, 13, "branch");
  line = br.first_line;
  for (const auto& r : br.rows) {
    ++line;
    if (static_cast<int>(r[10]) == 0) continue;  // out of service
    Branch b;
    b.from_id = static_cast<int>(r[0]);
    b.to_id = static_cast<int>(r[1]);
    if (!m.bus_index.count(b.from_id) || !m.bus_index.count(b.to_id))
      throw ParseError("branch references unknown bus", line);
    b.r = r[2];
    b.x = r[3];
    b.b = r[4];
    b.rate_a_mva = r[5];
    b.rate_b_mva = r[6];
    b.rate_c_mva = r[7];
    b.tap_ratio = r[8];
    b.shift_deg = r[9];
    b.angmin_deg = r[11];
    b.angmax_deg = r[12];
    // standing assumption: angle differences live strictly inside (-pi/2, pi/2)
    const auto clamp = [](double deg) {
      const double rad = deg * kPi / 180.0;
      return std::max(-kAngleClamp, std::min(kAngleClamp, rad));
    };
    b.ang_min_rad = clamp(b.angmin_deg);
    b.ang_max_rad = clamp(b.angmax_deg);
    if (b.angmin_deg == 0 && b.angmax_deg == 0) {  // MATPOWER convention: unconstrained
      b.ang_min_rad = -kAngleClamp;
      b.ang_max_rad = kAngleClamp;
    }
    if (b.ang_min_rad > b.ang_max_rad) throw ParseError("angmin > angmax", line);
    m.branches.push_back(b);
  }
  return m;
}

void build_admittance(NetworkModel& m) {
  m.g_diag.assign(m.buses.size(), 0.0);
  m.b_diag.assign(m.buses.size(), 0.0);
  for (size_t i = 0; i < m.buses.size(); ++i) {
    m.g_diag[i] = m.buses[i].gs_mw / m.base_mva;
    m.b_diag[i] = m.buses[i].bs_mvar / m.base_mva;
  }
  for (auto& br : m.branches) {
    if (br.r == 0.0 && br.x == 0.0)
      throw Error("zero-impedance branch " + std::to_string(br.from_id) + "-" +
                  std::to_string(br.to_id) + " unsupported");
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> chg(0.0, br.b / 2.0);
    const double tap = br.tap_ratio == 0.0 ? 1.0 : br.tap_ratio;
    const std::complex<double> t = std::polar(tap, br.shift_deg * kPi / 180.0);
    const std::complex<double> yff = (ys + chg) / (tap * tap);
    const std::complex<double> ytt = ys + chg;
    const std::complex<double> yft = -ys / std::conj(t);
    const std::complex<double> ytf = -ys / t;
    br.g_ff = yff.real();
    br.b_ff = yff.imag();
    br.g_ft = yft.real();
    br.b_ft = yft.imag();
    br.g_tf = ytf.real();
    br.b_tf = ytf.imag();
    br.g_tt = ytt.real();
    br.b_tt = ytt.imag();
    const int f = m.index_of(br.from_id);
    const int to = m.index_of(br.to_id);
    m.g_diag[f] += br.g_ff;
    m.b_diag[f] += br.b_ff;
    m.g_diag[to] += br.g_tt;
    m.b_diag[to] += br.b_tt;
  }
  m.admittance_built = true;
}

std::string serialize_matpower(const NetworkModel& m) {
  std::ostringstream os;
  os << "function mpc = " << m.name << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << num(m.base_mva) << ";\n\n";
  os << "mpc.bus = [\n";
  for (const auto& b : m.buses) {
    os << "\t" << b.id << "\t" << b.type << "\t" << num(b.pd_mw) << "\t" << num(b.qd_mvar)
       << "\t" << num(b.gs_mw) << "\t" << num(b.bs_mvar) << "\t" << b.area << "\t" << num(b.vm)
       << "\t" << num(b.va) << "\t" << num(b.base_kv) << "\t" << b.zone << "\t" << num(b.vmax)
       << "\t" << num(b.vmin) << ";\n";
  }
  os << "];\n\nmpc.gen = [\n";
  for (const auto& g : m.gens) {
    os << "\t" << g.bus_id << "\t" << num(g.pg_mw) << "\t" << num(g.qg_mvar) << "\t"
       << num(g.qmax_mvar) << "\t" << num(g.qmin_mvar) << "\t" << num(g.vg) << "\t"
       << num(g.mbase) << "\t1\t" << num(g.pmax_mw) << "\t" << num(g.pmin_mw)
       << "\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0;\n";
  }
  os << "];\n\nmpc.branch = [\n";
  for (const auto& b : m.branches) {
    os << "\t" << b.from_id << "\t" << b.to_id << "\t" << num(b.r) << "\t" << num(b.x) << "\t"
       << num(b.b) << "\t" << num(b.rate_a_mva) << "\t" << num(b.rate_b_mva) << "\t"
       << num(b.rate_c_mva) << "\t" << num(b.tap_ratio) << "\t" << num(b.shift_deg) << "\t1\t"
       << num(b.angmin_deg) << "\t" << num(b.angmax_deg) << ";\n";
  }
  os << "];\n\nmpc.gencost = [\n";
  for (const auto& g : m.gens)
    os << "\t2\t0\t0\t3\t" << num(g.c2) << "\t" << num(g.c1) << "\t" << num(g.c0) << ";\n";
  os << "];\n";
  return os.str();
}

}  // namespace gnopt::acopf
