#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gnopt/errors.hpp"

namespace gnopt::acopf {

/// Parsed network data. Raw table values keep their MATPOWER units (MW,
/// MVAr, MVA, degrees) so a serialize/parse round trip is field-exact;
/// derived per-unit and radian quantities are computed from them during
/// parsing and admittance construction.
struct Bus {
  int id = 0;
  int type = 1;  // 1 PQ, 2 PV, 3 ref
  double pd_mw = 0, qd_mvar = 0;
  double gs_mw = 0, bs_mvar = 0;
  int area = 1;
  double vm = 1, va = 0;
  double base_kv = 0;
  int zone = 1;
  double vmax = 1.1, vmin = 0.9;  // p.u.
};

struct Gen {
  int bus_id = 0;
  double pg_mw = 0, qg_mvar = 0;
  double qmax_mvar = 0, qmin_mvar = 0;
  double vg = 1, mbase = 100;
  double pmax_mw = 0, pmin_mw = 0;
  double c2 = 0, c1 = 0, c0 = 0;  // polynomial cost on MW output
};

struct Branch {
  int from_id = 0, to_id = 0;
  double r = 0, x = 0, b = 0;
  double rate_a_mva = 0, rate_b_mva = 0, rate_c_mva = 0;  // 0 = unlimited
  double tap_ratio = 0;                                   // 0 = nominal
  double shift_deg = 0;
  double angmin_deg = 0, angmax_deg = 0;
  // derived: clamped angle-difference bounds in radians
  double ang_min_rad = 0, ang_max_rad = 0;
  // derived: pi-model admittance entries, filled by build_admittance
  double g_ff = 0, b_ff = 0, g_ft = 0, b_ft = 0;
  double g_tf = 0, b_tf = 0, g_tt = 0, b_tt = 0;
};

struct NetworkModel {
  std::string name = "case";
  double base_mva = 100;
  std::vector<Bus> buses;
  std::vector<Gen> gens;
  std::vector<Branch> branches;

  // derived
  std::unordered_map<int, int> bus_index;
  int ref_bus = -1;  // index into buses
  bool admittance_built = false;
  std::vector<double> g_diag, b_diag;  // bus diagonal (branch self terms + shunts), p.u.

  int n_bus() const { return static_cast<int>(buses.size()); }
  int n_gen() const { return static_cast<int>(gens.size()); }
  int n_branch() const { return static_cast<int>(branches.size()); }
  int index_of(int bus_id) const;
};

/// Parses a MATPOWER case function body (mpc.version '2'; column layout per
/// the published data dictionary: bus 13, gen >= 10, branch 13, gencost
/// 4+n polynomial). Out-of-service branches and generators are dropped;
/// piecewise-linear costs and degree > 2 polynomials are rejected.
NetworkModel parse_matpower(const std::string& source);

/// Standard pi-branch model with tap ratio, phase shift, line charging, and
/// bus shunts. Fills the per-branch entries and the bus diagonal.
/// Branches with r = x = 0 are rejected.
void build_admittance(NetworkModel& model);

/// Canonical case text; parse(serialize(m)) reproduces m field-exactly.
std::string serialize_matpower(const NetworkModel& model);

}  // namespace gnopt::acopf
