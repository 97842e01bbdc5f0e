#include "gnopt/acopf.hpp"

#include <cmath>

namespace gnopt::acopf {

namespace {

struct Idx {
  int ng, nb, nl;
  int p0, q0, c0, coff0, soff0, th0, dim;
  explicit Idx(const NetworkModel& m)
      : ng(m.n_gen()), nb(m.n_bus()), nl(m.n_branch()) {
    p0 = 0;
    q0 = ng;
    c0 = 2 * ng;
    coff0 = 2 * ng + nb;
    soff0 = 2 * ng + nb + nl;
    th0 = 2 * ng + nb + 2 * nl;
    dim = th0 + nb;
  }
};

using Trip = Eigen::Triplet<double>;
using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

RowMat from_triplets(int rows, int cols, const std::vector<Trip>& trip) {
  RowMat m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

ConvexRegion build_region(const NetworkModel& m, const std::vector<int>* line_set) {
  if (!m.admittance_built) throw Error("build_problem requires build_admittance");
  const Idx ix(m);
  ConvexRegion region;

  // power balances (linear in the lifted variables) + reference pin
  {
    std::vector<Trip> trip;
    Eigen::VectorXd off = Eigen::VectorXd::Zero(2 * ix.nb + 1);
    for (int g = 0; g < ix.ng; ++g) {
      const int i = m.index_of(m.gens[g].bus_id);
      trip.emplace_back(i, ix.p0 + g, 1.0);
      trip.emplace_back(ix.nb + i, ix.q0 + g, 1.0);
    }
    for (int i = 0; i < ix.nb; ++i) {
      trip.emplace_back(i, ix.c0 + i, -m.g_diag[i]);
      trip.emplace_back(ix.nb + i, ix.c0 + i, m.b_diag[i]);
      off[i] = -m.buses[i].pd_mw / m.base_mva;
      off[ix.nb + i] = -m.buses[i].qd_mvar / m.base_mva;
    }
    for (int b = 0; b < ix.nl; ++b) {
      const auto& br = m.branches[b];
      const int f = m.index_of(br.from_id);
      const int t = m.index_of(br.to_id);
      trip.emplace_back(f, ix.coff0 + b, -br.g_ft);
      trip.emplace_back(f, ix.soff0 + b, br.b_ft);
      trip.emplace_back(t, ix.coff0 + b, -br.g_tf);
      trip.emplace_back(t, ix.soff0 + b, -br.b_tf);
      trip.emplace_back(ix.nb + f, ix.coff0 + b, br.b_ft);
      trip.emplace_back(ix.nb + f, ix.soff0 + b, br.g_ft);
      trip.emplace_back(ix.nb + t, ix.coff0 + b, br.b_tf);
      trip.emplace_back(ix.nb + t, ix.soff0 + b, -br.g_tf);
    }
    trip.emplace_back(2 * ix.nb, ix.th0 + m.ref_bus, 1.0);
    region.blocks.push_back(make_zero_block(from_triplets(2 * ix.nb + 1, ix.dim, trip), off));
  }

  // variable boxes + angle-difference boxes
  {
    const int rows = 2 * ix.ng + ix.nb + ix.nl;
    std::vector<Trip> trip;
    Eigen::VectorXd lo(rows), hi(rows);
    int at = 0;
    for (int g = 0; g < ix.ng; ++g, ++at) {
      trip.emplace_back(at, ix.p0 + g, 1.0);
      lo[at] = m.gens[g].pmin_mw / m.base_mva;
      hi[at] = m.gens[g].pmax_mw / m.base_mva;
    }
    for (int g = 0; g < ix.ng; ++g, ++at) {
      trip.emplace_back(at, ix.q0 + g, 1.0);
      lo[at] = m.gens[g].qmin_mvar / m.base_mva;
      hi[at] = m.gens[g].qmax_mvar / m.base_mva;
    }
    for (int i = 0; i < ix.nb; ++i, ++at) {
      trip.emplace_back(at, ix.c0 + i, 1.0);
      lo[at] = m.buses[i].vmin * m.buses[i].vmin;
      hi[at] = m.buses[i].vmax * m.buses[i].vmax;
      if (lo[at] > hi[at]) throw Error("infeasible voltage box at bus " + std::to_string(m.buses[i].id));
    }
    for (int b = 0; b < ix.nl; ++b, ++at) {
      const auto& br = m.branches[b];
      trip.emplace_back(at, ix.th0 + m.index_of(br.from_id), 1.0);
      trip.emplace_back(at, ix.th0 + m.index_of(br.to_id), -1.0);
      lo[at] = br.ang_min_rad;
      hi[at] = br.ang_max_rad;
    }
    region.blocks.push_back(make_box_block(from_triplets(rows, ix.dim, trip),
                                           Eigen::VectorXd::Zero(rows), lo, hi));
  }

  // flow-limit cones, from and to side, for the selected rated branches
  const auto want = [&](int b) {
    if (m.branches[b].rate_a_mva <= 0) return false;
    if (line_set == nullptr) return true;
    for (int s : *line_set)
      if (s == b) return true;
    return false;
  };
  for (int b = 0; b < ix.nl; ++b) {
    if (!want(b)) continue;
    const auto& br = m.branches[b];
    const int f = m.index_of(br.from_id);
    const int t = m.index_of(br.to_id);
    const double rate = br.rate_a_mva / m.base_mva;
    Eigen::VectorXd off = Eigen::VectorXd::Zero(3);
    off[0] = rate;
    {
      std::vector<Trip> trip;
      trip.emplace_back(1, ix.c0 + f, br.g_ff);
      trip.emplace_back(1, ix.coff0 + b, br.g_ft);
      trip.emplace_back(1, ix.soff0 + b, -br.b_ft);
      trip.emplace_back(2, ix.c0 + f, -br.b_ff);
      trip.emplace_back(2, ix.coff0 + b, -br.b_ft);
      trip.emplace_back(2, ix.soff0 + b, -br.g_ft);
      region.blocks.push_back(make_soc_block(from_triplets(3, ix.dim, trip), off));
    }
    {
      std::vector<Trip> trip;
      trip.emplace_back(1, ix.c0 + t, br.g_tt);
      trip.emplace_back(1, ix.coff0 + b, br.g_tf);
      trip.emplace_back(1, ix.soff0 + b, br.b_tf);
      trip.emplace_back(2, ix.c0 + t, -br.b_tt);
      trip.emplace_back(2, ix.coff0 + b, -br.b_tf);
      trip.emplace_back(2, ix.soff0 + b, br.g_tf);
      region.blocks.push_back(make_soc_block(from_triplets(3, ix.dim, trip), off));
    }
  }
  return region;
}

}  // namespace

VariableLayout opf_layout(const NetworkModel& m) {
  const Idx ix(m);
  VariableLayout lay;
  lay.slices = {{"p", ix.p0, ix.ng},        {"q", ix.q0, ix.ng},
                {"c_diag", ix.c0, ix.nb},   {"c_off", ix.coff0, ix.nl},
                {"s_off", ix.soff0, ix.nl}, {"theta", ix.th0, ix.nb}};
  return lay;
}

Eigen::VectorXd pack_point(const NetworkModel& m, const CsThetaPoint& pt) {
  const Idx ix(m);
  Eigen::VectorXd x(ix.dim);
  x.segment(ix.p0, ix.ng) = pt.p;
  x.segment(ix.q0, ix.ng) = pt.q;
  x.segment(ix.c0, ix.nb) = pt.c_diag;
  x.segment(ix.coff0, ix.nl) = pt.c_off;
  x.segment(ix.soff0, ix.nl) = pt.s_off;
  x.segment(ix.th0, ix.nb) = pt.theta;
  return x;
}

CsThetaPoint unpack_point(const NetworkModel& m, const Eigen::VectorXd& x) {
  const Idx ix(m);
  if (x.size() != ix.dim) throw Error("unpack_point: dimension mismatch");
  CsThetaPoint pt;
  pt.p = x.segment(ix.p0, ix.ng);
  pt.q = x.segment(ix.q0, ix.ng);
  pt.c_diag = x.segment(ix.c0, ix.nb);
  pt.c_off = x.segment(ix.coff0, ix.nl);
  pt.s_off = x.segment(ix.soff0, ix.nl);
  pt.theta = x.segment(ix.th0, ix.nb);
  return pt;
}

CsThetaPoint lift_polar(const NetworkModel& m, const Eigen::VectorXd& v,
                        const Eigen::VectorXd& theta, const Eigen::VectorXd& p,
                        const Eigen::VectorXd& q) {
  CsThetaPoint pt;
  pt.p = p;
  pt.q = q;
  pt.theta = theta;
  pt.c_diag = v.cwiseProduct(v);
  pt.c_off.resize(m.n_branch());
  pt.s_off.resize(m.n_branch());
  for (int b = 0; b < m.n_branch(); ++b) {
    const int f = m.index_of(m.branches[b].from_id);
    const int t = m.index_of(m.branches[b].to_id);
    const double d = theta[f] - theta[t];
    pt.c_off[b] = v[f] * v[t] * std::cos(d);
    pt.s_off[b] = -v[f] * v[t] * std::sin(d);
  }
  return pt;
}

Eigen::VectorXd eval_quadratic_residual(const CsThetaPoint& pt, const NetworkModel& m) {
  Eigen::VectorXd r(m.n_branch());
  for (int b = 0; b < m.n_branch(); ++b) {
    const int f = m.index_of(m.branches[b].from_id);
    const int t = m.index_of(m.branches[b].to_id);
    r[b] = pt.c_off[b] * pt.c_off[b] + pt.s_off[b] * pt.s_off[b] - pt.c_diag[f] * pt.c_diag[t];
  }
  return r;
}

Eigen::VectorXd eval_trig_residual(const CsThetaPoint& pt, const NetworkModel& m) {
  Eigen::VectorXd r(m.n_branch());
  for (int b = 0; b < m.n_branch(); ++b) {
    const int f = m.index_of(m.branches[b].from_id);
    const int t = m.index_of(m.branches[b].to_id);
    const double d = pt.theta[f] - pt.theta[t];
    r[b] = std::sin(d) * pt.c_off[b] + std::cos(d) * pt.s_off[b];
  }
  return r;
}

Eigen::VectorXd eval_residual(const NetworkModel& m, const Eigen::VectorXd& x) {
  const CsThetaPoint pt = unpack_point(m, x);
  Eigen::VectorXd r(2 * m.n_branch());
  r.head(m.n_branch()) = eval_quadratic_residual(pt, m);
  r.tail(m.n_branch()) = eval_trig_residual(pt, m);
  return r;
}

Eigen::SparseMatrix<double> eval_jacobian(const NetworkModel& m, const Eigen::VectorXd& x) {
  const Idx ix(m);
  std::vector<Trip> trip;
  trip.reserve(static_cast<size_t>(8 * ix.nl));
  for (int b = 0; b < ix.nl; ++b) {
    const int f = m.index_of(m.branches[b].from_id);
    const int t = m.index_of(m.branches[b].to_id);
    const double c = x[ix.coff0 + b];
    const double s = x[ix.soff0 + b];
    trip.emplace_back(b, ix.coff0 + b, 2.0 * c);
    trip.emplace_back(b, ix.soff0 + b, 2.0 * s);
    trip.emplace_back(b, ix.c0 + f, -x[ix.c0 + t]);
    trip.emplace_back(b, ix.c0 + t, -x[ix.c0 + f]);
    const double d = x[ix.th0 + f] - x[ix.th0 + t];
    const double sd = std::sin(d), cd = std::cos(d);
    const int row = ix.nl + b;
    trip.emplace_back(row, ix.coff0 + b, sd);
    trip.emplace_back(row, ix.soff0 + b, cd);
    trip.emplace_back(row, ix.th0 + f, cd * c - sd * s);
    trip.emplace_back(row, ix.th0 + t, -(cd * c - sd * s));
  }
  Eigen::SparseMatrix<double> j(2 * ix.nl, ix.dim);
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

double lipschitz_bound(const NetworkModel& m) {
  double vmax2 = 0.0;
  for (const auto& b : m.buses) vmax2 = std::max(vmax2, b.vmax * b.vmax);
  return std::max(2.0, std::sqrt(1.0 + 2.0 * vmax2));
}

OpfTuning default_tuning(const NetworkModel& m) {
  OpfTuning t;
  t.beta_t = static_cast<double>(m.n_branch());
  t.beta_q = t.beta_q_factor * t.beta_t;
  return t;
}

ProblemDef build_problem(std::shared_ptr<const NetworkModel> model, const OpfTuning& tuning,
                         const std::vector<int>* line_set) {
  const NetworkModel& m = *model;
  const Idx ix(m);
  ProblemDef p;
  p.layout = opf_layout(m);
  p.obj_quad_diag = Eigen::VectorXd::Zero(ix.dim);
  p.obj_linear = Eigen::VectorXd::Zero(ix.dim);
  p.obj_const = 0.0;
  for (int g = 0; g < ix.ng; ++g) {
    p.obj_quad_diag[ix.p0 + g] = m.gens[g].c2 * m.base_mva * m.base_mva;
    p.obj_linear[ix.p0 + g] = m.gens[g].c1 * m.base_mva;
    p.obj_const += m.gens[g].c0;
  }
  p.classes = {{"quadratic", ix.nl}, {"trigonometric", ix.nl}};
  p.psi = [model](const Eigen::VectorXd& x) { return eval_residual(*model, x); };
  p.psi_jacobian = [model](const Eigen::VectorXd& x) { return eval_jacobian(*model, x); };
  (void)tuning;
  p.omega = build_region(m, line_set);
  p.lipschitz_bound = lipschitz_bound(m);
  p.validate();
  return p;
}

GnConfig make_gn_config(const NetworkModel& m, const OpfTuning& tuning) {
  GnConfig cfg;
  const double beta_t = tuning.beta_t > 0 ? tuning.beta_t : static_cast<double>(m.n_branch());
  const double beta_q = tuning.beta_q > 0 ? tuning.beta_q : tuning.beta_q_factor * beta_t;
  cfg.weights.beta = {beta_q, beta_t};  // class order: quadratic, trigonometric
  const double l_cs_min = beta_q / beta_t;
  cfg.reg.groups = {{"cs", {"c_diag", "c_off", "s_off"}, l_cs_min, l_cs_min},
                    {"theta", {"theta"}, 1.0, 1.0}};
  cfg.reg.strategy = tuning.strategy;
  cfg.reg.mu = tuning.mu;
  cfg.reg.carry_over = tuning.carry_over;
  cfg.cascade = {{"trigonometric", {"cs", "theta"}, {"cs", "theta"}},
                 {"quadratic", {"cs"}, {"cs"}}};
  cfg.tol_feas = tuning.tol_feas;
  cfg.tol_step = tuning.tol_step;
  cfg.max_outer = tuning.max_outer;
  cfg.restart_cap = tuning.restart_cap;
  cfg.perturb_scale = tuning.perturb_scale;
  cfg.seed = tuning.seed;
  cfg.warm_start = tuning.warm_start;
  return cfg;
}

namespace {
// run-and-inspect may have doubled the weights; continuation keeps them
PenaltyWeights config_weights_after(const SolveReport& report) {
  PenaltyWeights w;
  w.beta = report.final_beta;
  return w;
}
}  // namespace

double BranchFlow::from_mag() const { return std::hypot(pf, qf); }
double BranchFlow::to_mag() const { return std::hypot(pt, qt); }

BranchFlow branch_flow_cs(const NetworkModel& m, const CsThetaPoint& pt, int b) {
  const auto& br = m.branches[b];
  const int f = m.index_of(br.from_id);
  const int t = m.index_of(br.to_id);
  BranchFlow fl;
  fl.pf = br.g_ff * pt.c_diag[f] + br.g_ft * pt.c_off[b] - br.b_ft * pt.s_off[b];
  fl.qf = -br.b_ff * pt.c_diag[f] - br.b_ft * pt.c_off[b] - br.g_ft * pt.s_off[b];
  fl.pt = br.g_tt * pt.c_diag[t] + br.g_tf * pt.c_off[b] + br.b_tf * pt.s_off[b];
  fl.qt = -br.b_tt * pt.c_diag[t] - br.b_tf * pt.c_off[b] + br.g_tf * pt.s_off[b];
  return fl;
}

std::vector<int> active_line_set(const CsThetaPoint& pt, const NetworkModel& m, double margin) {
  std::vector<int> set;
  for (int b = 0; b < m.n_branch(); ++b) {
    const double rate = m.branches[b].rate_a_mva / m.base_mva;
    if (rate <= 0) continue;
    const BranchFlow fl = branch_flow_cs(m, pt, b);
    if (std::max(fl.from_mag(), fl.to_mag()) >= (1.0 - margin) * rate) set.push_back(b);
  }
  return set;
}

SocpInit socp_init(const NetworkModel& m, const AdmmSettings& admm) {
  if (!m.admittance_built) throw Error("socp_init requires build_admittance");
  const Idx ix(m);
  ConvexRegion region = build_region(m, nullptr);

  ConicProgram prog;
  prog.quad = Eigen::SparseMatrix<double>(ix.dim, ix.dim);
  {
    std::vector<Trip> trip;
    for (int g = 0; g < ix.ng; ++g)
      trip.emplace_back(ix.p0 + g, ix.p0 + g, 2.0 * m.gens[g].c2 * m.base_mva * m.base_mva);
    prog.quad.setFromTriplets(trip.begin(), trip.end());
  }
  prog.linear = Eigen::VectorXd::Zero(ix.dim);
  for (int g = 0; g < ix.ng; ++g) prog.linear[ix.p0 + g] = m.gens[g].c1 * m.base_mva;
  for (const auto& g : m.gens) prog.constant += g.c0;
  prog.prox_scale = Eigen::VectorXd::Zero(ix.dim);
  prog.penalty_rows = RowMat(0, ix.dim);
  prog.penalty_offset = Eigen::VectorXd(0);
  prog.penalty_weight = Eigen::VectorXd(0);

  // region blocks minus everything touching theta, plus the rotated cones
  std::vector<Trip> eq_trip;
  std::vector<double> eq_rhs;
  {
    const ConeBlock& zero = region.blocks[0];
    // drop the reference pin (last row)
    for (int i = 0; i < zero.rows.outerSize(); ++i)
      for (RowMat::InnerIterator it(zero.rows, i); it; ++it)
        if (it.row() < 2 * ix.nb)
          eq_trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
    for (int i = 0; i < 2 * ix.nb; ++i) eq_rhs.push_back(-zero.offset[i]);
  }
  prog.eq_rows = from_triplets(2 * ix.nb, ix.dim, eq_trip);
  prog.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), 2 * ix.nb);
  {
    // variable boxes only (angle-difference rows are the tail of the block)
    const ConeBlock& box = region.blocks[1];
    const int keep = 2 * ix.ng + ix.nb;
    std::vector<Trip> trip;
    for (int i = 0; i < box.rows.outerSize(); ++i)
      for (RowMat::InnerIterator it(box.rows, i); it; ++it)
        if (it.row() < keep)
          trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    prog.cones.push_back(make_box_block(from_triplets(keep, ix.dim, trip),
                                        Eigen::VectorXd::Zero(keep), box.lo.head(keep),
                                        box.hi.head(keep)));
  }
  for (size_t blk = 2; blk < region.blocks.size(); ++blk) prog.cones.push_back(region.blocks[blk]);
  for (int b = 0; b < ix.nl; ++b) {
    // c^2 + s^2 <= c_ii c_jj as ||(2c, 2s, c_ii - c_jj)|| <= c_ii + c_jj
    const int f = m.index_of(m.branches[b].from_id);
    const int t = m.index_of(m.branches[b].to_id);
    std::vector<Trip> trip;
    trip.emplace_back(0, ix.c0 + f, 1.0);
    trip.emplace_back(0, ix.c0 + t, 1.0);
    trip.emplace_back(1, ix.coff0 + b, 2.0);
    trip.emplace_back(2, ix.soff0 + b, 2.0);
    trip.emplace_back(3, ix.c0 + f, 1.0);
    trip.emplace_back(3, ix.c0 + t, -1.0);
    prog.cones.push_back(make_soc_block(from_triplets(4, ix.dim, trip), Eigen::VectorXd::Zero(4)));
  }

  SocpInit init;
  AdmmSolver solver;
  AdmmResult res;
  try {
    res = solver.solve(prog, admm, nullptr);
  } catch (const SubsolverError& e) {
    throw Error(std::string("relaxation solve failed (case infeasible even relaxed?): ") +
                e.what());
  }
  init.inner_iters = res.iters;
  init.objective = res.objective;
  init.point = unpack_point(m, res.x);
  // multiplier magnitudes: bus balances head the dual vector, the rotated
  // cones are its tail (4 rows per branch); these calibrate the penalty
  init.balance_dual_inf = res.duals.head(2 * ix.nb).cwiseAbs().maxCoeff();
  for (int b = 0; b < ix.nl; ++b) {
    const auto block = res.duals.segment(res.duals.size() - 4 * (ix.nl - b), 4);
    init.cone_dual_inf = std::max(init.cone_dual_inf, block.cwiseAbs().maxCoeff());
  }

  // angle recovery: least-squares fit of theta differences to
  // arctan(-s/c), inside the angle boxes, reference pinned to zero
  {
    std::vector<Trip> ptrip, dtrip, btrip;
    std::vector<double> targets;
    int row = 0;
    for (int b = 0; b < ix.nl; ++b) {
      const double c = init.point.c_off[b];
      if (std::abs(c) < 1e-9) continue;  // undefined angle, bounds still apply
      const double target = std::atan(-init.point.s_off[b] / c);
      const int f = m.index_of(m.branches[b].from_id);
      const int t = m.index_of(m.branches[b].to_id);
      dtrip.emplace_back(row, f, 1.0);
      dtrip.emplace_back(row, t, -1.0);
      targets.push_back(target);
      ++row;
    }
    RowMat d = from_triplets(row, ix.nb, dtrip);
    Eigen::VectorXd tvec = Eigen::Map<Eigen::VectorXd>(targets.data(), row);
    ConicProgram th;
    Eigen::SparseMatrix<double> dc = d;
    th.quad = 2.0 * (dc.transpose() * dc);
    th.linear = -2.0 * (dc.transpose() * tvec);
    th.constant = tvec.squaredNorm();
    th.prox_scale = Eigen::VectorXd::Zero(ix.nb);
    th.penalty_rows = RowMat(0, ix.nb);
    th.penalty_offset = Eigen::VectorXd(0);
    th.penalty_weight = Eigen::VectorXd(0);
    th.eq_rows = RowMat(0, ix.nb);
    th.eq_rhs = Eigen::VectorXd(0);
    const int rows = ix.nl + 1;
    Eigen::VectorXd lo(rows), hi(rows);
    for (int b = 0; b < ix.nl; ++b) {
      btrip.emplace_back(b, m.index_of(m.branches[b].from_id), 1.0);
      btrip.emplace_back(b, m.index_of(m.branches[b].to_id), -1.0);
      lo[b] = m.branches[b].ang_min_rad;
      hi[b] = m.branches[b].ang_max_rad;
    }
    btrip.emplace_back(ix.nl, m.ref_bus, 1.0);
    lo[ix.nl] = hi[ix.nl] = 0.0;
    th.cones.push_back(make_box_block(from_triplets(rows, ix.nb, btrip),
                                      Eigen::VectorXd::Zero(rows), lo, hi));
    AdmmSolver tsolver;
    const AdmmResult tres = tsolver.solve(th, admm, nullptr);
    init.inner_iters += tres.iters;
    init.theta_residual = tres.objective;
    init.point.theta = tres.x;
  }
  return init;
}

PolarValidation recover_polar(const CsThetaPoint& pt, const NetworkModel& m) {
  const Idx ix(m);
  PolarValidation val;
  val.v.resize(ix.nb);
  for (int i = 0; i < ix.nb; ++i) {
    if (!(pt.c_diag[i] > 0))
      throw Error("cannot recover voltage magnitude: c_ii <= 0 at bus " +
                  std::to_string(m.buses[i].id));
    val.v[i] = std::sqrt(pt.c_diag[i]);
  }
  val.theta = pt.theta;

  Eigen::VectorXd pmis = Eigen::VectorXd::Zero(ix.nb);
  Eigen::VectorXd qmis = Eigen::VectorXd::Zero(ix.nb);
  for (int g = 0; g < ix.ng; ++g) {
    const int i = m.index_of(m.gens[g].bus_id);
    pmis[i] += pt.p[g];
    qmis[i] += pt.q[g];
  }
  for (int i = 0; i < ix.nb; ++i) {
    const double v2 = val.v[i] * val.v[i];
    pmis[i] -= m.buses[i].pd_mw / m.base_mva + (m.buses[i].gs_mw / m.base_mva) * v2;
    qmis[i] -= m.buses[i].qd_mvar / m.base_mva - (m.buses[i].bs_mvar / m.base_mva) * v2;
  }
  for (int b = 0; b < ix.nl; ++b) {
    const auto& br = m.branches[b];
    const int f = m.index_of(br.from_id);
    const int t = m.index_of(br.to_id);
    const double dft = val.theta[f] - val.theta[t];
    const double vf = val.v[f], vt = val.v[t];
    const double pf = br.g_ff * vf * vf + vf * vt * (br.g_ft * std::cos(dft) + br.b_ft * std::sin(dft));
    const double qf = -br.b_ff * vf * vf + vf * vt * (br.g_ft * std::sin(dft) - br.b_ft * std::cos(dft));
    const double ptn = br.g_tt * vt * vt + vt * vf * (br.g_tf * std::cos(-dft) + br.b_tf * std::sin(-dft));
    const double qtn = -br.b_tt * vt * vt + vt * vf * (br.g_tf * std::sin(-dft) - br.b_tf * std::cos(-dft));
    pmis[f] -= pf;
    qmis[f] -= qf;
    pmis[t] -= ptn;
    qmis[t] -= qtn;
    const double rate = br.rate_a_mva / m.base_mva;
    if (rate > 0) {
      const double excess =
          std::max(std::hypot(pf, qf), std::hypot(ptn, qtn)) - rate;
      val.line_limit_excess = std::max(val.line_limit_excess, excess);
    }
    const double aexc = std::max(br.ang_min_rad - dft, dft - br.ang_max_rad);
    val.angle_excess = std::max(val.angle_excess, aexc);
  }
  val.p_balance_inf = pmis.cwiseAbs().maxCoeff();
  val.q_balance_inf = qmis.cwiseAbs().maxCoeff();
  for (int i = 0; i < ix.nb; ++i) {
    val.v_bound_excess = std::max(val.v_bound_excess, m.buses[i].vmin - val.v[i]);
    val.v_bound_excess = std::max(val.v_bound_excess, val.v[i] - m.buses[i].vmax);
  }
  for (int g = 0; g < ix.ng; ++g) {
    const auto& gen = m.gens[g];
    val.pq_bound_excess = std::max(val.pq_bound_excess, gen.pmin_mw / m.base_mva - pt.p[g]);
    val.pq_bound_excess = std::max(val.pq_bound_excess, pt.p[g] - gen.pmax_mw / m.base_mva);
    val.pq_bound_excess = std::max(val.pq_bound_excess, gen.qmin_mvar / m.base_mva - pt.q[g]);
    val.pq_bound_excess = std::max(val.pq_bound_excess, pt.q[g] - gen.qmax_mvar / m.base_mva);
  }
  return val;
}

double PolarValidation::max_violation() const {
  double v = std::max(p_balance_inf, q_balance_inf);
  v = std::max(v, line_limit_excess);
  v = std::max(v, v_bound_excess);
  v = std::max(v, angle_excess);
  v = std::max(v, pq_bound_excess);
  return v;
}

double objective_dollars(const NetworkModel& m, const Eigen::VectorXd& p_pu) {
  double total = 0;
  for (int g = 0; g < m.n_gen(); ++g) {
    const double mw = p_pu[g] * m.base_mva;
    total += m.gens[g].c2 * mw * mw + m.gens[g].c1 * mw + m.gens[g].c0;
  }
  return total;
}

OpfResult solve_opf(std::shared_ptr<const NetworkModel> model, const OpfTuning& tuning,
                    const AdmmSettings& admm, bool record_iterates, bool timing,
                    const std::vector<std::vector<std::vector<double>>>* forced_l,
                    const std::vector<int>* forced_restarts,
                    std::function<void(const std::string&)> log) {
  const NetworkModel& m = *model;
  OpfResult out;
  out.init = socp_init(m, admm);

  auto line_set = std::make_shared<std::vector<int>>();
  if (tuning.lazy) *line_set = active_line_set(out.init.point, m, tuning.lazy_margin);

  ProblemDef problem = build_problem(model, tuning, tuning.lazy ? line_set.get() : nullptr);
  OpfTuning tuned = tuning;
  double beta_scale = 1.0;
  {
    // the exact penalty needs beta above the multiplier magnitude; the
    // relaxation duals estimate it, so raise the weights (ratio preserved)
    // when the branch-count recipe is too small for the case's cost scale
    const double beta_q = tuned.beta_q > 0 ? tuned.beta_q
                                           : tuned.beta_q_factor * static_cast<double>(m.n_branch());
    const double needed = 2.0 * out.init.cone_dual_inf;
    if (needed > beta_q) {
      beta_scale = needed / beta_q;
      tuned.beta_q = beta_q * beta_scale;
      tuned.beta_t = (tuned.beta_t > 0 ? tuned.beta_t : static_cast<double>(m.n_branch())) * beta_scale;
    }
  }
  GnConfig cfg = make_gn_config(m, tuned);
  // a raised penalty steepens the model the same way everywhere, so the
  // opening proximal weight rises with it (the floors stay put)
  for (auto& g : cfg.reg.groups) g.l_init = g.l_min * beta_scale;
  cfg.admm = admm;
  cfg.record_iterates = record_iterates;
  cfg.timing = timing;
  cfg.forced_l = forced_l;
  cfg.forced_restarts = forced_restarts;
  cfg.log = log;
  if (tuning.lazy) {
    cfg.region_refresh = [model, line_set](ProblemDef& prob, const Eigen::VectorXd& v) {
      const CsThetaPoint pt = unpack_point(*model, v);
      bool grew = false;
      for (int b = 0; b < model->n_branch(); ++b) {
        const double rate = model->branches[b].rate_a_mva / model->base_mva;
        if (rate <= 0) continue;
        bool in_set = false;
        for (int s : *line_set) in_set |= (s == b);
        if (in_set) continue;
        const BranchFlow fl = branch_flow_cs(*model, pt, b);
        if (std::max(fl.from_mag(), fl.to_mag()) > rate + 1e-8) {
          line_set->push_back(b);
          grew = true;
        }
      }
      if (grew) prob.omega = build_region(*model, line_set.get());
      return grew;
    };
  }

  out.report = GnSolver(problem, cfg).solve(pack_point(m, out.init.point));
  out.point = unpack_point(m, out.report.x);
  out.polar = recover_polar(out.point, m);

  // the residual tolerance controls the lifted certificate; the original
  // polar constraints see it amplified by the branch admittances. Tighten
  // and continue until the polar certificate clears 1e-4.
  const double tol_feas_target = cfg.tol_feas;
  const bool polish = tuning.polish && forced_l == nullptr;
  for (int round = 0; round < 3 && polish && out.report.status == Status::Converged &&
                      out.polar.max_violation() > 0.9e-4;
       ++round) {
    cfg.tol_feas /= 10.0;
    cfg.max_outer = 15;  // polish rounds stay short
    cfg.weights = config_weights_after(out.report);
    SolveReport more = GnSolver(problem, cfg).solve(out.report.x);
    const int offset = out.report.outer_iterations;
    for (auto& row : more.trace) {
      row.k += offset;
      out.report.trace.push_back(row);
    }
    for (const auto& t : more.trials) out.report.trials.push_back(t);
    for (const auto& it : more.iterates) out.report.iterates.push_back(it);
    out.report.outer_iterations += more.outer_iterations;
    out.report.l_updates += more.l_updates;
    out.report.inner_iterations_total += more.inner_iterations_total;
    out.report.restarts += more.restarts;
    out.report.wall_time_s += more.wall_time_s;
    out.report.status = more.status;
    out.report.x = more.x;
    out.report.objective = more.objective;
    out.report.max_violation = more.max_violation;
    out.report.final_beta = more.final_beta;
    out.report.rate_tail_ratios = more.rate_tail_ratios;
    out.point = unpack_point(m, out.report.x);
    out.polar = recover_polar(out.point, m);
  }
  // a polish round may time out below its tightened target while the
  // run-level criterion still holds
  if (out.report.status != Status::Converged && !out.report.max_violation.empty()) {
    double v = 0;
    for (double mv : out.report.max_violation) v = std::max(v, mv);
    if (v <= tol_feas_target) out.report.status = Status::Converged;
  }

  out.report.f_lower = out.init.objective;
  out.dollars = objective_dollars(m, out.point.p);
  return out;
}

}  // namespace gnopt::acopf
