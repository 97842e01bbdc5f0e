#include "gnopt/gauss_newton.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace gnopt {

namespace {

constexpr double kHuge = std::numeric_limits<double>::infinity();

double class_l1(const ProblemDef& p, int c, const Eigen::VectorXd& res) {
  return res.segment(p.class_offset(c), p.classes[c].rows).cwiseAbs().sum();
}

double class_linf(const ProblemDef& p, int c, const Eigen::VectorXd& res) {
  const auto seg = res.segment(p.class_offset(c), p.classes[c].rows);
  return seg.size() ? seg.cwiseAbs().maxCoeff() : 0.0;
}

double group_step_sq(const ProblemDef& p, const RegParams& reg, int g,
                     const Eigen::VectorXd& d) {
  double s = 0.0;
  for (const auto& sname : reg.groups[g].slices) {
    const auto& sl = p.layout.slice(sname);
    s += d.segment(sl.offset, sl.size).squaredNorm();
  }
  return s;
}

}  // namespace

double penalty_value(const ProblemDef& problem, const Eigen::VectorXd& x,
                     const PenaltyWeights& w) {
  if (x.size() != problem.dim()) throw Error("penalty_value: dimension mismatch");
  const Eigen::VectorXd res = problem.psi(x);
  double v = problem.objective(x);
  for (size_t c = 0; c < problem.classes.size(); ++c)
    v += w.beta[c] * class_l1(problem, static_cast<int>(c), res);
  return v;
}

double model_value(const ProblemDef& problem, const Eigen::VectorXd& x_k,
                   const Eigen::VectorXd& y, const PenaltyWeights& w,
                   const Eigen::VectorXd& l_per_var) {
  if (x_k.size() != problem.dim() || y.size() != problem.dim())
    throw Error("model_value: dimension mismatch");
  const Eigen::VectorXd d = y - x_k;
  const Eigen::VectorXd lin = problem.psi(x_k) + problem.psi_jacobian(x_k) * d;
  double v = problem.objective(y) + 0.5 * d.dot(l_per_var.cwiseProduct(d));
  for (size_t c = 0; c < problem.classes.size(); ++c)
    v += w.beta[c] * class_l1(problem, static_cast<int>(c), lin);
  return v;
}

GradientMapping gradient_mapping(const Eigen::VectorXd& x_k, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& l_per_var) {
  GradientMapping gm;
  gm.d = v - x_k;
  gm.g = l_per_var.cwiseProduct(x_k - v);
  gm.r = gm.d.norm();
  return gm;
}

double directional_derivative(const ProblemDef& problem, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& d, const PenaltyWeights& w) {
  const Eigen::VectorXd res = problem.psi(x);
  Eigen::VectorXd xi(res.size());
  int row = 0;
  for (size_t c = 0; c < problem.classes.size(); ++c)
    for (int i = 0; i < problem.classes[c].rows; ++i, ++row)
      xi[row] = w.beta[c] * (res[row] > 0 ? 1.0 : (res[row] < 0 ? -1.0 : 0.0));
  const Eigen::VectorXd jd = problem.psi_jacobian(x) * d;
  return problem.objective_gradient(x).dot(d) + xi.dot(jd);
}

ResidualNorms residual_norms(const ProblemDef& problem, const Eigen::VectorXd& x) {
  const Eigen::VectorXd res = problem.psi(x);
  ResidualNorms n;
  for (size_t c = 0; c < problem.classes.size(); ++c) {
    n.l1.push_back(class_l1(problem, static_cast<int>(c), res));
    n.linf.push_back(class_linf(problem, static_cast<int>(c), res));
  }
  return n;
}

double ResidualNorms::max_inf() const {
  double m = 0.0;
  for (double v : linf) m = std::max(m, v);
  return m;
}

Decision check_stopping(double max_violation_inf, double step_inf, double tol_feas,
                        double tol_step, bool have_step) {
  if (max_violation_inf <= tol_feas) return Decision::Converged;
  if (have_step && step_inf < tol_step) return Decision::Stalled;
  return Decision::Continue;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max_iterations";
    case Status::Stalled: return "stalled";
  }
  return "unknown";
}

// ---------------------------------------------------------------- GnSolver

GnSolver::GnSolver(ProblemDef problem, GnConfig config)
    : problem_(std::move(problem)), config_(std::move(config)), rng_(config_.seed) {
  problem_.validate();
  config_.weights.validate(problem_);
  config_.reg.validate();
  for (const auto& chk : config_.cascade) {
    bool found = false;
    for (const auto& c : problem_.classes) found |= (c.name == chk.cls);
    if (!found) throw Error("cascade references unknown class '" + chk.cls + "'");
    for (const auto& g : chk.margin_groups) config_.reg.group_index(g);
    for (const auto& g : chk.bump_groups) config_.reg.group_index(g);
  }
}

double GnSolver::l_cap() const {
  if (!problem_.lipschitz_bound) return kHuge;
  return config_.weights.total() * *problem_.lipschitz_bound;
}

SubproblemResult GnSolver::solve_subproblem(const Eigen::VectorXd& x_k,
                                            const std::vector<double>& l_groups,
                                            const SplitState* warm) {
  const ConicProgram prog = assemble(problem_, x_k, config_.weights, l_per_variable(l_groups));
  AdmmResult res = admm_.solve(prog, config_.admm, warm);
  SubproblemResult out;
  out.v = std::move(res.x);
  out.duals = std::move(res.duals);
  out.inner_iters = res.iters;
  out.state = std::move(res.state);
  return out;
}

namespace {

struct TrialContext {
  Eigen::VectorXd psi_xk;
  Eigen::SparseMatrix<double> jac;
  double f_xk = 0.0;
};

// Acceptance outcome for one candidate: indices of groups to enlarge,
// empty when the step is acceptable. `force_global` replaces the class
// cascade by the combined model-descent test (the cascade is a per-class
// refinement; only the combined test is guaranteed to pass at L = beta*L).
std::vector<int> evaluate_acceptance(const ProblemDef& problem, const GnConfig& cfg,
                                     const TrialContext& ctx, const Eigen::VectorXd& x_k,
                                     const Eigen::VectorXd& v,
                                     const std::vector<double>& l_groups,
                                     bool force_global = false) {
  const Eigen::VectorXd d = v - x_k;
  const Eigen::VectorXd lin = ctx.psi_xk + ctx.jac * d;
  const Eigen::VectorXd psi_v = problem.psi(v);

  std::vector<double> gstep(cfg.reg.groups.size());
  for (size_t g = 0; g < cfg.reg.groups.size(); ++g)
    gstep[g] = group_step_sq(problem, cfg.reg, static_cast<int>(g), d);

  // compared quantities are evaluated at an inexact subproblem solution;
  // allow slack at the subsolver tolerance scale
  const double rel = std::max(1e-9, cfg.admm.tol_rel);
  const auto slack = [&](double a, double b) {
    return cfg.admm.tol_abs + rel * (1.0 + std::abs(a) + std::abs(b));
  };

  std::vector<int> bump;
  if (cfg.cascade.empty() || force_global) {
    // global test F(V) <= Q_L(V; x_k)
    double lhs = problem.objective(v);
    double rhs = problem.objective(v);
    for (size_t c = 0; c < problem.classes.size(); ++c) {
      lhs += cfg.weights.beta[c] * class_l1(problem, static_cast<int>(c), psi_v);
      rhs += cfg.weights.beta[c] * class_l1(problem, static_cast<int>(c), lin);
    }
    for (size_t g = 0; g < cfg.reg.groups.size(); ++g) rhs += 0.5 * l_groups[g] * gstep[g];
    if (lhs > rhs + slack(lhs, rhs)) {
      for (size_t g = 0; g < cfg.reg.groups.size(); ++g) bump.push_back(static_cast<int>(g));
      return bump;
    }
  } else {
    for (const auto& chk : cfg.cascade) {
      int ci = -1;
      for (size_t c = 0; c < problem.classes.size(); ++c)
        if (problem.classes[c].name == chk.cls) ci = static_cast<int>(c);
      const double lhs = cfg.weights.beta[ci] * class_l1(problem, ci, psi_v);
      double rhs = cfg.weights.beta[ci] * class_l1(problem, ci, lin);
      for (const auto& gname : chk.margin_groups) {
        const int g = cfg.reg.group_index(gname);
        rhs += 0.5 * l_groups[g] * gstep[g];
      }
      if (lhs > rhs + slack(lhs, rhs)) {
        for (const auto& gname : chk.bump_groups) bump.push_back(cfg.reg.group_index(gname));
        return bump;
      }
    }
  }

  if (cfg.enforce_descent && !force_global) {
    double f_v = problem.objective(v);
    for (size_t c = 0; c < problem.classes.size(); ++c)
      f_v += cfg.weights.beta[c] * class_l1(problem, static_cast<int>(c), psi_v);
    double l_min = kHuge;
    for (const auto& g : cfg.reg.groups) l_min = std::min(l_min, g.l_min);
    if (cfg.reg.groups.empty()) l_min = 0.0;
    const double eps_num = 1e-8 * (1.0 + std::abs(ctx.f_xk));
    if (f_v > ctx.f_xk - 0.5 * l_min * d.squaredNorm() + eps_num) {
      for (size_t g = 0; g < cfg.reg.groups.size(); ++g) bump.push_back(static_cast<int>(g));
      return bump;
    }
  }
  return bump;
}

}  // namespace

std::vector<int> GnSolver::acceptance_failures(const Eigen::VectorXd& x_k,
                                               const Eigen::VectorXd& v,
                                               const std::vector<double>& l_groups) const {
  TrialContext ctx;
  ctx.psi_xk = problem_.psi(x_k);
  ctx.jac = problem_.psi_jacobian(x_k);
  ctx.f_xk = penalty_value(problem_, x_k, config_.weights);
  return evaluate_acceptance(problem_, config_, ctx, x_k, v, l_groups);
}

LineSearchResult GnSolver::line_search(IterateState& state) {
  const Eigen::VectorXd& x_k = state.x;
  TrialContext ctx;
  ctx.psi_xk = problem_.psi(x_k);
  ctx.jac = problem_.psi_jacobian(x_k);
  ctx.f_xk = state.f_value;

  // the subproblem only changes in its diagonal prox data across trials
  ConicProgram prog = assemble(problem_, x_k, config_.weights, l_per_variable(state.l_values));
  const Eigen::VectorXd quad_base = 2.0 * problem_.obj_quad_diag;

  const auto retune = [&](const std::vector<double>& lv) {
    const Eigen::VectorXd l = l_per_variable(lv);
    const int d = problem_.dim();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(d);
    for (int i = 0; i < d; ++i) trip.emplace_back(i, i, quad_base[i] + l[i]);
    prog.quad.setFromTriplets(trip.begin(), trip.end());
    prog.linear = problem_.obj_linear - l.cwiseProduct(x_k);
    prog.constant = problem_.obj_const + 0.5 * x_k.dot(l.cwiseProduct(x_k));
    prog.prox_scale = l;
  };

  LineSearchResult out;
  out.l_values = state.l_values;
  const double cap = l_cap();

  // when the previous line search accepted without resistance and the
  // iterate is still moving, open one mu-step below the carried value so an
  // earlier overshoot can unwind; frozen L keeps tail subproblems identical
  // for warm starts
  if (config_.reg.carry_over && state.k > 0 && state.last_l_updates == 0 &&
      state.step_norm > 100.0 * config_.tol_step &&
      config_.forced_l == nullptr && config_.reg.strategy != LStrategy::Fixed) {
    for (size_t g = 0; g < out.l_values.size(); ++g)
      out.l_values[g] = std::max(config_.reg.groups[g].l_min, out.l_values[g] / config_.reg.mu);
  }

  // forced replay: solve the recorded trial sequence verbatim
  if (config_.forced_l != nullptr) {
    const auto& sched = (*config_.forced_l)[static_cast<size_t>(state.k)];
    const SplitState* warm = (config_.warm_start && !state.warm.empty()) ? &state.warm : nullptr;
    SplitState prev;
    for (size_t t = 0; t < sched.size(); ++t) {
      retune(sched[t]);
      AdmmResult res = admm_.solve(prog, config_.admm, warm);
      out.inner_iters += res.iters;
      out.trials.push_back({sched[t], res.iters});
      out.v = res.x;
      prev = std::move(res.state);
      warm = config_.warm_start ? &prev : nullptr;
      out.l_values = sched[t];
    }
    out.l_updates = static_cast<int>(sched.size()) - 1;
    out.state = std::move(prev);
    return out;
  }

  const SplitState* warm = (config_.warm_start && !state.warm.empty()) ? &state.warm : nullptr;
  SplitState prev;
  while (true) {
    retune(out.l_values);
    AdmmResult res = admm_.solve(prog, config_.admm, warm);
    out.inner_iters += res.iters;
    out.trials.push_back({out.l_values, res.iters});
    out.v = res.x;
    prev = std::move(res.state);
    warm = config_.warm_start ? &prev : nullptr;

    if (config_.reg.strategy == LStrategy::Fixed) break;

    // a vanishing step is the stationarity signal (V_L(x) = x); the
    // descent comparisons carry no information at that scale
    if ((out.v - x_k).cwiseAbs().maxCoeff() < config_.tol_step) break;

    bool accepted = false;
    if (config_.precheck_accept) {
      // relaxed pre-check: every violation norm decreased
      const Eigen::VectorXd psi_v = problem_.psi(out.v);
      accepted = true;
      for (size_t c = 0; c < problem_.classes.size() && accepted; ++c) {
        const int ci = static_cast<int>(c);
        accepted = class_l1(problem_, ci, psi_v) < state.norms.l1[c] &&
                   class_linf(problem_, ci, psi_v) < state.norms.linf[c];
      }
      if (accepted && config_.enforce_descent) {
        double f_v = problem_.objective(out.v);
        for (size_t c = 0; c < problem_.classes.size(); ++c)
          f_v += config_.weights.beta[c] * class_l1(problem_, static_cast<int>(c), psi_v);
        double l_min = kHuge;
        for (const auto& g : config_.reg.groups) l_min = std::min(l_min, g.l_min);
        const double eps_num = 1e-8 * (1.0 + std::abs(ctx.f_xk));
        accepted =
            f_v <= ctx.f_xk - 0.5 * l_min * (out.v - x_k).squaredNorm() + eps_num;
      }
    }

    std::vector<int> bump;
    if (!accepted) {
      bump = evaluate_acceptance(problem_, config_, ctx, x_k, out.v, out.l_values);
      accepted = bump.empty();
    }
    if (config_.log) {
      std::ostringstream os;
      os << "  trial L=(";
      for (size_t g = 0; g < out.l_values.size(); ++g)
        os << (g ? "," : "") << out.l_values[g];
      os << ") r=" << (out.v - x_k).norm() << (accepted ? " accept" : " bump:");
      if (!accepted)
        for (int g : bump) os << " " << config_.reg.groups[static_cast<size_t>(g)].name;
      config_.log(os.str());
    }
    if (accepted) break;

    bool moved = false;
    for (int g : bump) {
      const double cur = out.l_values[static_cast<size_t>(g)];
      if (cur >= cap && std::isfinite(cap)) continue;
      double next;
      switch (config_.reg.strategy) {
        case LStrategy::Bisection:
          if (!std::isfinite(cap))
            throw Error("bisection line search needs a known Lipschitz bound");
          next = 0.5 * (cur + cap);
          break;
        case LStrategy::Geometric:
        default:
          next = cur * config_.reg.mu;
          break;
      }
      if (std::isfinite(cap)) next = std::min(next, cap);
      if (next > 1e12) throw Error("line search exceeded L = 1e12 without acceptance");
      if (next > cur) {
        out.l_values[static_cast<size_t>(g)] = next;
        moved = true;
      }
    }
    if (!moved) {
      // every group is at the cap: the class cascade no longer applies and
      // the combined test must hold (else the Jacobian or L_Psi is wrong)
      const std::vector<int> hard =
          evaluate_acceptance(problem_, config_, ctx, x_k, out.v, out.l_values, true);
      if (hard.empty()) break;
      throw Error(
          "acceptance test failed at L = beta*L_Psi; Jacobian or Lipschitz bound is wrong");
    }
    ++out.l_updates;
  }
  out.state = std::move(prev);
  return out;
}

void GnSolver::run_and_inspect(IterateState& state) {
  for (double& b : config_.weights.beta) b *= 2.0;
  if (config_.perturb_scale > 0.0) {
    // per-variable ranges from identity box rows, default 1
    Eigen::VectorXd range = Eigen::VectorXd::Ones(problem_.dim());
    for (const auto& blk : problem_.omega.blocks) {
      if (blk.tag != Cone::Box) continue;
      for (int i = 0; i < blk.rows.outerSize(); ++i) {
        Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(blk.rows, i);
        if (!it) continue;
        const int col = static_cast<int>(it.col());
        const double coef = it.value();
        if (++Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator(blk.rows, i))
          continue;  // more than one entry: not a plain variable bound
        if (coef == 1.0 && std::isfinite(blk.lo[i]) && std::isfinite(blk.hi[i]))
          range[col] = blk.hi[i] - blk.lo[i];
      }
    }
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < state.x.size(); ++i)
      state.x[i] += config_.perturb_scale * range[i] * unif(rng_);
  }
  ++state.restarts;
  state.last_l_updates = 0;
  state.warm = SplitState{};
  state.l_values.clear();  // the penalty changed; the carried L no longer fits
  for (const auto& g : config_.reg.groups) state.l_values.push_back(g.l_init);
  state.f_value = penalty_value(problem_, state.x, config_.weights);
  state.norms = residual_norms(problem_, state.x);
}

SolveReport GnSolver::solve(const Eigen::VectorXd& x0) {
  if (x0.size() != problem_.dim()) throw Error("gn_solve: x0 dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  IterateState state;
  state.x = x0;
  state.step_norm = std::numeric_limits<double>::infinity();
  state.f_value = penalty_value(problem_, x0, config_.weights);
  state.norms = residual_norms(problem_, x0);
  state.l_values.clear();
  for (const auto& g : config_.reg.groups) state.l_values.push_back(g.l_init);

  SolveReport report;
  if (config_.record_iterates) report.iterates.push_back(state.x);

  Eigen::VectorXd best_x = state.x;
  double best_viol = state.norms.max_inf();
  double best_f = state.f_value;

  Status status = Status::MaxIterations;
  int plateau_run = 0;
  const bool replay = config_.forced_l != nullptr;
  while (true) {
    if (replay) {
      // execute the recorded schedule verbatim so runs stay comparable
      if (state.k >= static_cast<int>(config_.forced_l->size())) {
        status = state.norms.max_inf() <= config_.tol_feas ? Status::Converged
                                                           : Status::MaxIterations;
        break;
      }
      if (config_.forced_restarts != nullptr)
        for (int at : *config_.forced_restarts)
          if (at == state.k) run_and_inspect(state);
    } else {
      if (state.norms.max_inf() <= config_.tol_feas) {
        status = Status::Converged;
        break;
      }
      if (state.k >= config_.max_outer) {
        status = Status::MaxIterations;
        break;
      }
    }

    LineSearchResult ls = line_search(state);
    if (config_.region_refresh) {
      int rounds = 0;
      while (config_.region_refresh(problem_, ls.v)) {
        state.warm = SplitState{};  // constraint set grew; splitting shape changed
        LineSearchResult again = line_search(state);
        again.inner_iters += ls.inner_iters;
        again.l_updates += ls.l_updates;
        for (auto& t : ls.trials) again.trials.push_back(std::move(t));
        ls = std::move(again);
        if (++rounds > 10000) throw Error("lazy constraint refresh did not settle");
      }
    }

    const Eigen::VectorXd d = ls.v - state.x;
    const double step_inf = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
    const double viol_v = residual_norms(problem_, ls.v).max_inf();
    // plateau detection: an infeasible tail with vanishing relative progress
    // is treated as a stall long before the step reaches tol_step
    const double f_v = penalty_value(problem_, ls.v, config_.weights);
    const bool slow = !replay && viol_v > config_.tol_feas &&
                      viol_v > (1.0 - 0.02) * state.norms.max_inf() &&
                      state.f_value - f_v < 1e-5 * (1.0 + std::abs(state.f_value));
    plateau_run = slow ? plateau_run + 1 : 0;
    if (!replay &&
        (plateau_run >= 3 ||
         check_stopping(viol_v, step_inf, config_.tol_feas, config_.tol_step, true) ==
             Decision::Stalled)) {
      plateau_run = 0;
      // stationary but infeasible: restart from the current point rather
      // than take a noise-scale step
      report.inner_iterations_total += ls.inner_iters;
      report.l_updates += ls.l_updates;
      if (state.restarts < config_.restart_cap) {
        report.restart_iterations.push_back(state.k);
        run_and_inspect(state);
        if (config_.log)
          config_.log("run-and-inspect restart " + std::to_string(state.restarts));
        continue;
      }
      status = Status::Stalled;
      break;
    }

    state.x = ls.v;
    state.f_value = f_v;
    state.norms = residual_norms(problem_, state.x);
    state.last_l_updates = ls.l_updates;
    state.step_norm = step_inf;
    if (config_.warm_start)
      state.warm = std::move(ls.state);
    else
      state.warm = SplitState{};
    if (config_.reg.carry_over) {
      state.l_values = ls.l_values;
    } else {
      state.l_values.clear();
      for (const auto& g : config_.reg.groups) state.l_values.push_back(g.l_init);
    }

    TraceRow row;
    row.k = state.k;
    row.f = state.f_value;
    row.psi_inf = state.norms.linf;
    row.l_values = ls.l_values;
    row.r_l = d.norm();
    row.inner_iters = ls.inner_iters;
    row.l_updates = ls.l_updates;
    row.wall_ms = config_.timing ? elapsed_ms() : 0.0;
    report.trace.push_back(row);
    report.trials.push_back(ls.trials);
    report.l_updates += ls.l_updates;
    report.inner_iterations_total += ls.inner_iters;
    ++state.k;
    if (config_.record_iterates) report.iterates.push_back(state.x);
    if (config_.log) {
      std::ostringstream os;
      os << "k=" << state.k << " F=" << state.f_value << " viol=" << state.norms.max_inf()
         << " r=" << row.r_l << " inner=" << ls.inner_iters;
      config_.log(os.str());
    }

    const double viol = state.norms.max_inf();
    if (viol < best_viol - 1e-12 || (std::abs(viol - best_viol) <= 1e-12 && state.f_value < best_f)) {
      best_x = state.x;
      best_viol = viol;
      best_f = state.f_value;
    }
  }

  if (status == Status::MaxIterations) state.x = best_x;

  report.status = status;
  report.x = state.x;
  report.objective = problem_.objective(state.x);
  report.max_violation = residual_norms(problem_, state.x).linf;
  report.outer_iterations = state.k;
  report.restarts = state.restarts;
  report.wall_time_s = elapsed_ms() / 1e3;
  report.final_beta = config_.weights.beta;

  if (config_.record_iterates && report.iterates.size() >= 3) {
    const Eigen::VectorXd& star = report.iterates.back();
    const size_t n = report.iterates.size();
    const size_t first = n > 6 ? n - 6 : 0;
    for (size_t i = first; i + 1 < n; ++i) {
      const double ek = (report.iterates[i] - star).norm();
      const double ek1 = (report.iterates[i + 1] - star).norm();
      if (ek > 1e-14) report.rate_tail_ratios.push_back(ek1 / (ek * ek));
    }
  }
  return report;
}

Eigen::VectorXd gn_solve_vector(const ProblemDef& problem, const GnConfig& config,
                                const Eigen::VectorXd& x0) {
  GnSolver solver(problem, config);
  return solver.solve(x0).x;
}

}  // namespace gnopt
