#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "gnopt/gauss_newton.hpp"
#include "gnopt/matpower.hpp"

namespace gnopt::acopf {

/// A point in the lifted (p, q, c, s, theta) coordinates. c_diag holds
/// c_ii per bus; c_off/s_off hold c_ij/s_ij per branch, oriented from->to.
struct CsThetaPoint {
  Eigen::VectorXd p, q;            // per generator, p.u.
  Eigen::VectorXd c_diag;          // per bus
  Eigen::VectorXd c_off, s_off;    // per branch
  Eigen::VectorXd theta;           // per bus, radians
};

VariableLayout opf_layout(const NetworkModel& model);
Eigen::VectorXd pack_point(const NetworkModel& model, const CsThetaPoint& pt);
CsThetaPoint unpack_point(const NetworkModel& model, const Eigen::VectorXd& x);

/// Lifts a polar operating point through c_ij = v_i v_j cos, s_ij = -v_i v_j sin.
CsThetaPoint lift_polar(const NetworkModel& model, const Eigen::VectorXd& v,
                        const Eigen::VectorXd& theta, const Eigen::VectorXd& p,
                        const Eigen::VectorXd& q);

// Per-branch coupling residuals. Class order in the stacked residual is
// "quadratic" then "trigonometric".
Eigen::VectorXd eval_quadratic_residual(const CsThetaPoint& pt, const NetworkModel& model);
Eigen::VectorXd eval_trig_residual(const CsThetaPoint& pt, const NetworkModel& model);
Eigen::VectorXd eval_residual(const NetworkModel& model, const Eigen::VectorXd& x);
Eigen::SparseMatrix<double> eval_jacobian(const NetworkModel& model, const Eigen::VectorXd& x);

/// Lipschitz constant of the residual Jacobian over the voltage box:
/// max(2, sqrt(1 + 2 max_i Vmax_i^2)).
double lipschitz_bound(const NetworkModel& model);

struct OpfTuning {
  double beta_t = 0, beta_q = 0;  // 0 = derive from branch count
  double beta_q_factor = 5.0;
  LStrategy strategy = LStrategy::Geometric;
  double mu = 2.0;
  bool carry_over = true;
  double tol_feas = 1e-5;  // eps_2
  double tol_step = 1e-6;  // eps_1
  int max_outer = 100;
  bool lazy = false;
  double lazy_margin = 0.05;
  bool warm_start = true;
  int restart_cap = 5;
  double perturb_scale = 1e-3;
  std::uint64_t seed = 0;
  bool polish = true;  // tighten until the polar certificate clears 1e-4
};

/// Paper-adopted defaults: beta_t = |branches|, beta_q = 5 beta_t,
/// L_cs,min = beta_q/beta_t, L_theta,min = 1, Geometric-2 with carry-over.
OpfTuning default_tuning(const NetworkModel& model);

/// Lifted problem: decision vector (p, q, c, s, theta); region = power
/// balances + flow-limit cones + boxes + angle-difference boxes + reference
/// pin; residual classes quadratic / trigonometric. `line_set` restricts
/// which rated branches get flow cones (nullptr = all).
ProblemDef build_problem(std::shared_ptr<const NetworkModel> model, const OpfTuning& tuning,
                         const std::vector<int>* line_set = nullptr);

GnConfig make_gn_config(const NetworkModel& model, const OpfTuning& tuning);

/// Branch complex-power flow evaluated from lifted coordinates (p.u.).
struct BranchFlow {
  double pf = 0, qf = 0, pt = 0, qt = 0;
  double from_mag() const;
  double to_mag() const;
};
BranchFlow branch_flow_cs(const NetworkModel& model, const CsThetaPoint& pt, int branch);

/// Rated branches whose flow magnitude exceeds (1 - margin) * rate on
/// either side.
std::vector<int> active_line_set(const CsThetaPoint& pt, const NetworkModel& model,
                                 double margin = 0.05);

struct SocpInit {
  CsThetaPoint point;
  double objective = 0;    // relaxation objective; a lower bound for the run
  long inner_iters = 0;
  double theta_residual = 0;    // objective of the angle-recovery fit
  double balance_dual_inf = 0;  // largest bus-balance multiplier magnitude
  double cone_dual_inf = 0;     // largest relaxed-coupling multiplier magnitude
};

/// Relaxation-based starting point: solves the rotated-cone relaxation
/// (quadratic couplings relaxed, angles removed), then recovers theta by a
/// least-squares fit over the angle-difference boxes.
SocpInit socp_init(const NetworkModel& model, const AdmmSettings& admm);

/// Polar recovery v = sqrt(c_ii) plus a feasibility certificate of the
/// original polar constraints at (v, theta, p, q).
struct PolarValidation {
  Eigen::VectorXd v, theta;
  double p_balance_inf = 0;
  double q_balance_inf = 0;
  double line_limit_excess = 0;  // p.u. beyond rate
  double v_bound_excess = 0;
  double angle_excess = 0;
  double pq_bound_excess = 0;
  double max_violation() const;
};
PolarValidation recover_polar(const CsThetaPoint& pt, const NetworkModel& model);

/// Reported generation cost in $/h (includes the constant cost terms).
double objective_dollars(const NetworkModel& model, const Eigen::VectorXd& p_pu);

struct OpfResult {
  SolveReport report;
  CsThetaPoint point;
  PolarValidation polar;
  SocpInit init;
  double dollars = 0;
  std::vector<std::string> class_names{"quadratic", "trigonometric"};
  std::vector<std::string> group_names{"cs", "theta"};
};

/// Full pipeline: build -> socp_init -> gn solve -> polar validation.
OpfResult solve_opf(std::shared_ptr<const NetworkModel> model, const OpfTuning& tuning,
                    const AdmmSettings& admm, bool record_iterates = false,
                    bool timing = false,
                    const std::vector<std::vector<std::vector<double>>>* forced_l = nullptr,
                    const std::vector<int>* forced_restarts = nullptr,
                    std::function<void(const std::string&)> log = {});

}  // namespace gnopt::acopf
