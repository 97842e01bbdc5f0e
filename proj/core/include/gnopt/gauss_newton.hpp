#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gnopt/admm.hpp"
#include "gnopt/conic.hpp"
#include "gnopt/problem.hpp"

namespace gnopt {

// ---------------------------------------------------------------- values

/// F(x) = f(x) + sum_c beta_c ||Psi_c(x)||_1
double penalty_value(const ProblemDef& problem, const Eigen::VectorXd& x,
                     const PenaltyWeights& w);

/// Q_L(y; x_k) = f(y) + sum_c beta_c ||Psi_c(x_k) + Psi_c'(x_k)(y - x_k)||_1
///             + sum_s (L_s / 2) ||(y - x_k)_s||^2
double model_value(const ProblemDef& problem, const Eigen::VectorXd& x_k,
                   const Eigen::VectorXd& y, const PenaltyWeights& w,
                   const Eigen::VectorXd& l_per_var);

struct GradientMapping {
  Eigen::VectorXd g;  // G_L = L .* (x_k - V_L)
  Eigen::VectorXd d;  // d_L = V_L - x_k
  double r = 0.0;     // ||d_L||_2
};
GradientMapping gradient_mapping(const Eigen::VectorXd& x_k, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& l_per_var);

/// DF(x)[d] with the sign(residual) subgradient selection (0 maps to 0).
double directional_derivative(const ProblemDef& problem, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& d, const PenaltyWeights& w);

/// Per-class l1 / l-inf norms of the residual at x.
struct ResidualNorms {
  std::vector<double> l1, linf;
  double max_inf() const;
};
ResidualNorms residual_norms(const ProblemDef& problem, const Eigen::VectorXd& x);

// ---------------------------------------------------------------- stopping

enum class Decision { Continue, Converged, Stalled };

Decision check_stopping(double max_violation_inf, double step_inf, double tol_feas,
                        double tol_step, bool have_step);

// ---------------------------------------------------------------- reports

enum class Status { Converged, MaxIterations, Stalled };
const char* status_name(Status s);

struct TraceRow {
  int k = 0;
  double f = 0.0;
  std::vector<double> psi_inf;   // per class
  std::vector<double> l_values;  // per group
  double r_l = 0.0;
  long inner_iters = 0;
  int l_updates = 0;
  double wall_ms = 0.0;
};

struct TrialRecord {
  std::vector<double> l_values;
  int inner_iters = 0;
};

struct SolveReport {
  Status status = Status::MaxIterations;
  double objective = 0.0;
  std::vector<double> max_violation;  // per class, l-inf
  int outer_iterations = 0;
  int l_updates = 0;
  long inner_iterations_total = 0;
  int restarts = 0;
  double wall_time_s = 0.0;
  std::vector<TraceRow> trace;

  Eigen::VectorXd x;
  std::vector<Eigen::VectorXd> iterates;          // filled when record_iterates
  std::vector<std::vector<TrialRecord>> trials;   // per outer iteration
  std::vector<int> restart_iterations;            // outer index at each restart
  std::vector<double> final_beta;                 // after any restarts
  std::vector<double> rate_tail_ratios;           // ||x_{k+1}-x*|| / ||x_k-x*||^2
  std::optional<double> f_lower;                  // frontend-supplied bound
};

// ---------------------------------------------------------------- config

/// One step of the class-split acceptance cascade: test `cls`, use the
/// proximal margins of `margin_groups`, and bump `bump_groups` on failure.
struct CascadeCheck {
  std::string cls;
  std::vector<std::string> margin_groups;
  std::vector<std::string> bump_groups;
};

struct GnConfig {
  PenaltyWeights weights;
  RegParams reg;
  double tol_feas = 1e-5;
  double tol_step = 1e-6;
  int max_outer = 100;
  int restart_cap = 5;
  double perturb_scale = 1e-3;
  std::uint64_t seed = 0;
  bool warm_start = true;
  bool precheck_accept = true;  // accept when all violation norms decreased
  bool enforce_descent = true;  // require the Theorem-1 descent inequality
  std::vector<CascadeCheck> cascade;  // empty -> global model-descent test
  AdmmSettings admm;
  bool record_iterates = false;
  bool timing = false;  // fill wall_ms in trace rows (off keeps traces reproducible)
  // Replay a fixed L schedule (per iteration, per trial, per group) and the
  // recorded restart points; used by the warm-start benchmark to pin
  // identical outer trajectories.
  const std::vector<std::vector<std::vector<double>>>* forced_l = nullptr;
  const std::vector<int>* forced_restarts = nullptr;
  // Lazy-constraint hook: may tighten problem.omega after a candidate step;
  // returns true when the region changed and the step must be recomputed.
  std::function<bool(ProblemDef&, const Eigen::VectorXd&)> region_refresh;
  std::function<void(const std::string&)> log;
};

struct IterateState {
  Eigen::VectorXd x;
  int k = 0;
  double f_value = 0.0;
  ResidualNorms norms;
  double g_norm = 0.0;
  double step_norm = 0.0;
  std::vector<double> l_values;  // per group, carried across iterations
  int last_l_updates = 0;
  SplitState warm;
  int restarts = 0;
};

struct SubproblemResult {
  Eigen::VectorXd v;
  Eigen::VectorXd duals;
  int inner_iters = 0;
  SplitState state;
};

struct LineSearchResult {
  Eigen::VectorXd v;
  std::vector<double> l_values;
  int l_updates = 0;
  long inner_iters = 0;
  std::vector<TrialRecord> trials;
  SplitState state;
};

// ---------------------------------------------------------------- solver

/// Outer loop of the penalized Gauss-Newton scheme: proximal line search
/// on L, stopping logic, run-and-inspect restarts.
class GnSolver {
 public:
  GnSolver(ProblemDef problem, GnConfig config);

  SolveReport solve(const Eigen::VectorXd& x0);

  SubproblemResult solve_subproblem(const Eigen::VectorXd& x_k,
                                    const std::vector<double>& l_groups,
                                    const SplitState* warm = nullptr);
  LineSearchResult line_search(IterateState& state);
  void run_and_inspect(IterateState& state);

  /// Acceptance test at a candidate step (exposed for the invariant suite):
  /// pre-check is not consulted. Returns the groups to bump (empty = accept).
  std::vector<int> acceptance_failures(const Eigen::VectorXd& x_k, const Eigen::VectorXd& v,
                                       const std::vector<double>& l_groups) const;

  const ProblemDef& problem() const { return problem_; }
  ProblemDef& mutable_problem() { return problem_; }
  const GnConfig& config() const { return config_; }
  PenaltyWeights& weights() { return config_.weights; }
  AdmmSolver& subsolver() { return admm_; }

  Eigen::VectorXd l_per_variable(const std::vector<double>& groups) const {
    return reg_l_vector(problem_.layout, config_.reg, groups);
  }
  /// beta-weighted cap on L (Step 4 upper bound); +inf when L_Psi unknown.
  double l_cap() const;

 private:
  ProblemDef problem_;
  GnConfig config_;
  AdmmSolver admm_;
  std::mt19937_64 rng_;

  friend struct GnCallbacks;
};

Eigen::VectorXd gn_solve_vector(const ProblemDef& problem, const GnConfig& config,
                                const Eigen::VectorXd& x0);

}  // namespace gnopt
