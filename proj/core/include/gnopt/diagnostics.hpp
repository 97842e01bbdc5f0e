#pragma once

#include <vector>

#include "gnopt/gauss_newton.hpp"

namespace gnopt {

/// Outcome of the global-rate certificate
///   min_{0<=k<=K} ||G_{bL}(x^k)||^2  <=  2 (bL)^2 [F(x^0) - F_lower] / (L_min (K+1))
/// evaluated at every prefix K of a recorded run (bL = sum_c beta_c * L_Psi).
struct RateBoundReport {
  bool holds = false;
  double bl = 0.0;     // uniform gradient-mapping weight used
  double l_min = 0.0;  // descent modulus in the denominator
  std::vector<double> g_norm_sq;  // ||G_{bL}(x^k)||^2 per iterate
  std::vector<double> bound;      // RHS per prefix
  std::vector<double> margin;     // RHS - running min of g_norm_sq
  int prefix_checked = 0;
};

/// Requires a report recorded with `record_iterates` and no restarts (the
/// bound assumes a constant penalty weight). `weights` must be the weights
/// the run used.
RateBoundReport rate_bound_check(const ProblemDef& problem, const PenaltyWeights& weights,
                                 const RegParams& reg, const AdmmSettings& admm,
                                 const SolveReport& report, double f_lower);

}  // namespace gnopt
