#include "gnopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnopt {

RateBoundReport rate_bound_check(const ProblemDef& problem, const PenaltyWeights& weights,
                                 const RegParams& reg, const AdmmSettings& admm,
                                 const SolveReport& report, double f_lower) {
  if (report.iterates.empty())
    throw Error("rate_bound_check needs a report recorded with record_iterates");
  if (report.restarts > 0)
    throw Error("rate_bound_check assumes a constant penalty weight (no restarts)");
  if (!problem.lipschitz_bound) throw Error("rate_bound_check needs a Lipschitz bound");

  RateBoundReport out;
  out.bl = weights.total() * *problem.lipschitz_bound;
  out.l_min = std::numeric_limits<double>::infinity();
  for (const auto& g : reg.groups) out.l_min = std::min(out.l_min, g.l_min);

  const double f0 = penalty_value(problem, report.iterates.front(), weights);
  const Eigen::VectorXd l_uniform = Eigen::VectorXd::Constant(problem.dim(), out.bl);

  AdmmSolver solver;
  double running_min = std::numeric_limits<double>::infinity();
  out.holds = true;
  for (size_t k = 0; k < report.iterates.size(); ++k) {
    const ConicProgram prog = assemble(problem, report.iterates[k], weights, l_uniform);
    const AdmmResult res = solver.solve(prog, admm, nullptr);
    const GradientMapping gm = gradient_mapping(report.iterates[k], res.x, l_uniform);
    out.g_norm_sq.push_back(gm.g.squaredNorm());
    running_min = std::min(running_min, out.g_norm_sq.back());
    const double rhs =
        2.0 * out.bl * out.bl * (f0 - f_lower) / (out.l_min * static_cast<double>(k + 1));
    out.bound.push_back(rhs);
    out.margin.push_back(rhs - running_min);
    if (out.margin.back() < -1e-9 * std::max(1.0, rhs)) out.holds = false;
  }
  out.prefix_checked = static_cast<int>(report.iterates.size());
  return out;
}

}  // namespace gnopt
