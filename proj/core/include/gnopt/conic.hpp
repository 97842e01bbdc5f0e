#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "gnopt/problem.hpp"
#include "gnopt/region.hpp"

namespace gnopt {

/// One strongly convex subproblem in splitting-ready form:
///
///   min  1/2 x'Px + q'x + c + sum_i beta_i |J_i x + r_i|
///   s.t. A x = b,  cone blocks (Box / SecondOrder / Psd)
///
/// The proximal scaling L is already folded into P, q, c; `prox_scale`
/// records it for inspection.
struct ConicProgram {
  Eigen::SparseMatrix<double> quad;  // P, full symmetric
  Eigen::VectorXd linear;            // q
  double constant = 0.0;

  Eigen::SparseMatrix<double, Eigen::RowMajor> eq_rows;  // A
  Eigen::VectorXd eq_rhs;                                // b

  Eigen::SparseMatrix<double, Eigen::RowMajor> penalty_rows;  // J
  Eigen::VectorXd penalty_offset;                             // r
  Eigen::VectorXd penalty_weight;                             // beta per row

  std::vector<ConeBlock> cones;
  Eigen::VectorXd prox_scale;

  int dim() const { return static_cast<int>(linear.size()); }
  double objective(const Eigen::VectorXd& x) const;
  void validate() const;

  /// Plain-text sparse dump (dimension header, COO triplets, cone list)
  /// for cross-checks against external solvers.
  void dump(std::ostream& os) const;
};

/// Builds the Gauss-Newton subproblem at linearization point x_k:
/// minimizer equals V_L(x_k). `l_per_var` is the per-variable proximal
/// weight (see reg_l_vector).
ConicProgram assemble(const ProblemDef& problem, const Eigen::VectorXd& x_k,
                      const PenaltyWeights& w, const Eigen::VectorXd& l_per_var);

/// Euclidean projection program onto the region of `problem` (used by
/// restarts and test-point sampling).
ConicProgram projection_program(const ProblemDef& problem, const Eigen::VectorXd& target);

}  // namespace gnopt
