#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "gnopt/conic.hpp"

namespace gnopt {

struct AdmmSettings {
  double rho = 1.0;
  double sigma = 1e-6;
  double alpha = 1.0;  // relaxation weight (1 = plain splitting step)
  double tol_abs = 1e-8;
  double tol_rel = 1e-6;
  int max_inner = 400000;
  bool adaptive_rho = false;  // residual balancing, factor 2
  int check_every = 25;
  double eq_rho_factor = 1e3;  // stiffer penalty on equality rows
  bool scale = true;           // Ruiz equilibration
  int scale_iters = 10;
};

/// Primal/dual state of the splitting, in unscaled coordinates. Reusable
/// as a warm start for a structurally identical program.
struct SplitState {
  Eigen::VectorXd x;  // primal
  Eigen::VectorXd z;  // split image copy
  Eigen::VectorXd y;  // dual, one multiplier per stacked row
  double rho = 0.0;
  int rho_updates = 0;

  bool empty() const { return x.size() == 0; }
};

struct AdmmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd duals;
  SplitState state;
  int iters = 0;
  bool converged = false;
  double prim_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
  int warm_rejected = 0;  // incremented when a warm start was dimension-incompatible
};

namespace detail {

enum class RowKind { Eq, L1, Box, Soc, Psd };

/// Row-stacked view of a ConicProgram: M x + h = z with z constrained
/// blockwise (zero cone, weighted l1 prox, box, second-order, psd).
struct Stacked {
  struct Block {
    RowKind kind;
    int start = 0;
    int rows = 0;
    int psd_side = 0;
    Eigen::VectorXd lo, hi;  // Box only
  };
  Eigen::SparseMatrix<double> m;
  Eigen::VectorXd h;
  Eigen::VectorXd beta;  // per-row l1 weight, zero outside L1 rows
  std::vector<Block> blocks;
};

Stacked stack_rows(const ConicProgram& prog);

struct Equilibration {
  Eigen::VectorXd d;  // column scaling, x = d .* x_scaled
  Eigen::VectorXd e;  // row scaling
  double c = 1.0;     // cost scaling
};

/// Modified Ruiz equilibration of (P, q, M, h). SecondOrder/Psd blocks are
/// scaled uniformly per block so cone membership is preserved; box bounds
/// and l1 weights are adjusted in place.
Equilibration ruiz_scale(Eigen::SparseMatrix<double>& p, Eigen::VectorXd& q,
                         Stacked& st, int iters);

}  // namespace detail

/// Operator-splitting solver for ConicProgram. Keeps the symbolic KKT
/// factorization across calls with an unchanged sparsity pattern.
class AdmmSolver {
 public:
  /// Throws SubsolverError when max_inner is reached without convergence.
  AdmmResult solve(const ConicProgram& prog, const AdmmSettings& settings,
                   const SplitState* warm = nullptr);

  long total_iterations() const { return total_iters_; }
  int factorizations() const { return factor_count_; }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt_;
  Eigen::SparseMatrix<double> kkt_;
  std::uint64_t pattern_key_ = 0;
  long total_iters_ = 0;
  int factor_count_ = 0;
};

}  // namespace gnopt
