#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "gnopt/errors.hpp"

namespace gnopt {

enum class Cone { Zero, Box, SecondOrder, Psd };

/// One convex block: the affine image rows*x + offset must lie in the cone.
/// Zero encodes affine equalities; Box carries bounds; SecondOrder stacks
/// [t; u]; Psd rows hold a scaled symmetric vectorization (see prox.hpp).
struct ConeBlock {
  Cone tag = Cone::Zero;
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows;
  Eigen::VectorXd offset;
  Eigen::VectorXd lo, hi;  // Box only
  int psd_side = 0;        // Psd only

  Eigen::Index nrows() const { return rows.rows(); }
  Eigen::VectorXd image(const Eigen::VectorXd& x) const { return rows * x + offset; }
  /// Distance-like violation of cone membership at x (0 when inside).
  double violation(const Eigen::VectorXd& x) const;
};

ConeBlock make_zero_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                          Eigen::VectorXd offset);
ConeBlock make_box_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                         Eigen::VectorXd offset, Eigen::VectorXd lo, Eigen::VectorXd hi);
ConeBlock make_soc_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                         Eigen::VectorXd offset);
ConeBlock make_psd_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                         Eigen::VectorXd offset, int side);

/// An ordered list of convex blocks describing the feasible region.
struct ConvexRegion {
  std::vector<ConeBlock> blocks;
  double violation(const Eigen::VectorXd& x) const;
  Eigen::Index total_rows() const;
};

}  // namespace gnopt
