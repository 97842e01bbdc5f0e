#include "gnopt/region.hpp"

#include <Eigen/Eigenvalues>

#include "gnopt/errors.hpp"
#include "gnopt/prox.hpp"

namespace gnopt {

double ConeBlock::violation(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd v = image(x);
  switch (tag) {
    case Cone::Zero:
      return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    case Cone::Box: {
      double worst = 0.0;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        worst = std::max(worst, lo[i] - v[i]);
        worst = std::max(worst, v[i] - hi[i]);
      }
      return worst;
    }
    case Cone::SecondOrder:
      return std::max(0.0, v.tail(v.size() - 1).norm() - v[0]);
    case Cone::Psd: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(unsvec(v));
      return std::max(0.0, -eig.eigenvalues().minCoeff());
    }
  }
  return 0.0;
}

namespace {
ConeBlock base_block(Cone tag, Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                     Eigen::VectorXd offset) {
  if (rows.rows() != offset.size()) throw Error("cone block: rows/offset size mismatch");
  ConeBlock b;
  b.tag = tag;
  b.rows = std::move(rows);
  b.offset = std::move(offset);
  return b;
}
}  // namespace

ConeBlock make_zero_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                          Eigen::VectorXd offset) {
  return base_block(Cone::Zero, std::move(rows), std::move(offset));
}

ConeBlock make_box_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                         Eigen::VectorXd offset, Eigen::VectorXd lo, Eigen::VectorXd hi) {
  ConeBlock b = base_block(Cone::Box, std::move(rows), std::move(offset));
  if (lo.size() != b.nrows() || hi.size() != b.nrows())
    throw Error("box block: bound size mismatch");
  if ((lo.array() > hi.array()).any()) throw Error("box block: lo > hi");
  b.lo = std::move(lo);
  b.hi = std::move(hi);
  return b;
}

ConeBlock make_soc_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                         Eigen::VectorXd offset) {
  if (rows.rows() < 2) throw Error("second-order cone block needs at least two rows");
  return base_block(Cone::SecondOrder, std::move(rows), std::move(offset));
}

ConeBlock make_psd_block(Eigen::SparseMatrix<double, Eigen::RowMajor> rows,
                         Eigen::VectorXd offset, int side) {
  ConeBlock b = base_block(Cone::Psd, std::move(rows), std::move(offset));
  if (b.nrows() != svec_size(side)) throw Error("psd block: svec length mismatch");
  b.psd_side = side;
  return b;
}

double ConvexRegion::violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.violation(x));
  return worst;
}

Eigen::Index ConvexRegion::total_rows() const {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.nrows();
  return n;
}

}  // namespace gnopt
