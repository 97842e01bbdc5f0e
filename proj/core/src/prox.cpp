#include "gnopt/prox.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "gnopt/errors.hpp"

namespace gnopt {

Eigen::VectorXd prox_l1(const Eigen::VectorXd& v, const Eigen::VectorXd& thresh) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - thresh[i];
    out[i] = a > 0 ? (v[i] > 0 ? a : -a) : 0.0;
  }
  return out;
}

Eigen::VectorXd project_box(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

Eigen::VectorXd project_soc(const Eigen::VectorXd& tu) {
  const double t = tu[0];
  const auto u = tu.tail(tu.size() - 1);
  const double un = u.norm();
  if (un <= t) return tu;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(tu.size());
  if (un <= -t) return out;
  const double s = 0.5 * (t + un);
  out[0] = s;
  out.tail(tu.size() - 1) = (s / un) * u;
  return out;
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed in project_psd");
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

int svec_size(int side) { return side * (side + 1) / 2; }

int svec_side(int size) {
  const int side = static_cast<int>(std::round((std::sqrt(8.0 * size + 1.0) - 1.0) / 2.0));
  if (svec_size(side) != size) throw Error("svec length is not triangular");
  return side;
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  const double rt2 = std::sqrt(2.0);
  Eigen::VectorXd v(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) v[k++] = i == j ? m(i, j) : rt2 * m(i, j);
  return v;
}

Eigen::MatrixXd unsvec(const Eigen::VectorXd& v) {
  const int n = svec_side(static_cast<int>(v.size()));
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      const double a = i == j ? v[k] : inv_rt2 * v[k];
      m(i, j) = a;
      m(j, i) = a;
      ++k;
    }
  return m;
}

}  // namespace gnopt
