#pragma once

#include <Eigen/Core>

namespace gnopt {

/// Componentwise soft threshold: sign(v_i) * max(|v_i| - t_i, 0).
Eigen::VectorXd prox_l1(const Eigen::VectorXd& v, const Eigen::VectorXd& thresh);

Eigen::VectorXd project_box(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi);

/// Euclidean projection onto {(t, u) : ||u|| <= t}. Input is stacked [t; u].
Eigen::VectorXd project_soc(const Eigen::VectorXd& tu);

/// Frobenius-nearest positive semidefinite matrix (eigenvalue clipping).
/// The input is symmetrized first.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m);

// Scaled symmetric vectorization: upper triangle, column-major, off-diagonal
// entries multiplied by sqrt(2) so that ||svec(M)||_2 = ||M||_F.
int svec_size(int side);
int svec_side(int size);
Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd unsvec(const Eigen::VectorXd& v);

}  // namespace gnopt
