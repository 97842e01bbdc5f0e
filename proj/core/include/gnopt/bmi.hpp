#pragma once

#include <string>

#include <Eigen/Core>

#include "gnopt/gauss_newton.hpp"

namespace gnopt::bmi {

/// Static output-feedback decay-rate instance: maximize t subject to
/// (A+BFC)'P + P(A+BFC) + 2tP preceq 0 with P psd, via the slack
/// reformulation S = -[(A+BFC)'P + P(A+BFC) + 2tP].
struct BmiInstance {
  Eigen::MatrixXd a;  // n x n
  Eigen::MatrixXd b;  // n x nu
  Eigen::MatrixXd c;  // ny x n

  int n() const { return static_cast<int>(a.rows()); }
  int nu() const { return static_cast<int>(b.cols()); }
  int ny() const { return static_cast<int>(c.rows()); }
  void validate() const;
};

/// JSON form: {"A": {"rows": n, "cols": n, "data": [row-major]}, "B": ..., "C": ...}
BmiInstance instance_from_json(const std::string& text);
std::string instance_to_json(const BmiInstance& inst);

/// Decision layout: t (1), f (nu*ny row-major), p and s as scaled
/// symmetric vectorizations of length n(n+1)/2.
VariableLayout bmi_layout(const BmiInstance& inst);

Eigen::VectorXd bmi_residual(const BmiInstance& inst, const Eigen::VectorXd& x);
Eigen::SparseMatrix<double> bmi_jacobian(const BmiInstance& inst, const Eigen::VectorXd& x);

/// f(x) = -t; region = {P psd, S psd, |F|_inf <= f_box, ||P||_F <= p_ball}.
/// The Jacobian Lipschitz constant is estimated by pairwise sampling
/// (exact up to sampling for a bilinear map) and doubled for safety.
ProblemDef build_bmi_problem(const BmiInstance& inst, double f_box = 1e3, double p_ball = 1e3,
                             std::uint64_t lipschitz_seed = 1234);

/// t0 = lambda_min((A+A')/2), P0 = S0 = I, F0 = 0.
Eigen::VectorXd spectral_start(const BmiInstance& inst);

GnConfig make_gn_config(double beta = 1000.0, double l0 = 1.0);

struct BmiVerification {
  double t = 0;
  double psi_inf = 0;
  double lambda_min_p = 0;
  double lambda_min_s = 0;
  double closed_loop_abscissa = 0;  // max Re lambda(A + BFC)
  bool feasible(double tol) const {
    return psi_inf <= tol && lambda_min_p >= -10 * tol && lambda_min_s >= -10 * tol;
  }
};
BmiVerification verify_bmi_solution(const BmiInstance& inst, const Eigen::VectorXd& x);

}  // namespace gnopt::bmi
