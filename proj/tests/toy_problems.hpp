#pragma once

#include <random>
#include <string>

#include <Eigen/Dense>

#include "gnopt/gauss_newton.hpp"

namespace gnopt_test {

inline std::string data_dir() { return GNOPT_DATA_DIR; }
inline std::string cli_path() { return GNOPT_CLI_PATH; }

// min x1 s.t. x1^2 + x2^2 - 1 = 0, box [-2, 2]^2; global optimum (-1, 0).
inline gnopt::ProblemDef circle_problem() {
  using namespace gnopt;
  ProblemDef p;
  p.layout.slices = {{"all", 0, 2}};
  p.obj_quad_diag = Eigen::VectorXd::Zero(2);
  p.obj_linear = Eigen::VectorXd::Zero(2);
  p.obj_linear[0] = 1.0;
  p.classes = {{"circle", 1}};
  p.psi = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(1);
    r[0] = x.squaredNorm() - 1.0;
    return r;
  };
  p.psi_jacobian = [](const Eigen::VectorXd& x) {
    Eigen::SparseMatrix<double> j(1, 2);
    std::vector<Eigen::Triplet<double>> t{{0, 0, 2 * x[0]}, {0, 1, 2 * x[1]}};
    j.setFromTriplets(t.begin(), t.end());
    return j;
  };
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows(2, 2);
  rows.setIdentity();
  p.omega.blocks.push_back(make_box_block(rows, Eigen::VectorXd::Zero(2),
                                          Eigen::VectorXd::Constant(2, -2.0),
                                          Eigen::VectorXd::Constant(2, 2.0)));
  p.lipschitz_bound = 2.0;
  return p;
}

inline gnopt::GnConfig circle_config(double beta = 10.0) {
  gnopt::GnConfig cfg;
  cfg.weights.beta = {beta};
  cfg.reg.groups = {{"all", {"all"}, 1.0, 1.0}};
  cfg.reg.strategy = gnopt::LStrategy::Geometric;
  cfg.reg.mu = 2.0;
  cfg.tol_feas = 1e-9;
  cfg.tol_step = 1e-12;
  cfg.max_outer = 200;
  return cfg;
}

// dense two-stage grid minimization of Q over the box [-2,2]^2
template <typename F>
Eigen::Vector2d grid_min_2d(F q, double lo = -2.0, double hi = 2.0) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d arg(0, 0);
  const int n1 = 400;
  for (int i = 0; i <= n1; ++i)
    for (int j = 0; j <= n1; ++j) {
      const double x = lo + (hi - lo) * i / n1;
      const double y = lo + (hi - lo) * j / n1;
      const double v = q(Eigen::Vector2d(x, y));
      if (v < best) {
        best = v;
        arg = {x, y};
      }
    }
  const double step = (hi - lo) / n1;
  for (int stage = 0; stage < 3; ++stage) {
    const double w = step * std::pow(0.02, stage);
    double b2 = best;
    Eigen::Vector2d a2 = arg;
    const int n2 = 200;
    for (int i = 0; i <= n2; ++i)
      for (int j = 0; j <= n2; ++j) {
        const double x = std::clamp(arg[0] - w + 2 * w * i / n2, lo, hi);
        const double y = std::clamp(arg[1] - w + 2 * w * j / n2, lo, hi);
        const double v = q(Eigen::Vector2d(x, y));
        if (v < b2) {
          b2 = v;
          a2 = {x, y};
        }
      }
    best = b2;
    arg = a2;
  }
  return arg;
}

// strongly convex random QP with equality constraints, for KKT cross-checks
struct RandomQp {
  gnopt::ConicProgram prog;
  Eigen::MatrixXd p_dense;
  Eigen::MatrixXd a_dense;
  Eigen::VectorXd b;
};

inline RandomQp random_eq_qp(int n, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd base(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) base(i, j) = gauss(rng);
  RandomQp qp;
  qp.p_dense = base * base.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  qp.a_dense.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) qp.a_dense(i, j) = gauss(rng);
  qp.b.resize(m);
  for (int i = 0; i < m; ++i) qp.b[i] = gauss(rng);

  gnopt::ConicProgram& prog = qp.prog;
  prog.quad = qp.p_dense.sparseView();
  prog.linear.resize(n);
  for (int i = 0; i < n; ++i) prog.linear[i] = gauss(rng);
  prog.eq_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(qp.a_dense.sparseView());
  prog.eq_rhs = qp.b;
  prog.penalty_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, n);
  prog.penalty_offset = Eigen::VectorXd(0);
  prog.penalty_weight = Eigen::VectorXd(0);
  prog.prox_scale = Eigen::VectorXd::Zero(n);
  return qp;
}

inline Eigen::VectorXd kkt_solve(const RandomQp& qp, const Eigen::VectorXd& q) {
  const int n = static_cast<int>(qp.p_dense.rows());
  const int m = static_cast<int>(qp.a_dense.rows());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = qp.p_dense;
  kkt.topRightCorner(n, m) = qp.a_dense.transpose();
  kkt.bottomLeftCorner(m, n) = qp.a_dense;
  Eigen::VectorXd rhs(n + m);
  rhs.head(n) = -q;
  rhs.tail(m) = qp.b;
  return kkt.fullPivLu().solve(rhs).head(n);
}

}  // namespace gnopt_test
