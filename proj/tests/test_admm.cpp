#include <doctest.h>

#include <random>
#include <sstream>

#include "gnopt/admm.hpp"
#include "gnopt/prox.hpp"
#include "toy_problems.hpp"

using namespace gnopt;
using gnopt_test::kkt_solve;
using gnopt_test::random_eq_qp;
using gnopt_test::RandomQp;

namespace {
AdmmSettings tight() {
  AdmmSettings s;
  s.adaptive_rho = true;
  return s;
}
}  // namespace

TEST_SUITE_BEGIN("admm");

TEST_CASE("random strongly convex QPs match a dense KKT solve") {
  AdmmSolver solver;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const RandomQp qp = random_eq_qp(12, 4, seed);
    const Eigen::VectorXd direct = kkt_solve(qp, qp.prog.linear);
    const AdmmResult res = solver.solve(qp.prog, tight(), nullptr);
    CHECK(res.converged);
    CHECK((res.x - direct).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("box-constrained scalar quadratic") {
  // f = x^2, box [1, 2]: unconstrained optimum 0 projects to 1
  ConicProgram prog;
  prog.quad = Eigen::SparseMatrix<double>(1, 1);
  prog.quad.insert(0, 0) = 2.0;
  prog.linear = Eigen::VectorXd::Zero(1);
  prog.eq_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, 1);
  prog.eq_rhs = Eigen::VectorXd(0);
  prog.penalty_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, 1);
  prog.penalty_offset = Eigen::VectorXd(0);
  prog.penalty_weight = Eigen::VectorXd(0);
  prog.prox_scale = Eigen::VectorXd::Zero(1);
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows(1, 1);
  rows.setIdentity();
  prog.cones.push_back(make_box_block(rows, Eigen::VectorXd::Zero(1),
                                      Eigen::VectorXd::Constant(1, 1.0),
                                      Eigen::VectorXd::Constant(1, 2.0)));
  AdmmSolver solver;
  const AdmmResult res = solver.solve(prog, tight(), nullptr);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("weighted l1 term reproduces the soft threshold") {
  // min 0.5||x - a||^2 + sum beta_i |x_i|
  const int n = 6;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  Eigen::VectorXd a(n), beta(n);
  for (int i = 0; i < n; ++i) {
    a[i] = unif(rng);
    beta[i] = 0.25 + std::abs(unif(rng)) * 0.3;
  }
  ConicProgram prog;
  prog.quad = Eigen::SparseMatrix<double>(n, n);
  prog.quad.setIdentity();
  prog.linear = -a;
  prog.eq_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, n);
  prog.eq_rhs = Eigen::VectorXd(0);
  Eigen::SparseMatrix<double, Eigen::RowMajor> jrows(n, n);
  jrows.setIdentity();
  prog.penalty_rows = jrows;
  prog.penalty_offset = Eigen::VectorXd::Zero(n);
  prog.penalty_weight = beta;
  prog.prox_scale = Eigen::VectorXd::Zero(n);
  AdmmSolver solver;
  AdmmSettings s = tight();
  s.tol_abs = 1e-10;
  s.tol_rel = 1e-9;
  const AdmmResult res = solver.solve(prog, s, nullptr);
  const Eigen::VectorXd expect = prox_l1(a, beta);
  CHECK((res.x - expect).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("cone-constrained projections match the closed-form kernels") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);

  SUBCASE("second-order") {
    const int n = 4;
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = g(rng);
    ConicProgram prog;
    prog.quad = Eigen::SparseMatrix<double>(n, n);
    prog.quad.setIdentity();
    prog.linear = -a;
    prog.eq_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, n);
    prog.eq_rhs = Eigen::VectorXd(0);
    prog.penalty_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, n);
    prog.penalty_offset = Eigen::VectorXd(0);
    prog.penalty_weight = Eigen::VectorXd(0);
    prog.prox_scale = Eigen::VectorXd::Zero(n);
    Eigen::SparseMatrix<double, Eigen::RowMajor> rows(n, n);
    rows.setIdentity();
    prog.cones.push_back(make_soc_block(rows, Eigen::VectorXd::Zero(n)));
    AdmmSolver solver;
    const AdmmResult res = solver.solve(prog, tight(), nullptr);
    CHECK((res.x - project_soc(a)).cwiseAbs().maxCoeff() <= 1e-6);
  }

  SUBCASE("psd") {
    const int side = 3, n = svec_size(side);
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a[i] = g(rng);
    ConicProgram prog;
    prog.quad = Eigen::SparseMatrix<double>(n, n);
    prog.quad.setIdentity();
    prog.linear = -a;
    prog.eq_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, n);
    prog.eq_rhs = Eigen::VectorXd(0);
    prog.penalty_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, n);
    prog.penalty_offset = Eigen::VectorXd(0);
    prog.penalty_weight = Eigen::VectorXd(0);
    prog.prox_scale = Eigen::VectorXd::Zero(n);
    Eigen::SparseMatrix<double, Eigen::RowMajor> rows(n, n);
    rows.setIdentity();
    prog.cones.push_back(make_psd_block(rows, Eigen::VectorXd::Zero(n), side));
    AdmmSolver solver;
    const AdmmResult res = solver.solve(prog, tight(), nullptr);
    CHECK((res.x - svec(project_psd(unsvec(a)))).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("warm start from the exact solution re-certifies quickly") {
  const RandomQp qp = random_eq_qp(10, 3, 42);
  AdmmSolver solver;
  const AdmmResult first = solver.solve(qp.prog, tight(), nullptr);
  const AdmmResult again = solver.solve(qp.prog, tight(), &first.state);
  CHECK(again.iters <= 25);
  CHECK((again.x - first.x).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(again.iters <= first.iters);
}

TEST_CASE("dimension-incompatible warm starts are ignored with a counter") {
  const RandomQp qp = random_eq_qp(10, 3, 43);
  SplitState bogus;
  bogus.x = Eigen::VectorXd::Zero(4);
  bogus.z = Eigen::VectorXd::Zero(2);
  bogus.y = Eigen::VectorXd::Zero(2);
  AdmmSolver solver;
  const AdmmResult res = solver.solve(qp.prog, tight(), &bogus);
  CHECK(res.converged);
  CHECK(res.warm_rejected == 1);
}

TEST_CASE("returned point is near-optimal against random feasible directions") {
  const RandomQp qp = random_eq_qp(10, 3, 44);
  AdmmSolver solver;
  const AdmmResult res = solver.solve(qp.prog, tight(), nullptr);
  // feasible points: x + nullspace perturbations of A
  Eigen::FullPivLU<Eigen::MatrixXd> lu(qp.a_dense);
  const Eigen::MatrixXd ns = lu.kernel();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd w(ns.cols());
    for (int i = 0; i < w.size(); ++i) w[i] = g(rng);
    const Eigen::VectorXd y = res.x + ns * w;
    CHECK(qp.prog.objective(y) >= res.objective - 1e-5 * (1.0 + std::abs(res.objective)));
  }
}

TEST_CASE("nonconvergence carries the best iterate") {
  const RandomQp qp = random_eq_qp(12, 4, 45);
  AdmmSettings s = tight();
  s.max_inner = 1;
  s.check_every = 1;
  AdmmSolver solver;
  CHECK_THROWS_AS(solver.solve(qp.prog, s, nullptr), SubsolverError);
  try {
    solver.solve(qp.prog, s, nullptr);
  } catch (const SubsolverError& e) {
    CHECK(e.best().size() == 12);
    CHECK(e.iterations() == 1);
  }
}

TEST_CASE("plain-text dump has the documented sections") {
  const RandomQp qp = random_eq_qp(4, 2, 46);
  std::ostringstream os;
  qp.prog.dump(os);
  const std::string text = os.str();
  CHECK(text.find("conic_program dim 4") != std::string::npos);
  CHECK(text.find("\nP 4 4") != std::string::npos);
  CHECK(text.find("\nA 2 4") != std::string::npos);
  CHECK(text.find("cones 0") != std::string::npos);
}

TEST_SUITE_END();
