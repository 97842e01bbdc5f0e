#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "gnopt/prox.hpp"
#include "gnopt/region.hpp"

using namespace gnopt;
using gnopt::Error;

namespace {
Eigen::VectorXd randn(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}
}  // namespace

TEST_SUITE_BEGIN("prox");

TEST_CASE("soft threshold basics") {
  Eigen::VectorXd v(4), t(4);
  v << 0.0, 3.0, -0.5, -4.0;
  t << 1.0, 1.0, 1.0, 0.5;
  const Eigen::VectorXd out = prox_l1(v, t);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == doctest::Approx(2.0));
  CHECK(out[2] == 0.0);
  CHECK(out[3] == doctest::Approx(-3.5));
}

TEST_CASE("soft threshold agrees with a 1-d grid oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double v = unif(rng);
    const double t = std::abs(unif(rng)) * 0.5;
    // two-stage refine of argmin 0.5 (y - v)^2 + t |y|
    auto obj = [&](double y) { return 0.5 * (y - v) * (y - v) + t * std::abs(y); };
    double best = 0, bv = obj(0);
    for (int i = 0; i <= 8000; ++i) {
      const double y = -5.0 + i * 10.0 / 8000;
      if (obj(y) < bv) {
        bv = obj(y);
        best = y;
      }
    }
    const double center = best;
    for (int i = 0; i <= 8000; ++i) {
      const double y = center - 2e-3 + i * 4e-3 / 8000;
      if (obj(y) < bv) {
        bv = obj(y);
        best = y;
      }
    }
    Eigen::VectorXd vv(1), tt(1);
    vv << v;
    tt << t;
    CHECK(std::abs(prox_l1(vv, tt)[0] - best) <= 1e-6);
  }
}

TEST_CASE("box projection") {
  Eigen::VectorXd v(3), lo(3), hi(3);
  v << 0.5, 5.0, -9.0;
  lo << 0.0, 0.0, -2.0;
  hi << 2.0, 2.0, 2.0;
  const Eigen::VectorXd out = project_box(v, lo, hi);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 2.0);
  CHECK(out[2] == -2.0);
  CHECK((project_box(out, lo, hi) - out).norm() == 0.0);
}

TEST_CASE("second-order cone projection closed forms") {
  Eigen::VectorXd a(3);
  a << 2.0, 1.0, 0.0;  // interior
  CHECK((project_soc(a) - a).norm() == 0.0);

  Eigen::VectorXd b(3);
  b << -3.0, 1.0, 0.0;  // polar cone
  CHECK(project_soc(b).norm() == 0.0);

  Eigen::VectorXd c(3);
  c << 0.0, 2.0, 0.0;  // boundary case: ((t+||u||)/2)(1, u/||u||)
  const Eigen::VectorXd pc = project_soc(c);
  CHECK(pc[0] == doctest::Approx(1.0));
  CHECK(pc[1] == doctest::Approx(1.0));
  CHECK(pc[2] == doctest::Approx(0.0));

  // nearest-point probe: no random cone point is closer
  std::mt19937_64 rng(3);
  const Eigen::VectorXd z = randn(5, rng, 2.0);
  const Eigen::VectorXd pz = project_soc(z);
  const double d0 = (z - pz).norm();
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd cand = randn(5, rng, 2.0);
    cand[0] = cand.tail(4).norm() + std::abs(cand[0]);  // inside the cone
    CHECK((z - cand).norm() >= d0 - 1e-12);
  }
}

TEST_CASE("psd projection") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
  CHECK((project_psd(id) - id).norm() <= 1e-14);

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = -1;
  const Eigen::MatrixXd pd = project_psd(d);
  CHECK(pd(0, 0) == doctest::Approx(1.0));
  CHECK(pd(1, 1) == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(11);
  Eigen::MatrixXd raw(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) raw(i, j) = randn(1, rng)[0];
  const Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
  const Eigen::MatrixXd proj = project_psd(sym);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(proj);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  const double d0 = (sym - proj).norm();
  for (int k = 0; k < 1000; ++k) {
    Eigen::MatrixXd g(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) g(i, j) = randn(1, rng)[0];
    const Eigen::MatrixXd cand = g * g.transpose();  // random psd
    CHECK((sym - cand).norm() >= d0 - 1e-12);
  }
}

TEST_CASE("projections are idempotent and nonexpansive") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 2500; ++trial) {
    const Eigen::VectorXd a = randn(4, rng, 3.0);
    const Eigen::VectorXd b = randn(4, rng, 3.0);

    const Eigen::VectorXd pa = project_soc(a), pb = project_soc(b);
    CHECK((project_soc(pa) - pa).norm() <= 1e-10);
    CHECK((pa - pb).norm() <= (a - b).norm() + 1e-10);

    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(4, -1.0);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(4, 1.5);
    const Eigen::VectorXd ba = project_box(a, lo, hi), bb = project_box(b, lo, hi);
    CHECK((project_box(ba, lo, hi) - ba).norm() <= 1e-10);
    CHECK((ba - bb).norm() <= (a - b).norm() + 1e-10);

    const Eigen::MatrixXd ma = unsvec(randn(10, rng, 2.0));
    const Eigen::MatrixXd mb = unsvec(randn(10, rng, 2.0));
    const Eigen::MatrixXd qa = project_psd(ma), qb = project_psd(mb);
    CHECK((project_psd(qa) - qa).norm() <= 1e-9);
    CHECK((qa - qb).norm() <= (ma - mb).norm() + 1e-10);
  }
}

TEST_CASE("svec preserves the Frobenius norm") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd v = randn(svec_size(6), rng);
    const Eigen::MatrixXd m = unsvec(v);
    CHECK((svec(m) - v).norm() <= 1e-14);
    CHECK(m.norm() == doctest::Approx(v.norm()));
  }
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("conic");

TEST_CASE("region violation measures") {
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows(2, 2);
  rows.setIdentity();
  ConvexRegion region;
  region.blocks.push_back(make_box_block(rows, Eigen::VectorXd::Zero(2),
                                         Eigen::VectorXd::Constant(2, 0.0),
                                         Eigen::VectorXd::Constant(2, 1.0)));
  Eigen::VectorXd inside(2), outside(2);
  inside << 0.5, 0.5;
  outside << 1.5, -0.25;
  CHECK(region.violation(inside) == 0.0);
  CHECK(region.violation(outside) == doctest::Approx(0.5));
}

TEST_CASE("infeasible box is rejected") {
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows(1, 1);
  rows.setIdentity();
  CHECK_THROWS_AS(make_box_block(rows, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0),
                                 Eigen::VectorXd::Constant(1, 1.0)),
                  gnopt::Error);
}

TEST_SUITE_END();
