#include "gnopt/bmi.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <json.hpp>

#include "gnopt/prox.hpp"

namespace gnopt::bmi {

namespace {

struct Idx {
  int n, nu, ny, sv;
  int t0, f0, p0, s0, dim;
  explicit Idx(const BmiInstance& inst)
      : n(inst.n()), nu(inst.nu()), ny(inst.ny()), sv(svec_size(inst.n())) {
    t0 = 0;
    f0 = 1;
    p0 = 1 + nu * ny;
    s0 = p0 + sv;
    dim = s0 + sv;
  }
};

Eigen::MatrixXd unpack_f(const Idx& ix, const Eigen::VectorXd& x) {
  Eigen::MatrixXd f(ix.nu, ix.ny);
  for (int a = 0; a < ix.nu; ++a)
    for (int b = 0; b < ix.ny; ++b) f(a, b) = x[ix.f0 + a * ix.ny + b];
  return f;
}

// orthonormal symmetric basis element for svec coordinate k
Eigen::MatrixXd sym_basis(int n, int k) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
  int idx = 0;
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i, ++idx)
      if (idx == k) {
        if (i == j) {
          e(i, j) = 1.0;
        } else {
          e(i, j) = inv_rt2;
          e(j, i) = inv_rt2;
        }
        return e;
      }
  throw Error("sym_basis index out of range");
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  for (int i = 0; i < m.rows(); ++i)
    for (int c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
  j["data"] = data;
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.contains(name)) throw ParseError("missing matrix '" + name + "'");
  const auto& mj = j.at(name);
  const int rows = mj.at("rows").get<int>();
  const int cols = mj.at("cols").get<int>();
  const auto data = mj.at("data").get<std::vector<double>>();
  if (static_cast<int>(data.size()) != rows * cols)
    throw ParseError("matrix '" + name + "' data length mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = data[static_cast<size_t>(i * cols + c)];
  return m;
}

}  // namespace

void BmiInstance::validate() const {
  if (a.rows() != a.cols()) throw Error("A must be square");
  if (b.rows() != a.rows()) throw Error("B row count must match A");
  if (c.cols() != a.rows()) throw Error("C column count must match A");
}

BmiInstance instance_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad instance JSON: ") + e.what());
  }
  BmiInstance inst;
  inst.a = matrix_from_json(j, "A");
  inst.b = matrix_from_json(j, "B");
  inst.c = matrix_from_json(j, "C");
  inst.validate();
  return inst;
}

std::string instance_to_json(const BmiInstance& inst) {
  nlohmann::ordered_json j;
  j["A"] = matrix_json(inst.a);
  j["B"] = matrix_json(inst.b);
  j["C"] = matrix_json(inst.c);
  return j.dump(2);
}

VariableLayout bmi_layout(const BmiInstance& inst) {
  const Idx ix(inst);
  VariableLayout lay;
  lay.slices = {{"t", ix.t0, 1}, {"f", ix.f0, ix.nu * ix.ny}, {"p", ix.p0, ix.sv},
                {"s", ix.s0, ix.sv}};
  return lay;
}

Eigen::VectorXd bmi_residual(const BmiInstance& inst, const Eigen::VectorXd& x) {
  const Idx ix(inst);
  const double t = x[ix.t0];
  const Eigen::MatrixXd f = unpack_f(ix, x);
  const Eigen::MatrixXd p = unsvec(x.segment(ix.p0, ix.sv));
  const Eigen::MatrixXd s = unsvec(x.segment(ix.s0, ix.sv));
  const Eigen::MatrixXd acl = inst.a + inst.b * f * inst.c;
  const Eigen::MatrixXd m = acl.transpose() * p + p * acl + 2.0 * t * p + s;
  return svec(m);
}

Eigen::SparseMatrix<double> bmi_jacobian(const BmiInstance& inst, const Eigen::VectorXd& x) {
  const Idx ix(inst);
  const double t = x[ix.t0];
  const Eigen::MatrixXd f = unpack_f(ix, x);
  const Eigen::MatrixXd p = unsvec(x.segment(ix.p0, ix.sv));
  const Eigen::MatrixXd acl = inst.a + inst.b * f * inst.c;

  // dense columns, emitted fully so the sparsity pattern is x-independent
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(ix.sv * ix.dim));
  auto push_col = [&](int col, const Eigen::VectorXd& v) {
    for (int r = 0; r < ix.sv; ++r) trip.emplace_back(r, col, v[r]);
  };
  push_col(ix.t0, svec(2.0 * p));
  for (int a = 0; a < ix.nu; ++a) {
    const Eigen::VectorXd u = p * inst.b.col(a);
    for (int bcol = 0; bcol < ix.ny; ++bcol) {
      const Eigen::VectorXd w = inst.c.row(bcol).transpose();
      const Eigen::MatrixXd dm = w * u.transpose() + u * w.transpose();
      push_col(ix.f0 + a * ix.ny + bcol, svec(dm));
    }
  }
  for (int k = 0; k < ix.sv; ++k) {
    const Eigen::MatrixXd e = sym_basis(ix.n, k);
    const Eigen::MatrixXd dm = acl.transpose() * e + e * acl + 2.0 * t * e;
    push_col(ix.p0 + k, svec(dm));
  }
  for (int k = 0; k < ix.sv; ++k) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(ix.sv);
    col[k] = 1.0;
    push_col(ix.s0 + k, col);
  }
  Eigen::SparseMatrix<double> j(ix.sv, ix.dim);
  j.setFromTriplets(trip.begin(), trip.end());
  return j;
}

ProblemDef build_bmi_problem(const BmiInstance& inst, double f_box, double p_ball,
                             std::uint64_t lipschitz_seed) {
  inst.validate();
  const Idx ix(inst);
  ProblemDef prob;
  prob.layout = bmi_layout(inst);
  prob.obj_quad_diag = Eigen::VectorXd::Zero(ix.dim);
  prob.obj_linear = Eigen::VectorXd::Zero(ix.dim);
  prob.obj_linear[ix.t0] = -1.0;  // maximize t
  prob.classes = {{"bmi", ix.sv}};
  prob.psi = [inst](const Eigen::VectorXd& x) { return bmi_residual(inst, x); };
  prob.psi_jacobian = [inst](const Eigen::VectorXd& x) { return bmi_jacobian(inst, x); };

  using Trip = Eigen::Triplet<double>;
  using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const auto identity_rows = [&](int offset, int count) {
    std::vector<Trip> trip;
    for (int i = 0; i < count; ++i) trip.emplace_back(i, offset + i, 1.0);
    RowMat m(count, ix.dim);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  };
  prob.omega.blocks.push_back(make_psd_block(identity_rows(ix.p0, ix.sv),
                                             Eigen::VectorXd::Zero(ix.sv), ix.n));
  prob.omega.blocks.push_back(make_psd_block(identity_rows(ix.s0, ix.sv),
                                             Eigen::VectorXd::Zero(ix.sv), ix.n));
  {
    const int nf = ix.nu * ix.ny;
    prob.omega.blocks.push_back(make_box_block(
        identity_rows(ix.f0, nf), Eigen::VectorXd::Zero(nf),
        Eigen::VectorXd::Constant(nf, -f_box), Eigen::VectorXd::Constant(nf, f_box)));
  }
  {
    // Frobenius ball on P: ||svec(P)|| <= p_ball as a cone with fixed head
    std::vector<Trip> trip;
    for (int i = 0; i < ix.sv; ++i) trip.emplace_back(1 + i, ix.p0 + i, 1.0);
    RowMat rows(1 + ix.sv, ix.dim);
    rows.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd off = Eigen::VectorXd::Zero(1 + ix.sv);
    off[0] = p_ball;
    prob.omega.blocks.push_back(make_soc_block(rows, off));
  }

  // pairwise sampling around the spectral start; the residual is bilinear
  // so the sampled ratio is tight up to coverage
  {
    std::mt19937_64 rng(lipschitz_seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const Eigen::VectorXd base = spectral_start(inst);
    double lest = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd xa = base, xb = base;
      for (int i = 0; i < ix.dim; ++i) {
        xa[i] += unif(rng);
        xb[i] += unif(rng);
      }
      const Eigen::MatrixXd diff =
          Eigen::MatrixXd(bmi_jacobian(inst, xa)) - Eigen::MatrixXd(bmi_jacobian(inst, xb));
      const double dn = (xa - xb).norm();
      if (dn < 1e-12) continue;
      const double opn = diff.jacobiSvd().singularValues()[0];
      lest = std::max(lest, opn / dn);
    }
    prob.lipschitz_bound = 2.0 * lest;
  }
  prob.validate();
  return prob;
}

Eigen::VectorXd spectral_start(const BmiInstance& inst) {
  const Idx ix(inst);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ix.dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inst.a + inst.a.transpose()));
  x[ix.t0] = eig.eigenvalues().minCoeff();
  const Eigen::VectorXd id = svec(Eigen::MatrixXd::Identity(ix.n, ix.n));
  x.segment(ix.p0, ix.sv) = id;
  x.segment(ix.s0, ix.sv) = id;
  return x;
}

GnConfig make_gn_config(double beta, double l0) {
  GnConfig cfg;
  cfg.weights.beta = {beta};
  cfg.reg.groups = {{"all", {"t", "f", "p", "s"}, l0, l0}};
  cfg.reg.strategy = LStrategy::Geometric;
  cfg.reg.mu = 2.0;
  cfg.reg.carry_over = true;
  cfg.tol_feas = 1e-6;
  cfg.tol_step = 1e-9;
  return cfg;
}

BmiVerification verify_bmi_solution(const BmiInstance& inst, const Eigen::VectorXd& x) {
  const Idx ix(inst);
  BmiVerification out;
  out.t = x[ix.t0];
  out.psi_inf = bmi_residual(inst, x).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(unsvec(x.segment(ix.p0, ix.sv)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unsvec(x.segment(ix.s0, ix.sv)));
  out.lambda_min_p = ep.eigenvalues().minCoeff();
  out.lambda_min_s = es.eigenvalues().minCoeff();
  const Eigen::MatrixXd acl = inst.a + inst.b * unpack_f(ix, x) * inst.c;
  Eigen::EigenSolver<Eigen::MatrixXd> ecl(acl);
  out.closed_loop_abscissa = ecl.eigenvalues().real().maxCoeff();
  return out;
}

}  // namespace gnopt::bmi
