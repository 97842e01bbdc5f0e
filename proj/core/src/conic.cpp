#include "gnopt/conic.hpp"

#include <ostream>

namespace gnopt {

double ConicProgram::objective(const Eigen::VectorXd& x) const {
  double v = 0.5 * x.dot(quad * x) + linear.dot(x) + constant;
  if (penalty_rows.rows() > 0) {
    const Eigen::VectorXd res = penalty_rows * x + penalty_offset;
    v += penalty_weight.dot(res.cwiseAbs());
  }
  return v;
}

void ConicProgram::validate() const {
  const int d = dim();
  if (quad.rows() != d || quad.cols() != d) throw Error("conic program: P dimension mismatch");
  if (eq_rows.rows() != eq_rhs.size()) throw Error("conic program: A/b mismatch");
  if (eq_rows.rows() > 0 && eq_rows.cols() != d) throw Error("conic program: A column mismatch");
  if (penalty_rows.rows() != penalty_offset.size() ||
      penalty_rows.rows() != penalty_weight.size())
    throw Error("conic program: penalty row mismatch");
  for (const auto& c : cones) {
    if (c.tag == Cone::Zero) throw Error("conic program: equalities belong in eq_rows");
    if (c.rows.cols() != d) throw Error("conic program: cone column mismatch");
    if (c.tag == Cone::Box && (c.lo.array() > c.hi.array()).any())
      throw Error("conic program: infeasible box (lo > hi)");
  }
}

namespace {
void dump_coo(std::ostream& os, const char* name,
              const Eigen::SparseMatrix<double, Eigen::RowMajor>& m) {
  os << name << " " << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int i = 0; i < m.outerSize(); ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
}
}  // namespace

void ConicProgram::dump(std::ostream& os) const {
  os << "conic_program dim " << dim() << "\n";
  Eigen::SparseMatrix<double, Eigen::RowMajor> p_row = quad;
  dump_coo(os, "P", p_row);
  os << "q";
  for (int i = 0; i < linear.size(); ++i) os << " " << linear[i];
  os << "\nconstant " << constant << "\n";
  dump_coo(os, "A", eq_rows);
  os << "b";
  for (int i = 0; i < eq_rhs.size(); ++i) os << " " << eq_rhs[i];
  os << "\n";
  dump_coo(os, "J", penalty_rows);
  os << "r";
  for (int i = 0; i < penalty_offset.size(); ++i) os << " " << penalty_offset[i];
  os << "\nbeta";
  for (int i = 0; i < penalty_weight.size(); ++i) os << " " << penalty_weight[i];
  os << "\ncones " << cones.size() << "\n";
  for (const auto& c : cones) {
    switch (c.tag) {
      case Cone::Box: os << "box " << c.nrows() << "\n"; break;
      case Cone::SecondOrder: os << "soc " << c.nrows() << "\n"; break;
      case Cone::Psd: os << "psd " << c.psd_side << "\n"; break;
      case Cone::Zero: break;
    }
  }
}

Eigen::VectorXd reg_l_vector(const VariableLayout& layout, const RegParams& reg,
                             const std::vector<double>& values) {
  if (values.size() != reg.groups.size()) throw Error("reg values: group count mismatch");
  Eigen::VectorXd l = Eigen::VectorXd::Zero(layout.dim());
  for (size_t g = 0; g < reg.groups.size(); ++g)
    for (const auto& sname : reg.groups[g].slices) {
      const auto& s = layout.slice(sname);
      l.segment(s.offset, s.size).setConstant(values[g]);
    }
  return l;
}

ConicProgram assemble(const ProblemDef& problem, const Eigen::VectorXd& x_k,
                      const PenaltyWeights& w, const Eigen::VectorXd& l_per_var) {
  const int d = problem.dim();
  if (x_k.size() != d) throw Error("assemble: x_k dimension mismatch");
  if (l_per_var.size() != d) throw Error("assemble: prox scale dimension mismatch");

  ConicProgram prog;
  // P = 2 diag(C2) + diag(L), q = C1 - L .* x_k
  Eigen::SparseMatrix<double> p(d, d);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(d);
  for (int i = 0; i < d; ++i) {
    const double v = 2.0 * problem.obj_quad_diag[i] + l_per_var[i];
    trip.emplace_back(i, i, v);
  }
  p.setFromTriplets(trip.begin(), trip.end());
  prog.quad = std::move(p);
  prog.linear = problem.obj_linear - l_per_var.cwiseProduct(x_k);
  prog.constant = problem.obj_const + 0.5 * x_k.dot(l_per_var.cwiseProduct(x_k));
  prog.prox_scale = l_per_var;

  // beta |Psi(x_k) + J (x - x_k)| encoded as J x + r with r = Psi - J x_k
  const Eigen::VectorXd res = problem.psi(x_k);
  if (res.size() != problem.residual_rows()) throw Error("assemble: residual size mismatch");
  Eigen::SparseMatrix<double> jac = problem.psi_jacobian(x_k);
  if (jac.rows() != res.size() || jac.cols() != d)
    throw Error("assemble: Jacobian dimension mismatch");
  prog.penalty_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(jac);
  prog.penalty_offset = res - jac * x_k;
  prog.penalty_weight.resize(res.size());
  {
    int row = 0;
    for (size_t c = 0; c < problem.classes.size(); ++c) {
      prog.penalty_weight.segment(row, problem.classes[c].rows).setConstant(w.beta[c]);
      row += problem.classes[c].rows;
    }
  }

  // Region blocks: Zero blocks become the equality pair, the rest pass through.
  std::vector<Eigen::Triplet<double>> eq_trip;
  std::vector<double> eq_rhs;
  for (const auto& b : problem.omega.blocks) {
    if (b.tag == Cone::Zero) {
      const int base = static_cast<int>(eq_rhs.size());
      for (int i = 0; i < b.rows.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(b.rows, i); it; ++it)
          eq_trip.emplace_back(base + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
      for (int i = 0; i < b.offset.size(); ++i) eq_rhs.push_back(-b.offset[i]);
    } else {
      prog.cones.push_back(b);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<int>(eq_rhs.size()), d);
  a.setFromTriplets(eq_trip.begin(), eq_trip.end());
  prog.eq_rows = std::move(a);
  prog.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), static_cast<int>(eq_rhs.size()));

  prog.validate();
  return prog;
}

ConicProgram projection_program(const ProblemDef& problem, const Eigen::VectorXd& target) {
  const int d = problem.dim();
  ConicProgram prog;
  Eigen::SparseMatrix<double> p(d, d);
  p.setIdentity();
  prog.quad = p;
  prog.linear = -target;
  prog.constant = 0.5 * target.squaredNorm();
  prog.prox_scale = Eigen::VectorXd::Zero(d);
  prog.penalty_rows = Eigen::SparseMatrix<double, Eigen::RowMajor>(0, d);
  prog.penalty_offset = Eigen::VectorXd(0);
  prog.penalty_weight = Eigen::VectorXd(0);

  std::vector<Eigen::Triplet<double>> eq_trip;
  std::vector<double> eq_rhs;
  for (const auto& b : problem.omega.blocks) {
    if (b.tag == Cone::Zero) {
      const int base = static_cast<int>(eq_rhs.size());
      for (int i = 0; i < b.rows.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(b.rows, i); it; ++it)
          eq_trip.emplace_back(base + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
      for (int i = 0; i < b.offset.size(); ++i) eq_rhs.push_back(-b.offset[i]);
    } else {
      prog.cones.push_back(b);
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<int>(eq_rhs.size()), d);
  a.setFromTriplets(eq_trip.begin(), eq_trip.end());
  prog.eq_rows = std::move(a);
  prog.eq_rhs = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), static_cast<int>(eq_rhs.size()));
  return prog;
}

}  // namespace gnopt
