#include <algorithm>
#include <cmath>

#include "gnopt/admm.hpp"

namespace gnopt::detail {

Stacked stack_rows(const ConicProgram& prog) {
  const int d = prog.dim();
  Stacked st;
  int rows = static_cast<int>(prog.eq_rows.rows() + prog.penalty_rows.rows());
  for (const auto& c : prog.cones) rows += static_cast<int>(c.nrows());

  std::vector<Eigen::Triplet<double>> trip;
  st.h.resize(rows);
  st.beta = Eigen::VectorXd::Zero(rows);
  int at = 0;

  auto append = [&](const Eigen::SparseMatrix<double, Eigen::RowMajor>& m,
                    const Eigen::VectorXd& off) {
    for (int i = 0; i < m.outerSize(); ++i)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it)
        trip.emplace_back(at + static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
    st.h.segment(at, off.size()) = off;
    at += static_cast<int>(off.size());
  };

  if (prog.eq_rows.rows() > 0) {
    st.blocks.push_back({RowKind::Eq, at, static_cast<int>(prog.eq_rows.rows()), 0, {}, {}});
    append(prog.eq_rows, -prog.eq_rhs);  // image A x - b must vanish
  }
  if (prog.penalty_rows.rows() > 0) {
    const int start = at;
    st.blocks.push_back({RowKind::L1, at, static_cast<int>(prog.penalty_rows.rows()), 0, {}, {}});
    append(prog.penalty_rows, prog.penalty_offset);
    st.beta.segment(start, prog.penalty_rows.rows()) = prog.penalty_weight;
  }
  for (const auto& c : prog.cones) {
    Stacked::Block b;
    b.start = at;
    b.rows = static_cast<int>(c.nrows());
    switch (c.tag) {
      case Cone::Box:
        b.kind = RowKind::Box;
        b.lo = c.lo;
        b.hi = c.hi;
        break;
      case Cone::SecondOrder:
        b.kind = RowKind::Soc;
        break;
      case Cone::Psd:
        b.kind = RowKind::Psd;
        b.psd_side = c.psd_side;
        break;
      case Cone::Zero:
        throw Error("zero cone in cone list");
    }
    st.blocks.push_back(std::move(b));
    append(c.rows, c.offset);
  }

  st.m.resize(rows, d);
  st.m.setFromTriplets(trip.begin(), trip.end());
  return st;
}

namespace {
constexpr double kMinScale = 1e-4;
constexpr double kMaxScale = 1e4;

double limit(double v) { return std::clamp(v, kMinScale, kMaxScale); }
}  // namespace

Equilibration ruiz_scale(Eigen::SparseMatrix<double>& p, Eigen::VectorXd& q, Stacked& st,
                         int iters) {
  const int n = static_cast<int>(p.rows());
  const int m = static_cast<int>(st.m.rows());
  Equilibration eq;
  eq.d = Eigen::VectorXd::Ones(n);
  eq.e = Eigen::VectorXd::Ones(m);
  eq.c = 1.0;

  Eigen::VectorXd col_norm(n), row_norm(m), delta_d(n), delta_e(m);
  for (int pass = 0; pass < iters; ++pass) {
    // inf-norms of the KKT columns [P; M] and rows of M
    col_norm.setZero();
    row_norm.setZero();
    for (int j = 0; j < p.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p, j); it; ++it)
        col_norm[j] = std::max(col_norm[j], std::abs(it.value()));
    for (int j = 0; j < st.m.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(st.m, j); it; ++it) {
        col_norm[j] = std::max(col_norm[j], std::abs(it.value()));
        row_norm[it.row()] = std::max(row_norm[it.row()], std::abs(it.value()));
      }
    // structurally empty rows/columns keep their scale
    for (int j = 0; j < n; ++j)
      delta_d[j] = col_norm[j] < 1e-12 ? 1.0 : 1.0 / limit(std::sqrt(col_norm[j]));
    for (int i = 0; i < m; ++i)
      delta_e[i] = row_norm[i] < 1e-12 ? 1.0 : 1.0 / limit(std::sqrt(row_norm[i]));

    // cones scale uniformly per block (geometric mean over nonempty rows)
    for (const auto& b : st.blocks) {
      if (b.kind != RowKind::Soc && b.kind != RowKind::Psd) continue;
      double logsum = 0.0;
      int nonempty = 0;
      for (int i = 0; i < b.rows; ++i)
        if (row_norm[b.start + i] >= 1e-12) {
          logsum += std::log(delta_e[b.start + i]);
          ++nonempty;
        }
      const double g = nonempty ? std::exp(logsum / nonempty) : 1.0;
      delta_e.segment(b.start, b.rows).setConstant(g);
    }

    // apply
    for (int j = 0; j < p.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p, j); it; ++it)
        it.valueRef() *= delta_d[it.row()] * delta_d[it.col()];
    for (int j = 0; j < st.m.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(st.m, j); it; ++it)
        it.valueRef() *= delta_e[it.row()] * delta_d[j];
    q.array() *= delta_d.array();
    st.h.array() *= delta_e.array();
    eq.d.array() *= delta_d.array();
    eq.e.array() *= delta_e.array();

    // cost scaling toward unit gradient magnitude
    double pmean = 0.0;
    for (int j = 0; j < n; ++j) {
      double cn = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(p, j); it; ++it)
        cn = std::max(cn, std::abs(it.value()));
      pmean += cn;
    }
    pmean /= std::max(1, n);
    const double qinf = q.size() ? q.cwiseAbs().maxCoeff() : 0.0;
    const double gamma = 1.0 / limit(std::max({pmean, qinf, 1e-8}));
    p *= gamma;
    q *= gamma;
    eq.c *= gamma;
  }

  // carry scaling into bounds and weights
  for (auto& b : st.blocks) {
    if (b.kind == RowKind::Box) {
      b.lo.array() *= eq.e.segment(b.start, b.rows).array();
      b.hi.array() *= eq.e.segment(b.start, b.rows).array();
    }
  }
  for (int i = 0; i < m; ++i)
    if (st.beta[i] != 0.0) st.beta[i] *= eq.c / eq.e[i];
  return eq;
}

}  // namespace gnopt::detail
