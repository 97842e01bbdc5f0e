#include "gnopt/admm.hpp"

#include <cmath>
#include <sstream>

#include "gnopt/prox.hpp"

namespace gnopt {

using detail::RowKind;
using detail::Stacked;

namespace {

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t pattern_hash(const Eigen::SparseMatrix<double>& k) {
  std::uint64_t h = fnv_mix(1469598103934665603ull, static_cast<std::uint64_t>(k.rows()));
  h = fnv_mix(h, static_cast<std::uint64_t>(k.nonZeros()));
  const int* outer = k.outerIndexPtr();
  for (int i = 0; i <= k.outerSize(); ++i) h = fnv_mix(h, static_cast<std::uint64_t>(outer[i]));
  const int* inner = k.innerIndexPtr();
  for (int i = 0; i < k.nonZeros(); ++i) h = fnv_mix(h, static_cast<std::uint64_t>(inner[i]));
  return h;
}

// z-step: blockwise prox of the split image. v and the returned vector are
// in scaled row coordinates; cones are invariant to the per-block uniform
// scaling so projections apply directly.
void apply_prox(const Stacked& st, const Eigen::VectorXd& r_pen, const Eigen::VectorXd& v,
                Eigen::VectorXd& z) {
  for (const auto& b : st.blocks) {
    auto seg = v.segment(b.start, b.rows);
    switch (b.kind) {
      case RowKind::Eq:
        z.segment(b.start, b.rows).setZero();
        break;
      case RowKind::L1: {
        for (int i = 0; i < b.rows; ++i) {
          const int row = b.start + i;
          const double t = st.beta[row] / r_pen[row];
          const double a = std::abs(v[row]) - t;
          z[row] = a > 0 ? (v[row] > 0 ? a : -a) : 0.0;
        }
        break;
      }
      case RowKind::Box:
        z.segment(b.start, b.rows) = seg.cwiseMax(b.lo).cwiseMin(b.hi);
        break;
      case RowKind::Soc:
        z.segment(b.start, b.rows) = project_soc(seg);
        break;
      case RowKind::Psd:
        z.segment(b.start, b.rows) = svec(project_psd(unsvec(seg)));
        break;
    }
  }
}

}  // namespace

AdmmResult AdmmSolver::solve(const ConicProgram& prog, const AdmmSettings& settings,
                             const SplitState* warm) {
  prog.validate();
  const int n = prog.dim();

  Stacked st = detail::stack_rows(prog);
  const int m = static_cast<int>(st.m.rows());

  Eigen::SparseMatrix<double> p = prog.quad;
  Eigen::VectorXd q = prog.linear;
  detail::Equilibration eq;
  if (settings.scale) {
    eq = detail::ruiz_scale(p, q, st, settings.scale_iters);
  } else {
    eq.d = Eigen::VectorXd::Ones(n);
    eq.e = Eigen::VectorXd::Ones(m);
    eq.c = 1.0;
  }

  AdmmResult out;
  double rho = settings.rho;
  int rho_updates = 0;

  // warm start in scaled coordinates
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  if (warm != nullptr && !warm->empty()) {
    if (warm->x.size() == n && warm->z.size() == m && warm->y.size() == m) {
      x = warm->x.cwiseQuotient(eq.d);
      z = eq.e.cwiseProduct(warm->z);
      y = eq.c * warm->y.cwiseQuotient(eq.e);
      if (warm->rho > 0) rho = warm->rho;
    } else {
      ++out.warm_rejected;
    }
  }

  // per-row penalty (equality rows run stiffer)
  Eigen::VectorXd weight = Eigen::VectorXd::Ones(m);
  for (const auto& b : st.blocks)
    if (b.kind == RowKind::Eq)
      weight.segment(b.start, b.rows).setConstant(settings.eq_rho_factor);

  const auto build_kkt = [&](double rho_now) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(p.nonZeros() + st.m.nonZeros() + n + m);
    for (int j = 0; j < p.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p, j); it; ++it)
        if (it.row() <= it.col()) trip.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < n; ++j) trip.emplace_back(j, j, settings.sigma);
    for (int j = 0; j < st.m.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(st.m, j); it; ++it)
        trip.emplace_back(j, n + static_cast<int>(it.row()), it.value());
    for (int i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -1.0 / (rho_now * weight[i]));
    kkt_.resize(n + m, n + m);
    kkt_.setFromTriplets(trip.begin(), trip.end());
  };

  const auto factorize = [&]() {
    const std::uint64_t key = pattern_hash(kkt_);
    if (key != pattern_key_) {
      ldlt_.analyzePattern(kkt_);
      pattern_key_ = key;
    }
    ldlt_.factorize(kkt_);
    if (ldlt_.info() != Eigen::Success) throw Error("KKT factorization failed");
    ++factor_count_;
  };

  build_kkt(rho);
  factorize();

  Eigen::VectorXd r_pen = rho * weight;
  Eigen::VectorXd rhs(n + m), sol(n + m), img(m), img_rel(m), v(m), u(m);

  const double abs_tol = settings.tol_abs;
  const double rel_tol = settings.tol_rel;
  int it = 0;
  double rp = 0, rd = 0, eps_p = 0, eps_d = 0;

  const auto residuals = [&]() {
    // unscaled residual norms and tolerance scales
    img = st.m * x + st.h;
    const Eigen::VectorXd prim = (img - z).cwiseQuotient(eq.e);
    rp = m ? prim.cwiseAbs().maxCoeff() : 0.0;
    const Eigen::VectorXd px = p * x;
    const Eigen::VectorXd mty = st.m.transpose() * y;
    const Eigen::VectorXd dual = (px + q + mty).cwiseQuotient(eq.d) / eq.c;
    rd = dual.cwiseAbs().maxCoeff();
    const double sp = std::max(m ? img.cwiseQuotient(eq.e).cwiseAbs().maxCoeff() : 0.0,
                               m ? z.cwiseQuotient(eq.e).cwiseAbs().maxCoeff() : 0.0);
    const double sd =
        std::max({px.cwiseQuotient(eq.d).cwiseAbs().maxCoeff() / eq.c,
                  mty.cwiseQuotient(eq.d).cwiseAbs().maxCoeff() / eq.c,
                  q.cwiseQuotient(eq.d).cwiseAbs().maxCoeff() / eq.c});
    eps_p = abs_tol + rel_tol * sp;
    eps_d = abs_tol + rel_tol * sd;
  };

  bool converged = false;
  while (it < settings.max_inner) {
    ++it;
    u = y.cwiseQuotient(r_pen);
    rhs.head(n) = settings.sigma * x - q;
    rhs.tail(m) = z - u - st.h;
    sol = ldlt_.solve(rhs);
    x = sol.head(n);
    // M x + h recovered from the KKT tail: avoids an extra spmv
    img = z - u + sol.tail(m).cwiseQuotient(r_pen);
    img_rel = settings.alpha * img + (1.0 - settings.alpha) * z;
    v = img_rel + u;
    apply_prox(st, r_pen, v, z);
    y += r_pen.cwiseProduct(img_rel - z);

    if (it == 1 || it % settings.check_every == 0) {
      residuals();
      if (!std::isfinite(rp) || !std::isfinite(rd))
        throw Error("subsolver diverged (non-finite residuals)");
      if (rp <= eps_p && rd <= eps_d) {
        converged = true;
        break;
      }
      if (settings.adaptive_rho && it >= 50) {
        const double pr = rp / std::max(eps_p, 1e-300);
        const double dr = rd / std::max(eps_d, 1e-300);
        double next = rho;
        if (pr > 10.0 * dr) next = rho * 2.0;
        else if (dr > 10.0 * pr) next = rho * 0.5;
        next = std::clamp(next, 1e-6, 1e6);
        if (next != rho) {
          rho = next;
          ++rho_updates;
          r_pen = rho * weight;
          build_kkt(rho);
          factorize();
        }
      }
    }
  }

  total_iters_ += it;
  out.x = eq.d.cwiseProduct(x);
  out.duals = eq.e.cwiseProduct(y) / eq.c;
  out.state.x = out.x;
  out.state.z = z.cwiseQuotient(eq.e);
  out.state.y = out.duals;
  out.state.rho = rho;
  out.state.rho_updates = rho_updates;
  out.iters = it;
  out.converged = converged;
  out.prim_res = rp;
  out.dual_res = rd;
  out.objective = prog.objective(out.x);
  if (!converged) {
    std::ostringstream msg;
    msg << "subsolver did not converge in " << it << " iterations (prim " << rp << ", dual "
        << rd << ")";
    throw SubsolverError(msg.str(), out.x, it);
  }
  return out;
}

}  // namespace gnopt
