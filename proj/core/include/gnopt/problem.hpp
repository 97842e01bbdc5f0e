#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "gnopt/errors.hpp"
#include "gnopt/layout.hpp"
#include "gnopt/region.hpp"

namespace gnopt {

/// One class of equality constraints (a contiguous row block of the
/// residual map). Classes carry their own penalty weights.
struct ConstraintClass {
  std::string name;
  int rows = 0;
};

/// A non-convex program instance: convex quadratic objective, smooth
/// equality residual map with closed-form Jacobian, and a convex region.
struct ProblemDef {
  // f(x) = x' diag(obj_quad_diag) x + obj_linear' x + obj_const
  Eigen::VectorXd obj_quad_diag;
  Eigen::VectorXd obj_linear;
  double obj_const = 0.0;

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> psi;
  std::function<Eigen::SparseMatrix<double>(const Eigen::VectorXd&)> psi_jacobian;
  std::vector<ConstraintClass> classes;

  ConvexRegion omega;
  std::optional<double> lipschitz_bound;  // L of the Jacobian, when known
  VariableLayout layout;

  int dim() const { return static_cast<int>(obj_linear.size()); }
  int residual_rows() const {
    int n = 0;
    for (const auto& c : classes) n += c.rows;
    return n;
  }
  int class_offset(int c) const {
    int off = 0;
    for (int i = 0; i < c; ++i) off += classes[i].rows;
    return off;
  }

  double objective(const Eigen::VectorXd& x) const {
    return x.dot(obj_quad_diag.cwiseProduct(x)) + obj_linear.dot(x) + obj_const;
  }
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const {
    return 2.0 * obj_quad_diag.cwiseProduct(x) + obj_linear;
  }

  void validate() const {
    layout.validate();
    if (layout.dim() != dim()) throw Error("layout does not cover the decision vector");
    if ((obj_quad_diag.array() < 0).any()) throw Error("objective is not convex (C2 < 0)");
    if (obj_quad_diag.size() != obj_linear.size()) throw Error("objective size mismatch");
  }
};

/// Per-class penalty weights beta_c > 0.
struct PenaltyWeights {
  std::vector<double> beta;

  double total() const {
    double s = 0;
    for (double b : beta) s += b;
    return s;
  }
  void validate(const ProblemDef& p) const {
    if (beta.size() != p.classes.size()) throw Error("penalty weights: class count mismatch");
    for (double b : beta)
      if (!(b > 0)) throw Error("penalty weights must be strictly positive");
  }
};

enum class LStrategy { Fixed, Bisection, Geometric };

/// A regularization group: one L value shared by a set of layout slices.
/// Slices not in any group carry no proximal term.
struct RegGroup {
  std::string name;
  std::vector<std::string> slices;
  double l_min = 1.0;
  double l_init = 1.0;
};

struct RegParams {
  std::vector<RegGroup> groups;
  LStrategy strategy = LStrategy::Geometric;
  double mu = 2.0;  // Geometric growth factor
  bool carry_over = true;

  void validate() const {
    if (mu <= 1.0 && strategy == LStrategy::Geometric) throw Error("geometric mu must be > 1");
    for (const auto& g : groups) {
      if (!(g.l_min > 0)) throw Error("L_min must be positive");
      if (g.l_init < g.l_min) throw Error("L_init below L_min in group '" + g.name + "'");
    }
  }
  int group_index(const std::string& name) const {
    for (size_t i = 0; i < groups.size(); ++i)
      if (groups[i].name == name) return static_cast<int>(i);
    throw Error("unknown regularization group '" + name + "'");
  }
};

/// Expands per-group L values into a per-variable vector (zero for
/// ungrouped slices).
Eigen::VectorXd reg_l_vector(const VariableLayout& layout, const RegParams& reg,
                             const std::vector<double>& values);

}  // namespace gnopt
