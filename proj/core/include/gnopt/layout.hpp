#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gnopt/errors.hpp"

namespace gnopt {

/// Named, contiguous slices of the decision vector. Slices must tile
/// [0, dim) exactly; every variable belongs to one slice.
struct VariableLayout {
  struct Slice {
    std::string name;
    int offset = 0;
    int size = 0;
  };

  std::vector<Slice> slices;

  int dim() const {
    int d = 0;
    for (const auto& s : slices) d += s.size;
    return d;
  }

  const Slice& slice(const std::string& name) const {
    for (const auto& s : slices)
      if (s.name == name) return s;
    throw Error("unknown variable slice '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (const auto& s : slices)
      if (s.name == name) return true;
    return false;
  }

  /// Checks the tiling invariant; throws on gaps, overlaps, or duplicates.
  void validate() const {
    int expect = 0;
    for (const auto& s : slices) {
      if (s.offset != expect || s.size < 0)
        throw Error("variable layout does not tile: slice '" + s.name + "'");
      for (const auto& t : slices)
        if (&s != &t && s.name == t.name)
          throw Error("duplicate slice name '" + s.name + "'");
      expect += s.size;
    }
  }

  Eigen::VectorXd view(const Eigen::VectorXd& x, const std::string& name) const {
    const Slice& s = slice(name);
    return x.segment(s.offset, s.size);
  }
};

}  // namespace gnopt
