#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace gnopt {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input text could not be parsed. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Inner solver ran out of iterations. Carries the best iterate so the
/// caller can inspect or salvage it.
class SubsolverError : public Error {
 public:
  SubsolverError(const std::string& what, Eigen::VectorXd best, int iters)
      : Error(what), best_(std::move(best)), iters_(iters) {}
  const Eigen::VectorXd& best() const { return best_; }
  int iterations() const { return iters_; }

 private:
  Eigen::VectorXd best_;
  int iters_;
};

}  // namespace gnopt
