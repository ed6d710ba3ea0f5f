#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace gpbas {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown when a state leaves (or starts outside) the safe set {x | h(x) > 0}.
class BoundaryViolation : public std::runtime_error {
 public:
  BoundaryViolation(const std::string& what, int constraint_index, double h_value,
                    int step = -1)
      : std::runtime_error(what),
        constraint_index(constraint_index),
        h_value(h_value),
        step(step) {}

  int constraint_index;
  double h_value;
  int step;  // rollout step of the violation, -1 outside rollouts
};

// Linear-algebra failures: indefinite matrices, diverging fixed-point iterations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw std::invalid_argument(what);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& name) {
  if (!m.allFinite()) throw std::invalid_argument(name + " contains non-finite entries");
}

}  // namespace gpbas
