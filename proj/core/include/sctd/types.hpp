#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sctd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Argument outside the domain of a schedule quantity (time, log-SNR).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Violated ordering or shape precondition of an operation.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value together with its Jacobian with respect to some upstream input.
struct Propagated {
  Vec value;
  Mat jacobian;
};

}  // namespace sctd
