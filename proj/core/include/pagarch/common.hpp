#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pagarch {

// Panels are stored unit-major: row i holds the time series of unit i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Bad input: dimensions, parameter constraints, malformed files.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An optimizer or linear solve could not produce a usable answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pagarch
