#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace maisteer {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using RMatrix3 = Eigen::Matrix3d;
using RVector3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Caller passed an argument outside the documented domain.
class InputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A covariance or moment matrix is numerically zero.
class DegenerateInputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// An integrator failed its step-halving convergence check.
class ToleranceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Two independent evaluations of the same quantity disagree.
class NumericalInstabilityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A closed form was requested outside the regime where it exists.
class UnsupportedConfigurationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

} // namespace maisteer
