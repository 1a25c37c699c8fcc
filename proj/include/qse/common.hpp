#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qse {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what)
      : std::invalid_argument(what) {}
};

class InvariantViolation : public std::invalid_argument {
 public:
  explicit InvariantViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

class UnsupportedPom : public std::invalid_argument {
 public:
  explicit UnsupportedPom(const std::string& what)
      : std::invalid_argument(what) {}
};

class NonConvergence : public std::runtime_error {
 public:
  explicit NonConvergence(const std::string& what)
      : std::runtime_error(what) {}
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what)
      : std::invalid_argument(what) {}
};

inline void require_same_dim(Eigen::Index a, Eigen::Index b,
                             const char* where) {
  if (a != b) {
    throw DimensionMismatch(std::string(where) + ": dimension mismatch (" +
                            std::to_string(a) + " vs " + std::to_string(b) +
                            ")");
  }
}

}  // namespace qse
