#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qse/common.hpp"

// States and operators of a truncated Fock space.  Everything is a plain
// value; constructors normalize and validate, so a Ket or DensityMatrix that
// exists satisfies its invariants.

namespace qse {

inline constexpr int kDefaultDim = 32;

// Relative tolerance for the Hermiticity check max|H - H^dag|.
inline constexpr double kHermTol = 1e-12;

// Truncation losses above this are surfaced as warnings by the state
// constructors.
inline constexpr double kTruncationWarnThreshold = 1e-3;

class Ket {
 public:
  // Normalizes the supplied amplitudes and records the pre-normalization
  // norm.  Throws on an (effectively) zero vector.
  explicit Ket(CVector amplitudes) : amp_(std::move(amplitudes)) {
    if (amp_.size() < 1) throw InvariantViolation("Ket: dim must be >= 1");
    norm_before_ = amp_.norm();
    if (!(norm_before_ > 0.0) || !std::isfinite(norm_before_)) {
      throw InvariantViolation("Ket: amplitudes have zero or non-finite norm");
    }
    amp_ /= norm_before_;
  }

  static Ket basis_state(int k, int dim) {
    CVector v = CVector::Zero(dim);
    v(k) = 1.0;
    return Ket(std::move(v));
  }

  int dim() const { return static_cast<int>(amp_.size()); }
  const CVector& amp() const { return amp_; }
  double pre_normalization_norm() const { return norm_before_; }

  CMatrix projector() const { return amp_ * amp_.adjoint(); }

 private:
  CVector amp_;
  double norm_before_ = 1.0;
};

// <a|b>, conjugate-linear in the first argument.
inline Complex inner(const Ket& a, const Ket& b) {
  require_same_dim(a.dim(), b.dim(), "inner");
  return a.amp().dot(b.amp());
}

class HermitianOperator {
 public:
  explicit HermitianOperator(CMatrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) {
      throw InvariantViolation("HermitianOperator: matrix must be square");
    }
    const double scale = 1.0 + m_.cwiseAbs().maxCoeff();
    const double defect = (m_ - m_.adjoint().eval()).cwiseAbs().maxCoeff();
    if (defect > kHermTol * scale) {
      throw InvariantViolation("HermitianOperator: not Hermitian, defect " +
                               std::to_string(defect));
    }
  }

  static HermitianOperator zero(int dim) {
    return HermitianOperator(CMatrix::Zero(dim, dim));
  }
  static HermitianOperator identity(int dim) {
    return HermitianOperator(CMatrix::Identity(dim, dim));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }

 private:
  CMatrix m_;
};

class DensityMatrix {
 public:
  // Validates Hermiticity, unit trace and positive semidefiniteness.
  explicit DensityMatrix(CMatrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) {
      throw InvariantViolation("DensityMatrix: matrix must be square");
    }
    const double scale = 1.0 + m_.cwiseAbs().maxCoeff();
    const double herm_defect = (m_ - m_.adjoint().eval()).cwiseAbs().maxCoeff();
    if (herm_defect > kHermTol * scale) {
      throw InvariantViolation("DensityMatrix: not Hermitian, defect " +
                               std::to_string(herm_defect));
    }
    const double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > 1e-10) {
      throw InvariantViolation("DensityMatrix: trace " + std::to_string(tr) +
                               " is not 1");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m_,
                                              Eigen::EigenvaluesOnly);
    min_eig_ = es.eigenvalues().minCoeff();
    if (min_eig_ < -1e-10) {
      throw InvariantViolation("DensityMatrix: negative eigenvalue " +
                               std::to_string(min_eig_));
    }
  }

  static DensityMatrix from_ket(const Ket& psi) {
    return DensityMatrix(psi.projector());
  }

  static DensityMatrix maximally_mixed(int dim) {
    return DensityMatrix(CMatrix::Identity(dim, dim) / double(dim));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  double min_eigenvalue() const { return min_eig_; }

 private:
  CMatrix m_;
  double min_eig_ = 0.0;
};

struct EigenDecomposition {
  RVector eigenvalues;   // ascending
  CMatrix eigenvectors;  // column i pairs with eigenvalues(i), orthonormal
  bool degeneracy_flag = false;
  double gap_threshold = 0.0;  // absolute threshold applied to the top gap
};

// Full spectral decomposition; flags a (near-)degenerate top eigenvalue.
inline EigenDecomposition eig_hermitian(const HermitianOperator& H) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(H.matrix());
  EigenDecomposition out;
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();
  const int d = static_cast<int>(out.eigenvalues.size());
  const double spectral_norm =
      std::max(std::abs(out.eigenvalues(0)), std::abs(out.eigenvalues(d - 1)));
  out.gap_threshold = 1e-8 * spectral_norm;
  if (d >= 2) {
    const double top_gap = out.eigenvalues(d - 1) - out.eigenvalues(d - 2);
    out.degeneracy_flag = top_gap <= out.gap_threshold;
  }
  return out;
}

struct MaxEigenBound {
  double bound = 0.0;   // max eigenvalue of B
  Ket attaining_state;  // eigenvector of the max eigenvalue
};

// Tr(rho B) <= max eigenvalue of B, attained by the top spectral projector.
inline MaxEigenBound max_eigen_bound(const DensityMatrix& rho,
                                     const HermitianOperator& B) {
  require_same_dim(rho.dim(), B.dim(), "max_eigen_bound");
  EigenDecomposition ed = eig_hermitian(B);
  const int d = B.dim();
  return MaxEigenBound{ed.eigenvalues(d - 1), Ket(ed.eigenvectors.col(d - 1))};
}

struct CoherentKet {
  Ket ket;
  // Probability mass lost to the Fock cutoff, 1 - sum |c_k|^2 before
  // renormalization.
  double truncation_weight = 0.0;
  bool truncation_warning = false;
};

// |alpha> in a d-dimensional Fock space: c_k = e^{-|a|^2/2} a^k / sqrt(k!),
// renormalized after the cutoff.
inline CoherentKet coherent_state(Complex alpha, int dim) {
  if (dim < 1) throw InvariantViolation("coherent_state: dim must be >= 1");
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
    throw InvariantViolation("coherent_state: non-finite amplitude");
  }
  CVector c(dim);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (int k = 1; k < dim; ++k) {
    c(k) = c(k - 1) * alpha / std::sqrt(double(k));
  }
  const double captured = c.squaredNorm();
  const double weight = std::max(0.0, 1.0 - captured);
  return CoherentKet{Ket(std::move(c)), weight,
                     weight > kTruncationWarnThreshold};
}

// Quadrature x_phi = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2), so the
// vacuum variance is 1/2.
inline HermitianOperator quadrature_operator(double phi, int dim) {
  if (dim < 2) {
    throw InvariantViolation("quadrature_operator: dim must be >= 2");
  }
  CMatrix x = CMatrix::Zero(dim, dim);
  const Complex phase(std::cos(phi), std::sin(phi));
  for (int k = 1; k < dim; ++k) {
    const double t = std::sqrt(double(k) / 2.0);
    x(k - 1, k) = t / phase;  // <k-1| a |k> e^{-i phi} / sqrt(2)
    x(k, k - 1) = t * phase;
  }
  return HermitianOperator(std::move(x));
}

// Number operator diag(0, 1, ..., d-1).
inline HermitianOperator number_operator(int dim) {
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = double(k);
  return HermitianOperator(std::move(n));
}

struct TruncatedDensity {
  DensityMatrix rho;
  double trace_loss = 0.0;  // mass outside the requested cutoff
  bool truncation_warning = false;
};

// Displaced thermal state D(alpha) rho_th D(alpha)^dag, computed in a padded
// working space and cut down to `dim`.  The displaced number states obey
// D|n> = (a^dag - conj(alpha)) D|n-1> / sqrt(n), starting from the coherent
// state D|0>; the thermal mixture p_k = n̄^k / (1+n̄)^{k+1} is summed until
// its tail is negligible.
inline TruncatedDensity displaced_thermal(Complex alpha, double mean_n,
                                          int dim) {
  if (dim < 1) throw InvariantViolation("displaced_thermal: dim must be >= 1");
  if (!(mean_n >= 0.0)) {
    throw InvariantViolation("displaced_thermal: mean_n must be >= 0");
  }
  // Thermal cutoff: keep terms until the geometric tail drops below 1e-18.
  int k_max = 0;
  if (mean_n > 0.0) {
    const double q = mean_n / (1.0 + mean_n);
    k_max = static_cast<int>(std::ceil(std::log(1e-18) / std::log(q))) + 1;
  }
  const double amp2 = std::norm(alpha);
  const int pad = static_cast<int>(
      std::ceil(amp2 + 10.0 * std::sqrt(amp2 + double(k_max) + 1.0) + 10.0));
  const int W = dim + k_max + pad;

  CMatrix acc = CMatrix::Zero(W, W);
  // Raw coherent coefficients (not renormalized), so the accumulated mass
  // reflects genuine truncation.
  CVector d(W);
  d(0) = std::exp(-0.5 * amp2);
  for (int k = 1; k < W; ++k) d(k) = d(k - 1) * alpha / std::sqrt(double(k));
  const Complex alpha_conj = std::conj(alpha);
  double p = 1.0 / (1.0 + mean_n);
  const double q = mean_n > 0.0 ? mean_n / (1.0 + mean_n) : 0.0;
  for (int k = 0;; ++k) {
    acc.noalias() += p * (d * d.adjoint());
    if (k == k_max) break;
    // next displaced number state
    CVector next(W);
    next(0) = -alpha_conj * d(0);
    for (int m = 1; m < W; ++m) {
      next(m) = std::sqrt(double(m)) * d(m - 1) - alpha_conj * d(m);
    }
    d = next / std::sqrt(double(k + 1));
    p *= q;
  }

  CMatrix cut = acc.topLeftCorner(dim, dim);
  cut = 0.5 * (cut + cut.adjoint().eval());  // scrub roundoff asymmetry
  const double tr = cut.trace().real();
  const double loss = std::max(0.0, 1.0 - tr);
  if (!(tr > 0.0)) {
    throw InvariantViolation("displaced_thermal: truncation swallowed state");
  }
  cut /= tr;
  return TruncatedDensity{DensityMatrix(std::move(cut)), loss,
                          loss > kTruncationWarnThreshold};
}

inline double fidelity(const Ket& a, const Ket& b) {
  return std::norm(inner(a, b));
}

inline double fidelity(const DensityMatrix& rho, const Ket& psi) {
  require_same_dim(rho.dim(), psi.dim(), "fidelity");
  const double f = (psi.amp().adjoint() * rho.matrix() * psi.amp())(0).real();
  return std::clamp(f, 0.0, 1.0);
}

inline double fidelity(const Ket& psi, const DensityMatrix& rho) {
  return fidelity(rho, psi);
}

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  require_same_dim(rho.dim(), sigma.dim(), "fidelity");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  const RVector clipped = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix sqrt_rho = es.eigenvectors() * clipped.asDiagonal() *
                           es.eigenvectors().adjoint();
  const CMatrix inner_m = sqrt_rho * sigma.matrix() * sqrt_rho;
  Eigen::SelfAdjointEigenSolver<CMatrix> es2(inner_m, Eigen::EigenvaluesOnly);
  // sqrt amplifies eigenvalue dust, so drop entries below the noise floor
  const double floor = 1e-14 * std::max(es2.eigenvalues().maxCoeff(), 0.0);
  double f = 0.0;
  for (Eigen::Index i = 0; i < es2.eigenvalues().size(); ++i) {
    if (es2.eigenvalues()(i) > floor) f += std::sqrt(es2.eigenvalues()(i));
  }
  return std::clamp(f * f, 0.0, 1.0);
}

}  // namespace qse
