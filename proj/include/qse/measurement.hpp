#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qse/fock.hpp"
#include "qse/rng.hpp"

// Probability operator measures and the forward law p_i = w_i Tr(rho Pi_i).
// Continuous measurements are discretized with explicit cell weights; the
// probability mass falling outside the modeled outcome set is tracked as
// residual, never renormalized away silently.

namespace qse {

enum class PomKind { fock_projective, heterodyne_grid, quadrature_bins, custom };

inline const char* to_string(PomKind k) {
  switch (k) {
    case PomKind::fock_projective: return "fock_projective";
    case PomKind::heterodyne_grid: return "heterodyne_grid";
    case PomKind::quadrature_bins: return "quadrature_bins";
    case PomKind::custom: return "custom";
  }
  return "?";
}

// One outcome of a POM.  Rank-1 effects op = scale * |ket><ket| keep their
// outcome state explicitly; only general effects store a dense matrix.
struct Effect {
  int id = 0;
  double weight = 1.0;          // measure weight (cell area, 1/#phases, ...)
  std::optional<Ket> ket;       // set iff the effect is rank 1
  double scale = 1.0;           // Tr(op) for rank-1 effects
  std::optional<CMatrix> dense; // general effects
  // descriptive tuple: grid point (re, im) or (phase, bin center)
  std::optional<std::array<double, 2>> label;

  bool rank1() const { return ket.has_value(); }

  CMatrix op_matrix() const {
    if (dense) return *dense;
    return scale * ket->projector();
  }

  // Tr(op), without materializing the matrix.
  double trace() const {
    if (dense) return dense->trace().real();
    return scale;
  }
};

struct Pom {
  int dim = 0;
  PomKind kind = PomKind::custom;
  std::vector<Effect> effects;
  double completeness_defect = 0.0;  // spectral norm of 1 - sum w_i Pi_i
  std::vector<int> zero_effect_ids;  // empty quadrature bins etc.

  int n_effects() const { return static_cast<int>(effects.size()); }

  CMatrix effect_sum() const {
    CMatrix s = CMatrix::Zero(dim, dim);
    for (const Effect& e : effects) {
      if (e.rank1()) {
        s.noalias() += (e.weight * e.scale) * e.ket->projector();
      } else if (e.dense) {
        s.noalias() += e.weight * *e.dense;
      }
    }
    return s;
  }
};

namespace detail {

inline double spectral_norm_hermitian(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline void finalize_pom(Pom& pom) {
  const CMatrix s = pom.effect_sum();
  pom.completeness_defect =
      spectral_norm_hermitian(CMatrix::Identity(pom.dim, pom.dim) - s);
  // Operator upper bound sum w_i Pi_i <= 1.
  Eigen::SelfAdjointEigenSolver<CMatrix> es(s, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().maxCoeff() > 1.0 + 1e-8) {
    throw InvariantViolation("Pom: effects exceed the identity, max eig " +
                             std::to_string(es.eigenvalues().maxCoeff()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Builders

inline Pom pom_fock_projective(int dim) {
  if (dim < 1) throw InvariantViolation("pom_fock_projective: dim >= 1");
  Pom pom;
  pom.dim = dim;
  pom.kind = PomKind::fock_projective;
  pom.effects.reserve(dim);
  for (int k = 0; k < dim; ++k) {
    Effect e;
    e.id = k;
    e.weight = 1.0;
    e.ket = Ket::basis_state(k, dim);
    e.scale = 1.0;
    pom.effects.push_back(std::move(e));
  }
  detail::finalize_pom(pom);
  return pom;
}

struct GridPoint {
  Complex center;
  double area = 0.0;
};

// Square lattice of cell centers covering the disk |y| <= radius.
inline std::vector<GridPoint> make_disk_grid(double radius, double spacing) {
  if (!(radius > 0.0) || !(spacing > 0.0)) {
    throw InvariantViolation("make_disk_grid: radius and spacing must be > 0");
  }
  std::vector<GridPoint> pts;
  const int n = static_cast<int>(std::floor(radius / spacing));
  for (int j = -n; j <= n; ++j) {
    for (int i = -n; i <= n; ++i) {
      const Complex c(i * spacing, j * spacing);
      if (std::abs(c) <= radius) pts.push_back({c, spacing * spacing});
    }
  }
  return pts;
}

// Heterodyne / double-homodyne measurement discretized on a grid: effects
// (1/pi)|y><y| with the cell area as weight, so forward probabilities are
// Q(y) * area.  Each grid ket must fit in the truncated space; points whose
// coherent truncation weight exceeds `max_point_truncation` are rejected.
inline Pom pom_heterodyne_grid(int dim, const std::vector<GridPoint>& grid,
                               double max_point_truncation = 1e-6) {
  if (grid.empty()) throw InvariantViolation("pom_heterodyne_grid: empty grid");
  Pom pom;
  pom.dim = dim;
  pom.kind = PomKind::heterodyne_grid;
  pom.effects.reserve(grid.size());
  constexpr double kInvPi = 0.31830988618379067154;
  int id = 0;
  for (const GridPoint& g : grid) {
    CoherentKet y = coherent_state(g.center, dim);
    if (y.truncation_weight > max_point_truncation) {
      throw InvariantViolation(
          "pom_heterodyne_grid: grid point (" + std::to_string(g.center.real()) +
          ", " + std::to_string(g.center.imag()) + ") loses " +
          std::to_string(y.truncation_weight) + " to truncation at dim " +
          std::to_string(dim));
    }
    Effect e;
    e.id = id++;
    e.weight = g.area;
    e.ket = std::move(y.ket);
    e.scale = kInvPi;
    e.label = std::array<double, 2>{g.center.real(), g.center.imag()};
    pom.effects.push_back(std::move(e));
  }
  detail::finalize_pom(pom);
  return pom;
}

// Homodyne quadratures at a set of phases, each binned by `edges` (strictly
// increasing, +-inf permitted).  Bin projectors are sums of eigenprojectors
// of the truncated quadrature operator; every phase carries weight
// 1/#phases so the family forms a single POM.
inline Pom pom_quadrature_bins(int dim, const std::vector<double>& phases,
                               const std::vector<double>& edges) {
  if (phases.empty()) {
    throw InvariantViolation("pom_quadrature_bins: need at least one phase");
  }
  if (edges.size() < 2) {
    throw InvariantViolation("pom_quadrature_bins: need at least two edges");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i - 1] < edges[i])) {
      throw InvariantViolation(
          "pom_quadrature_bins: edges must be strictly increasing");
    }
  }
  Pom pom;
  pom.dim = dim;
  pom.kind = PomKind::quadrature_bins;
  const int n_bins = static_cast<int>(edges.size()) - 1;
  const double phase_weight = 1.0 / double(phases.size());
  int id = 0;
  for (double phi : phases) {
    EigenDecomposition ed = eig_hermitian(quadrature_operator(phi, dim));
    for (int b = 0; b < n_bins; ++b) {
      CMatrix proj = CMatrix::Zero(dim, dim);
      int hits = 0;
      int last_hit = -1;
      for (int k = 0; k < dim; ++k) {
        const double lam = ed.eigenvalues(k);
        if (lam >= edges[b] && lam < edges[b + 1]) {
          proj.noalias() +=
              ed.eigenvectors.col(k) * ed.eigenvectors.col(k).adjoint();
          ++hits;
          last_hit = k;
        }
      }
      Effect e;
      e.id = id++;
      e.weight = phase_weight;
      e.label = std::array<double, 2>{
          phi, std::isfinite(edges[b]) && std::isfinite(edges[b + 1])
                   ? 0.5 * (edges[b] + edges[b + 1])
                   : 0.0};
      if (hits == 0) {
        e.dense = CMatrix::Zero(dim, dim);
        e.scale = 0.0;
        pom.zero_effect_ids.push_back(e.id);
      } else if (hits == 1) {
        e.ket = Ket(ed.eigenvectors.col(last_hit));
        e.scale = 1.0;
      } else {
        e.dense = std::move(proj);
        e.scale = double(hits);
      }
      pom.effects.push_back(std::move(e));
    }
  }
  detail::finalize_pom(pom);
  return pom;
}

// Rank-1 POM from explicit outcome states; used for bespoke estimation
// problems where completeness is not required.
inline Pom pom_custom_rank1(int dim, const std::vector<Ket>& kets,
                            const std::vector<double>& weights = {},
                            double scale = 1.0) {
  if (kets.empty()) throw InvariantViolation("pom_custom_rank1: no states");
  Pom pom;
  pom.dim = dim;
  pom.kind = PomKind::custom;
  for (std::size_t i = 0; i < kets.size(); ++i) {
    require_same_dim(kets[i].dim(), dim, "pom_custom_rank1");
    Effect e;
    e.id = static_cast<int>(i);
    e.weight = weights.empty() ? 1.0 / double(kets.size()) : weights[i];
    e.ket = kets[i];
    e.scale = scale;
    pom.effects.push_back(std::move(e));
  }
  detail::finalize_pom(pom);
  return pom;
}

namespace detail {

// Haar-distributed unitary from the QR of a Gaussian matrix with the
// standard phase correction.
inline CMatrix random_unitary(Rng& rng, int dim) {
  CMatrix g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g(r, c) = Complex(rng.normal(), rng.normal());
  }
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i) {
    const Complex rii = r(i, i);
    if (std::abs(rii) > 0.0) q.col(i) *= rii / std::abs(rii);
  }
  return q;
}

}  // namespace detail

// Columns of n_frames seeded Haar unitaries with weight 1/n_frames each: an
// exactly complete rank-1 POM whose outcome states span the operator space
// (informationally complete for n_frames >= dim + 2, generically).
inline Pom pom_unitary_frames(int dim, int n_frames, std::uint64_t seed) {
  if (dim < 1 || n_frames < 1) {
    throw InvariantViolation("pom_unitary_frames: dim and frames must be >= 1");
  }
  Rng rng(seed, 0x756e6974ull);
  Pom pom;
  pom.dim = dim;
  pom.kind = PomKind::custom;
  int id = 0;
  for (int k = 0; k < n_frames; ++k) {
    const CMatrix u = detail::random_unitary(rng, dim);
    for (int c = 0; c < dim; ++c) {
      Effect e;
      e.id = id++;
      e.weight = 1.0 / double(n_frames);
      e.ket = Ket(u.col(c).eval());
      e.scale = 1.0;
      pom.effects.push_back(std::move(e));
    }
  }
  detail::finalize_pom(pom);
  return pom;
}

// ---------------------------------------------------------------------------
// Forward law

struct ForwardDistribution {
  int dim = 0;
  std::vector<double> probabilities;  // aligned with pom.effects
  double residual_mass = 0.0;         // 1 - sum p_i
  int clamped = 0;                    // negatives in [-1e-12, 0) zeroed
};

inline ForwardDistribution forward(const DensityMatrix& rho, const Pom& pom) {
  require_same_dim(rho.dim(), pom.dim, "forward");
  ForwardDistribution out;
  out.dim = pom.dim;
  out.probabilities.resize(pom.effects.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pom.effects.size(); ++i) {
    const Effect& e = pom.effects[i];
    double p;
    if (e.rank1()) {
      p = e.weight * e.scale *
          (e.ket->amp().adjoint() * rho.matrix() * e.ket->amp())(0).real();
    } else {
      p = e.weight * (rho.matrix().cwiseProduct(e.dense->transpose())).sum().real();
    }
    if (p < 0.0) {
      if (p < -1e-12) {
        throw InvariantViolation("forward: effect " + std::to_string(e.id) +
                                 " produced probability " + std::to_string(p));
      }
      p = 0.0;
      ++out.clamped;
    }
    out.probabilities[i] = p;
    total += p;
  }
  out.residual_mass = 1.0 - total;
  return out;
}

struct CompletenessReport {
  CMatrix sum;          // sum w_i Pi_i
  double defect = 0.0;  // spectral norm of 1 - sum
  bool complete = false;
  double tol = 1e-8;
};

inline CompletenessReport completeness_check(const Pom& pom,
                                             double tol = 1e-8) {
  CompletenessReport rep;
  rep.sum = pom.effect_sum();
  rep.defect = detail::spectral_norm_hermitian(
      CMatrix::Identity(pom.dim, pom.dim) - rep.sum);
  rep.tol = tol;
  rep.complete = rep.defect <= tol;
  return rep;
}

}  // namespace qse
