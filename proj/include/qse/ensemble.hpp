#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qse/estimator.hpp"
#include "qse/rng.hpp"

// Sampling of measurement records from a true state and the Monte-Carlo
// estimator-fluctuation average rho_MLE.  Dataset k draws from the RNG
// substream (seed, k), so results do not depend on the order datasets are
// processed in and a rerun with the same seed is bit-identical.

namespace qse {

struct SamplingPlan {
  DensityMatrix true_state;
  Pom pom;
  long long n_per_dataset = 1;
  int n_datasets = 1;
  std::uint64_t seed = 0;
};

// Precomputes the forward distribution of a plan once; records for any
// dataset index can then be drawn independently.
class EnsembleSampler {
 public:
  explicit EnsembleSampler(const SamplingPlan& plan) : plan_(&plan) {
    if (plan.n_per_dataset < 1 || plan.n_datasets < 1) {
      throw InvariantViolation("SamplingPlan: dataset sizes must be >= 1");
    }
    const ForwardDistribution fd = forward(plan.true_state, plan.pom);
    residual_mass_ = fd.residual_mass;
    if (residual_mass_ >= 0.01) {
      throw InvariantViolation(
          "sample_record: POM leaves residual mass " +
          std::to_string(residual_mass_) +
          "; too incomplete to sample honestly");
    }
    const double total = 1.0 - residual_mass_;
    renormalization_ = 1.0 / total;
    cum_.resize(fd.probabilities.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cum_.size(); ++i) {
      acc += fd.probabilities[i] * renormalization_;
      cum_[i] = acc;
    }
    cum_.back() = 1.0;  // absorb roundoff in the last cell
  }

  FrequencyTable record(int dataset_index) const {
    Rng rng(plan_->seed, static_cast<std::uint64_t>(dataset_index));
    std::vector<int> outcomes;
    outcomes.reserve(static_cast<std::size_t>(plan_->n_per_dataset));
    for (long long k = 0; k < plan_->n_per_dataset; ++k) {
      const double u = rng.next_double();
      const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
      const auto idx = std::min<std::size_t>(
          static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1);
      outcomes.push_back(plan_->pom.effects[idx].id);
    }
    return tabulate(outcomes);
  }

  double residual_mass() const { return residual_mass_; }
  // Probabilities were scaled by this factor to drop the residual.
  double renormalization() const { return renormalization_; }

 private:
  const SamplingPlan* plan_;
  std::vector<double> cum_;
  double residual_mass_ = 0.0;
  double renormalization_ = 1.0;
};

inline FrequencyTable sample_record(const SamplingPlan& plan,
                                    int dataset_index) {
  return EnsembleSampler(plan).record(dataset_index);
}

struct EnsembleResult {
  DensityMatrix rho_mle;
  RMatrix standard_error_per_entry;  // sqrt((Var Re + Var Im) / M)
  int datasets_used = 0;
  int excluded = 0;
  // Filled when an observable is supplied: mean and standard error of
  // <psi_j|O|psi_j> across datasets.
  std::optional<double> observable_mean;
  std::optional<double> observable_se;
};

// Average of |psi(y)><psi(y)| over sampled records, the operational form of
// the estimator-fluctuation density matrix.  Non-converged estimations are
// excluded and counted; more than 5% of them voids the run.
inline EnsembleResult rho_mle_monte_carlo(
    const SamplingPlan& plan, const MleOptions& opts = {},
    const HermitianOperator* observable = nullptr) {
  EnsembleSampler sampler(plan);
  const int d = plan.pom.dim;
  RMatrix mean_re = RMatrix::Zero(d, d), mean_im = RMatrix::Zero(d, d);
  RMatrix m2_re = RMatrix::Zero(d, d), m2_im = RMatrix::Zero(d, d);
  double obs_mean = 0.0, obs_m2 = 0.0;
  int used = 0;
  int excluded = 0;

  for (int t = 0; t < plan.n_datasets; ++t) {
    const FrequencyTable ft = sampler.record(t);
    MleSolution sol = estimate_mle_pure(plan.pom, ft, opts);
    if (!sol.converged) {
      ++excluded;
      continue;
    }
    ++used;
    const CMatrix proj = sol.psi.projector();
    const RMatrix pre = proj.real();
    const RMatrix pim = proj.imag();
    const RMatrix dre = pre - mean_re;
    const RMatrix dim_ = pim - mean_im;
    mean_re += dre / double(used);
    mean_im += dim_ / double(used);
    m2_re += dre.cwiseProduct(pre - mean_re);
    m2_im += dim_.cwiseProduct(pim - mean_im);
    if (observable) {
      const double t_obs = (sol.psi.amp().adjoint() * observable->matrix() *
                            sol.psi.amp())(0)
                               .real();
      const double dd = t_obs - obs_mean;
      obs_mean += dd / double(used);
      obs_m2 += dd * (t_obs - obs_mean);
    }
  }
  if (used == 0 || double(excluded) > 0.05 * double(plan.n_datasets)) {
    throw NonConvergence("rho_mle_monte_carlo: " + std::to_string(excluded) +
                         " of " + std::to_string(plan.n_datasets) +
                         " estimations failed to converge");
  }

  CMatrix rho = mean_re.cast<Complex>() +
                Complex(0.0, 1.0) * mean_im.cast<Complex>();
  rho = 0.5 * (rho + rho.adjoint().eval());

  EnsembleResult res{DensityMatrix(std::move(rho)),
                     RMatrix::Zero(d, d),
                     used,
                     excluded,
                     std::nullopt,
                     std::nullopt};
  if (used > 1) {
    res.standard_error_per_entry =
        ((m2_re + m2_im) / double(used - 1) / double(used)).cwiseSqrt();
  }
  if (observable) {
    res.observable_mean = obs_mean;
    res.observable_se =
        used > 1 ? std::sqrt(obs_m2 / double(used - 1) / double(used)) : 0.0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Positivity study

// Rebuild a rank-1 POM in a smaller reconstruction space by truncating every
// outcome state; the deliberate model mismatch the study probes.
inline Pom truncate_rank1_pom(const Pom& pom, int dim) {
  if (dim > pom.dim) {
    throw InvariantViolation("truncate_rank1_pom: dim exceeds source");
  }
  Pom out;
  out.dim = dim;
  out.kind = pom.kind;
  out.effects.reserve(pom.effects.size());
  for (const Effect& e : pom.effects) {
    if (!e.rank1()) {
      throw UnsupportedPom("truncate_rank1_pom: non-rank-1 effect");
    }
    Effect t;
    t.id = e.id;
    t.weight = e.weight;
    t.ket = Ket(e.ket->amp().head(dim).eval());
    t.scale = e.scale;
    t.label = e.label;
    out.effects.push_back(std::move(t));
  }
  out.completeness_defect =
      detail::spectral_norm_hermitian(CMatrix::Identity(dim, dim) -
                                      out.effect_sum());
  return out;
}

inline DensityMatrix truncate_state(const DensityMatrix& rho, int dim) {
  CMatrix cut = rho.matrix().topLeftCorner(dim, dim);
  const double tr = cut.trace().real();
  if (!(tr > 0.0)) throw InvariantViolation("truncate_state: trace vanished");
  cut /= tr;
  cut = 0.5 * (cut + cut.adjoint().eval());
  return DensityMatrix(std::move(cut));
}

struct StudyRow {
  int dim = 0;
  long long n = 0;
  int trials = 0;
  double inversion_violation_fraction = 0.0;  // min eig < -1e-10
  double mle_min_eig_min = 0.0;
  double mean_fidelity = 0.0;  // MLE estimate vs truncated true state
  double inversion_min_eig_min = 0.0;
  std::vector<double> inversion_min_eigs;
  std::vector<double> mle_min_eigs;
};

struct StudyReport {
  std::uint64_t seed = 0;
  std::vector<StudyRow> rows;
};

// For each (dim, n): sample `trials` records with the plan's POM, then
// reconstruct at the reduced dimension by inversion and by MLE.  Sampling
// streams depend only on (seed, trial), so every row sees the same data
// prefixes.
inline StudyReport positivity_violation_study(const SamplingPlan& plan,
                                              const std::vector<int>& dims,
                                              const std::vector<long long>& ns,
                                              const MleOptions& opts = {}) {
  StudyReport rep;
  rep.seed = plan.seed;
  const int trials = plan.n_datasets;
  for (int dim : dims) {
    const Pom recon_pom = dim == plan.pom.dim ? plan.pom
                                              : truncate_rank1_pom(plan.pom, dim);
    const DensityMatrix truth = dim == plan.pom.dim
                                    ? plan.true_state
                                    : truncate_state(plan.true_state, dim);
    for (long long n : ns) {
      SamplingPlan sub = plan;
      sub.n_per_dataset = n;
      EnsembleSampler sampler(sub);

      StudyRow row;
      row.dim = dim;
      row.n = n;
      row.trials = trials;
      int violations = 0;
      double fid_acc = 0.0;
      double inv_min = std::numeric_limits<double>::infinity();
      double mle_min = std::numeric_limits<double>::infinity();
      for (int t = 0; t < trials; ++t) {
        const FrequencyTable ft = sampler.record(t);
        const InversionSolution inv = estimate_inversion(recon_pom, ft);
        row.inversion_min_eigs.push_back(inv.min_eigenvalue);
        inv_min = std::min(inv_min, inv.min_eigenvalue);
        if (inv.min_eigenvalue < -1e-10) ++violations;

        const MleSolution mle = estimate_mle_pure(recon_pom, ft, opts);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(mle.psi.projector(),
                                                  Eigen::EigenvaluesOnly);
        const double mle_eig = es.eigenvalues().minCoeff();
        row.mle_min_eigs.push_back(mle_eig);
        mle_min = std::min(mle_min, mle_eig);
        fid_acc += fidelity(truth, mle.psi);
      }
      row.inversion_violation_fraction = double(violations) / double(trials);
      row.inversion_min_eig_min = inv_min;
      row.mle_min_eig_min = mle_min;
      row.mean_fidelity = fid_acc / double(trials);
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

}  // namespace qse
