#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qse/ensemble.hpp"

using namespace qse;

TEST_CASE("sample record: deterministic pure-state fock data") {
  const SamplingPlan plan{DensityMatrix::from_ket(Ket::basis_state(0, 6)),
                          pom_fock_projective(6), 25, 4, 11};
  const FrequencyTable ft = sample_record(plan, 0);
  REQUIRE(ft.ids == std::vector<int>{0});
  CHECK(ft.counts[0] == 25);
}

TEST_CASE("sample record: binomial concentration at n = 10^4") {
  const SamplingPlan plan{DensityMatrix::maximally_mixed(2),
                          pom_fock_projective(2), 10000, 1, 2211};
  const FrequencyTable ft = sample_record(plan, 0);
  CHECK(std::abs(ft.f[0] - 0.5) < 0.02);
  CHECK(std::abs(ft.f[1] - 0.5) < 0.02);
}

TEST_CASE("sample record: heterodyne draws center on the coherent amplitude") {
  const Pom pom = pom_heterodyne_grid(32, make_disk_grid(3.4, 0.2));
  const int n = 4000;
  const SamplingPlan plan{DensityMatrix::from_ket(coherent_state(1.0, 32).ket),
                          pom, n, 1, 37};
  const FrequencyTable ft = sample_record(plan, 0);
  double mean_re = 0.0, mean_im = 0.0;
  for (int i = 0; i < ft.n_distinct(); ++i) {
    const auto& label = *pom.effects[ft.ids[i]].label;
    mean_re += ft.f[i] * label[0];
    mean_im += ft.f[i] * label[1];
  }
  // Q-function mean is alpha; per-axis sigma of the mean is sqrt(0.5/n)
  const double sigma = std::sqrt(0.5 / double(n));
  CHECK(std::abs(mean_re - 1.0) < 3.0 * sigma + 0.01);
  CHECK(std::abs(mean_im - 0.0) < 3.0 * sigma + 0.01);
}

TEST_CASE("sample record: bit-reproducible per (seed, dataset_index)") {
  const Pom pom = pom_heterodyne_grid(16, make_disk_grid(1.5, 0.25));
  const SamplingPlan plan{DensityMatrix::from_ket(coherent_state(0.3, 16).ket),
                          pom, 50, 8, 99};
  const FrequencyTable a3 = sample_record(plan, 3);
  const FrequencyTable b3 = EnsembleSampler(plan).record(3);
  REQUIRE(a3.ids == b3.ids);
  REQUIRE(a3.counts == b3.counts);
  // records of another dataset differ (independent substream)
  const FrequencyTable a4 = sample_record(plan, 4);
  CHECK((a3.ids != a4.ids || a3.counts != a4.counts));
}

TEST_CASE("sample record: residual gate rejects too-incomplete POMs") {
  const Pom one = pom_heterodyne_grid(16, {{Complex(0.0, 0.0), 0.1}});
  const SamplingPlan plan{DensityMatrix::from_ket(coherent_state(0.0, 16).ket),
                          one, 10, 1, 5};
  CHECK_THROWS_AS(sample_record(plan, 0), InvariantViolation);
}

TEST_CASE("rho_mle monte carlo: single detection approaches displaced "
          "thermal") {
  const int dim = 32;
  const Pom pom = pom_heterodyne_grid(dim, make_disk_grid(3.4, 0.2));
  const SamplingPlan plan{
      DensityMatrix::from_ket(coherent_state(1.0, dim).ket), pom, 1, 2500,
      424242};
  const HermitianOperator n_op = number_operator(dim);
  const EnsembleResult res = rho_mle_monte_carlo(plan, {}, &n_op);
  CHECK(res.datasets_used == 2500);
  CHECK(res.excluded == 0);

  const TruncatedDensity target = displaced_thermal(1.0, 1.0, dim);
  CHECK(fidelity(res.rho_mle, target.rho) >= 0.985);

  // mean photon |alpha|^2 + 1, allowing the truncated-disk bias
  REQUIRE(res.observable_mean.has_value());
  CHECK(std::abs(*res.observable_mean - 2.0) <
        3.0 * (*res.observable_se) + 0.06);
  CHECK(*res.observable_se > 0.0);

  // PSD and unit trace by convexity (constructor enforces, spot-check SE)
  CHECK(res.rho_mle.min_eigenvalue() >= -1e-10);
  CHECK(res.standard_error_per_entry(0, 0) > 0.0);
}

TEST_CASE("rho_mle monte carlo: double detection ties the analytic pipeline") {
  const int dim = 24;
  const Pom pom = pom_heterodyne_grid(dim, make_disk_grid(2.4, 0.3));
  const SamplingPlan plan{
      DensityMatrix::from_ket(coherent_state(0.5, dim).ket), pom, 2, 400,
      777};
  const EnsembleResult res = rho_mle_monte_carlo(plan);

  // same records through the closed-form double-detection solution
  EnsembleSampler sampler(plan);
  CMatrix acc = CMatrix::Zero(dim, dim);
  for (int t = 0; t < plan.n_datasets; ++t) {
    const FrequencyTable ft = sampler.record(t);
    Ket psi = [&] {
      if (ft.n_distinct() == 1) return *pom.effects[ft.ids[0]].ket;
      return estimate_double_analytic(*pom.effects[ft.ids[0]].ket,
                                      *pom.effects[ft.ids[1]].ket)
          .psi;
    }();
    acc += psi.projector();
  }
  acc /= double(plan.n_datasets);
  const DensityMatrix analytic_avg(0.5 * (acc + acc.adjoint().eval()));
  CHECK(fidelity(res.rho_mle, analytic_avg) >= 1.0 - 1e-6);
}

TEST_CASE("rho_mle monte carlo: too many non-converged datasets fail") {
  // two-outcome fock datasets have no pure-state maximizer; half the
  // datasets stall, far beyond the 5% exclusion cap
  const SamplingPlan plan{DensityMatrix::maximally_mixed(2),
                          pom_fock_projective(2), 2, 60, 31};
  MleOptions opts;
  opts.max_iter = 40;
  CHECK_THROWS_AS(rho_mle_monte_carlo(plan, opts), NonConvergence);
}

TEST_CASE("rho_mle monte carlo: rerun is bit-identical") {
  const Pom pom = pom_heterodyne_grid(16, make_disk_grid(1.6, 0.2));
  const SamplingPlan plan{
      DensityMatrix::from_ket(coherent_state(0.4, 16).ket), pom, 3, 50, 909};
  const EnsembleResult r1 = rho_mle_monte_carlo(plan);
  const EnsembleResult r2 = rho_mle_monte_carlo(plan);
  REQUIRE((r1.rho_mle.matrix() - r2.rho_mle.matrix()).cwiseAbs().maxCoeff() ==
          0.0);
  REQUIRE((r1.standard_error_per_entry - r2.standard_error_per_entry)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("positivity study: orthogonal measurements never violate") {
  const SamplingPlan plan{DensityMatrix::maximally_mixed(6),
                          pom_fock_projective(6), 1, 15, 616};
  const StudyReport rep =
      positivity_violation_study(plan, {6}, {30, 120}, {});
  REQUIRE(rep.rows.size() == 2);
  for (const StudyRow& row : rep.rows) {
    CHECK(row.inversion_violation_fraction == 0.0);
    CHECK(row.inversion_min_eig_min >= -1e-10);
    CHECK(row.mle_min_eig_min >= -1e-10);
  }
}

TEST_CASE("positivity study: noisy heterodyne breaks inversion, never mle") {
  const Pom pom = pom_heterodyne_grid(32, make_disk_grid(3.4, 0.2));
  const SamplingPlan plan{
      DensityMatrix::from_ket(coherent_state(1.0, 32).ket), pom, 1, 8,
      20259};
  MleOptions opts;
  opts.tol = 1e-8;
  const StudyReport rep =
      positivity_violation_study(plan, {10, 14}, {150, 400}, opts);
  REQUIRE(rep.rows.size() == 4);
  bool any_violation = false;
  for (const StudyRow& row : rep.rows) {
    CHECK(row.trials == 8);
    CHECK(row.mle_min_eig_min >= -1e-10);
    CHECK(row.mean_fidelity > 0.0);
    if (row.inversion_violation_fraction > 0.0) any_violation = true;
    REQUIRE(static_cast<int>(row.inversion_min_eigs.size()) == row.trials);
  }
  CHECK(any_violation);
}
