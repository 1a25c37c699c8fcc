#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qse/fock.hpp"

using namespace qse;

TEST_CASE("coherent state: vacuum") {
  const CoherentKet y = coherent_state(0.0, 8);
  CHECK(y.truncation_weight == 0.0);
  CHECK_FALSE(y.truncation_warning);
  CHECK(std::abs(y.ket.amp()(0) - Complex(1.0, 0.0)) < 1e-15);
  for (int k = 1; k < 8; ++k) CHECK(std::abs(y.ket.amp()(k)) == 0.0);
}

TEST_CASE("coherent state: overlap against the closed form") {
  const CoherentKet y0 = coherent_state(0.0, 32);
  const CoherentKet y1 = coherent_state(1.0, 32);
  REQUIRE(y0.truncation_weight < 1e-12);
  REQUIRE(y1.truncation_weight < 1e-12);
  const double overlap2 = std::norm(inner(y1.ket, y0.ket));
  CHECK(std::abs(overlap2 - std::exp(-1.0)) < 1e-10);
}

TEST_CASE("coherent state: truncation weight matches the Poisson tail") {
  const CoherentKet y = coherent_state(2.0, 4);
  CHECK(y.truncation_weight > 0.1);
  CHECK(y.truncation_warning);
  CHECK(y.truncation_weight ==
        Catch::Approx(test::poisson_tail(4.0, 4)).margin(1e-12));
}

TEST_CASE("coherent state: rejects non-finite amplitude") {
  CHECK_THROWS_AS(
      coherent_state(Complex(std::numeric_limits<double>::quiet_NaN(), 0), 8),
      InvariantViolation);
  CHECK_THROWS_AS(coherent_state(0.0, 0), InvariantViolation);
}

TEST_CASE("coherent overlap identity on seeded pairs") {
  Rng rng(421);
  for (int trial = 0; trial < 50; ++trial) {
    const Complex a = test::random_complex(rng, 0.8);
    const Complex b = test::random_complex(rng, 0.8);
    const CoherentKet ya = coherent_state(a, 32);
    const CoherentKet yb = coherent_state(b, 32);
    if (ya.truncation_weight >= 1e-10 || yb.truncation_weight >= 1e-10) {
      continue;
    }
    const double expected = std::exp(-std::norm(a - b));
    CHECK(std::abs(std::norm(inner(yb.ket, ya.ket)) - expected) < 1e-8);
  }
}

TEST_CASE("inner: orthonormal basis and conjugate linearity") {
  const Ket e0 = Ket::basis_state(0, 4);
  const Ket e1 = Ket::basis_state(1, 4);
  CHECK(inner(e0, e0) == Complex(1.0, 0.0));
  CHECK(inner(e0, e1) == Complex(0.0, 0.0));
  CHECK_THROWS_AS(inner(e0, Ket::basis_state(0, 5)), DimensionMismatch);

  Rng rng(7);
  const Ket a(test::random_cvector(rng, 6));
  const Ket b(test::random_cvector(rng, 6));
  const Complex c(0.3, -1.2);
  const Ket ca(c * a.amp());
  // constructor renormalizes, so compare directions only
  const Complex lhs = inner(ca, b) * std::abs(c);
  const Complex rhs = std::conj(c) * inner(a, b);
  CHECK(std::abs(lhs - rhs) < 1e-12);
  CHECK(inner(a, a).imag() == Catch::Approx(0.0).margin(1e-15));
  CHECK(inner(a, a).real() >= 0.0);
}

TEST_CASE("eig_hermitian: diagonal and identity") {
  CMatrix d = CMatrix::Zero(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  d(2, 2) = 3.0;
  const EigenDecomposition ed = eig_hermitian(HermitianOperator(d));
  CHECK(ed.eigenvalues(0) == Catch::Approx(1.0));
  CHECK(ed.eigenvalues(1) == Catch::Approx(2.0));
  CHECK(ed.eigenvalues(2) == Catch::Approx(3.0));
  CHECK_FALSE(ed.degeneracy_flag);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(std::abs(ed.eigenvectors(k, k)) - 1.0) < 1e-12);
  }

  const EigenDecomposition id4 = eig_hermitian(HermitianOperator::identity(4));
  for (int k = 0; k < 4; ++k) CHECK(id4.eigenvalues(k) == Catch::Approx(1.0));
  CHECK(id4.degeneracy_flag);
}

TEST_CASE("eig_hermitian: rejects non-Hermitian input") {
  CMatrix m(2, 2);
  m << 1.0, Complex(0.0, 1.0), Complex(0.0, 1.0), 1.0;
  CHECK_THROWS_AS(HermitianOperator(m), InvariantViolation);
}

TEST_CASE("eig_hermitian: reconstruction residual over seeded matrices") {
  Rng rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = rng.uniform_int(2, 32);
    const CMatrix h = test::random_hermitian(rng, dim);
    const EigenDecomposition ed = eig_hermitian(HermitianOperator(h));
    CMatrix rebuilt = CMatrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
      rebuilt += ed.eigenvalues(k) * ed.eigenvectors.col(k) *
                 ed.eigenvectors.col(k).adjoint();
    }
    const double spectral =
        std::max(std::abs(ed.eigenvalues(0)), std::abs(ed.eigenvalues(dim - 1)));
    REQUIRE((h - rebuilt).cwiseAbs().maxCoeff() <= 1e-9 * spectral);
    const CMatrix gram =
        ed.eigenvectors.adjoint() * ed.eigenvectors - CMatrix::Identity(dim, dim);
    REQUIRE(gram.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("max_eigen_bound: identity and equality case") {
  Rng rng(5);
  const DensityMatrix rho = test::random_density(rng, 4);
  const MaxEigenBound id_bound =
      max_eigen_bound(rho, HermitianOperator::identity(4));
  CHECK(id_bound.bound == Catch::Approx(1.0));

  const CMatrix b = test::random_hermitian(rng, 4);
  const HermitianOperator B(b);
  const MaxEigenBound mb = max_eigen_bound(rho, B);
  const DensityMatrix top = DensityMatrix::from_ket(mb.attaining_state);
  const double tr = (top.matrix() * b).trace().real();
  CHECK(std::abs(tr - mb.bound) < 1e-9);
}

TEST_CASE("max_eigen_bound: inequality over seeded pairs") {
  Rng rng(90210);
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = rng.uniform_int(2, 12);
    const DensityMatrix rho = test::random_density(rng, dim);
    const CMatrix b = test::random_hermitian(rng, dim);
    const MaxEigenBound mb = max_eigen_bound(rho, HermitianOperator(b));
    const double tr = (rho.matrix() * b).trace().real();
    REQUIRE(tr <= mb.bound + 1e-10);
  }
}

TEST_CASE("quadrature operator: matrix elements") {
  const HermitianOperator x0 = quadrature_operator(0.0, 2);
  CHECK(std::abs(x0.matrix()(0, 1) - Complex(1.0 / std::sqrt(2.0), 0)) <
        1e-15);
  const HermitianOperator xq = quadrature_operator(1.5707963267948966, 2);
  CHECK(std::abs(xq.matrix()(0, 1) - Complex(0, -1.0 / std::sqrt(2.0))) <
        1e-12);
  CHECK(std::abs(xq.matrix()(1, 0) - Complex(0, 1.0 / std::sqrt(2.0))) <
        1e-12);
  CHECK_THROWS_AS(quadrature_operator(0.0, 1), InvariantViolation);
}

TEST_CASE("quadrature operator: spectrum sits on Hermite roots") {
  const int dim = 64;
  const EigenDecomposition ed =
      eig_hermitian(quadrature_operator(0.3, dim));
  for (int k = 0; k < dim; ++k) {
    const auto [pn, pnm1] = test::hermite_orthonormal(dim, ed.eigenvalues(k));
    // a true root annihilates p_n while the neighbor term stays O(1)
    REQUIRE(std::abs(pn) <= 1e-8 * std::max(1.0, std::abs(pnm1)));
  }
}

TEST_CASE("displaced thermal: vacuum and geometric distribution") {
  const TruncatedDensity vac = displaced_thermal(0.0, 0.0, 8);
  CHECK(std::abs(vac.rho.matrix()(0, 0) - Complex(1, 0)) < 1e-12);
  CHECK(vac.trace_loss < 1e-12);

  const TruncatedDensity th = displaced_thermal(0.0, 1.0, 48);
  for (int k = 0; k < 10; ++k) {
    const double expect = 0.5 * std::pow(0.5, k);
    CHECK(std::abs(th.rho.matrix()(k, k).real() - expect) < 1e-12);
  }
}

TEST_CASE("displaced thermal: mean photon number") {
  const int dim = 48;
  const TruncatedDensity dt = displaced_thermal(1.0, 1.0, dim);
  const double mean_n =
      (dt.rho.matrix() * number_operator(dim).matrix()).trace().real();
  CHECK(std::abs(mean_n - 2.0) < 1e-6);
  CHECK(dt.trace_loss < 1e-3);
  CHECK_FALSE(dt.truncation_warning);
  CHECK_THROWS_AS(displaced_thermal(0.0, -0.5, 8), InvariantViolation);
}

TEST_CASE("fidelity: pure and mixed") {
  const Ket e0 = Ket::basis_state(0, 8);
  const Ket e1 = Ket::basis_state(1, 8);
  CHECK(fidelity(e0, e0) == Catch::Approx(1.0));
  CHECK(fidelity(e0, e1) == Catch::Approx(0.0).margin(1e-15));

  const CoherentKet y0 = coherent_state(0.0, 32);
  const CoherentKet y1 = coherent_state(1.0, 32);
  CHECK(fidelity(y0.ket, y1.ket) == Catch::Approx(std::exp(-1.0)).margin(1e-10));

  Rng rng(17);
  const DensityMatrix rho = test::random_density(rng, 6);
  CHECK(fidelity(rho, rho) == Catch::Approx(1.0).margin(1e-9));

  // Uhlmann fidelity against a pure state reduces to <psi|rho|psi>
  const Ket psi(test::random_cvector(rng, 6));
  const double direct = fidelity(rho, psi);
  const double uhlmann = fidelity(rho, DensityMatrix::from_ket(psi));
  CHECK(std::abs(direct - uhlmann) < 1e-9);
}

TEST_CASE("density matrix invariants enforced") {
  CMatrix bad = CMatrix::Identity(2, 2);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;  // trace 1, not PSD
  CHECK_THROWS_AS(DensityMatrix(bad), InvariantViolation);

  CMatrix off_trace = CMatrix::Identity(2, 2);
  CHECK_THROWS_AS(DensityMatrix(off_trace), InvariantViolation);

  CHECK_NOTHROW(DensityMatrix::maximally_mixed(5));
}
