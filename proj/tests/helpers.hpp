#pragma once

// Shared test utilities: seeded random objects and the independent oracles
// the suites check the library against.  Nothing here calls back into the
// code paths under test.

#include <cmath>
#include <vector>

#include "qse/estimator.hpp"
#include "qse/rng.hpp"

namespace qse::test {

inline Complex random_complex(Rng& rng, double scale = 1.0) {
  return Complex(rng.normal(), rng.normal()) * scale;
}

inline CVector random_cvector(Rng& rng, int dim) {
  CVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = random_complex(rng);
  return v;
}

inline CMatrix random_hermitian(Rng& rng, int dim, double scale = 1.0) {
  CMatrix a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) a(r, c) = random_complex(rng, scale);
  }
  return 0.5 * (a + a.adjoint().eval());
}

inline DensityMatrix random_density(Rng& rng, int dim) {
  CMatrix g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g(r, c) = random_complex(rng);
  }
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho));
}

// Poisson tail P(X >= k) for X ~ Poisson(lambda), summed directly.
inline double poisson_tail(double lambda, int k) {
  double term = std::exp(-lambda);
  double head = 0.0;
  for (int j = 0; j < k; ++j) {
    head += term;
    term *= lambda / double(j + 1);
  }
  return 1.0 - head;
}

// Value of the orthonormal Hermite function recurrence at x: p_0 = pi^{-1/4},
// x p_k = sqrt((k+1)/2) p_{k+1} + sqrt(k/2) p_{k-1}.  Returns p_n(x) and
// p_{n-1}(x); a root of the physicists' H_n makes the first vanish.
inline std::pair<double, double> hermite_orthonormal(int n, double x) {
  double pm1 = 0.0;
  double p = 0.7511255444649425;  // pi^{-1/4}
  for (int k = 0; k < n; ++k) {
    const double next =
        (x * p - std::sqrt(double(k) / 2.0) * pm1) / std::sqrt((k + 1) / 2.0);
    pm1 = p;
    p = next;
  }
  return {p, pm1};
}

// Random-restart hill climb over pure states in the span of the outcome
// states: maximizes sum f_i ln |<y_i|psi>|^2 directly from the kets.  Slow
// and simple; the oracle for the fixed-point solver.
inline double brute_force_best_log_likelihood(const std::vector<Ket>& kets,
                                              const RVector& f, Rng& rng,
                                              int restarts = 24,
                                              int steps = 4000) {
  const int m = static_cast<int>(kets.size());
  CMatrix overlap(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) overlap(r, c) = inner(kets[r], kets[c]);
  }
  auto objective = [&](const CVector& v) {
    const double metric = std::real(v.dot(overlap * v));
    if (!(metric > 1e-300)) return -std::numeric_limits<double>::infinity();
    const CVector ov = overlap * v;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double x = std::norm(ov(i)) / metric;
      if (x <= 0.0) return -std::numeric_limits<double>::infinity();
      acc += f(i) * std::log(x);
    }
    return acc;
  };

  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    CVector v = random_cvector(rng, m);
    double cur = objective(v);
    double sigma = 1.0;
    for (int s = 0; s < steps; ++s) {
      CVector cand = v;
      const int idx = rng.uniform_int(0, m - 1);
      cand(idx) += random_complex(rng, sigma);
      const double val = objective(cand);
      if (val > cur) {
        v = cand;
        cur = val;
      } else {
        sigma *= 0.995;
        if (sigma < 1e-9) sigma = 1e-9;
      }
    }
    best = std::max(best, cur);
  }
  return best;
}

}  // namespace qse::test
