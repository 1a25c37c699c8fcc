#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qse/likelihood.hpp"

// Reconstruction engines: the orthogonal closed form, the pure-state
// maximum-likelihood fixed point solved in the span of the outcome states,
// the two-detection analytic solution, and the unconstrained least-squares
// inversion baseline whose negative eigenvalues the study exhibits.

namespace qse {

// Observed outcome with a (possibly non-integer) relative frequency; exact
// distributions enter the estimators through this form.
struct OutcomeFreq {
  int id = 0;
  double f = 0.0;
};

inline std::vector<OutcomeFreq> to_outcome_freqs(const FrequencyTable& ft) {
  std::vector<OutcomeFreq> out(ft.ids.size());
  for (std::size_t i = 0; i < ft.ids.size(); ++i) {
    out[i] = OutcomeFreq{ft.ids[i], ft.f[i]};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gram-subspace eigenproblem

struct GramProblem {
  CMatrix C;  // C(k,i) = <y_k|y_i>, Hermitian PSD, unit diagonal
  RVector f;
  RVector a;

  static GramProblem from_kets(const std::vector<Ket>& kets, RVector f,
                               RVector a) {
    const int n = static_cast<int>(kets.size());
    if (f.size() != n || a.size() != n || n < 1) {
      throw DimensionMismatch("GramProblem: misaligned inputs");
    }
    GramProblem gp;
    gp.C.resize(n, n);
    for (int k = 0; k < n; ++k) {
      gp.C(k, k) = 1.0;
      for (int i = k + 1; i < n; ++i) {
        gp.C(k, i) = inner(kets[k], kets[i]);
        gp.C(i, k) = std::conj(gp.C(k, i));
      }
    }
    gp.f = std::move(f);
    gp.a = std::move(a);
    return gp;
  }
};

struct GramTopEig {
  double lambda = 0.0;  // top eigenvalue of diag(f/a) C
  CVector V;            // coefficients, normalized so V^dag C V = 1
  CVector u;            // eigenvector of the Hermitian form (warm-start seed)
  bool degenerate = false;
  bool singular_c = false;  // numerically singular Gram matrix
  int matvecs = 0;          // 0 on the dense path
};

namespace detail {

inline constexpr int kDenseGramLimit = 64;

// Kernel likelihood sum f_i ln |(C V)_i|^2 used for tie-breaking between
// degenerate top eigenvectors.
inline double gram_kernel_likelihood(const GramProblem& gp, const CVector& V) {
  const CVector overlaps = gp.C * V;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < V.size(); ++i) {
    const double x = std::norm(overlaps(i));
    if (gp.f(i) > 0.0) {
      if (x <= 0.0) return -std::numeric_limits<double>::infinity();
      acc += gp.f(i) * std::log(x);
    }
  }
  return acc;
}

inline CVector c_normalize(const GramProblem& gp, CVector V) {
  const double metric = std::real(V.dot(gp.C * V));
  if (!(metric > 1e-300)) {
    throw NonConvergence("gram eigenproblem: eigenvector annihilated by C");
  }
  return V / std::sqrt(metric);
}

}  // namespace detail

// Top eigenpair of diag(f_i/a_i) C, computed through the Hermitian form
// D^{1/2} C D^{1/2}.  Small problems are diagonalized exactly with a
// likelihood tie-break across a degenerate top eigenspace; large ones use
// warm-started power iteration.
inline GramTopEig gram_eigenproblem(const GramProblem& gp,
                                    const CVector* warm_start = nullptr) {
  const int n = static_cast<int>(gp.C.rows());
  RVector d(n);
  for (int i = 0; i < n; ++i) {
    if (!(gp.a(i) > 0.0)) {
      throw InvariantViolation("gram_eigenproblem: a_i must be > 0");
    }
    d(i) = std::sqrt(gp.f(i) / gp.a(i));
  }

  GramTopEig out;
  if (n <= detail::kDenseGramLimit) {
    const CMatrix H = d.asDiagonal() * gp.C * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H);
    const RVector& ev = es.eigenvalues();
    out.lambda = ev(n - 1);
    const double gap_tol = 1e-8 * std::max(out.lambda, 1e-300);
    int first_deg = n - 1;
    while (first_deg > 0 && out.lambda - ev(first_deg - 1) <= gap_tol) {
      --first_deg;
    }
    out.degenerate = first_deg < n - 1;
    int best = n - 1;
    if (out.degenerate) {
      double best_l = -std::numeric_limits<double>::infinity();
      for (int k = n - 1; k >= first_deg; --k) {
        CVector V = d.asDiagonal() * es.eigenvectors().col(k);
        const double metric = std::real(V.dot(gp.C * V));
        if (!(metric > 1e-300)) continue;
        const double l =
            detail::gram_kernel_likelihood(gp, V / std::sqrt(metric));
        if (l > best_l) {
          best_l = l;
          best = k;
        }
      }
    }
    out.u = es.eigenvectors().col(best);
    out.V = detail::c_normalize(gp, d.asDiagonal() * out.u);
    Eigen::SelfAdjointEigenSolver<CMatrix> esc(gp.C, Eigen::EigenvaluesOnly);
    out.singular_c =
        esc.eigenvalues().minCoeff() <= 1e-12 * esc.eigenvalues().maxCoeff();
    return out;
  }

  // Power iteration on H u = d .* (C * (d .* u)).
  CVector u;
  if (warm_start && warm_start->size() == n) {
    u = *warm_start;
  } else {
    u = (d.array() * gp.f.array()).matrix().cast<Complex>();
  }
  double un = u.norm();
  if (!(un > 0.0)) u = CVector::Ones(n);
  u /= u.norm();
  double lambda = 0.0;
  const int max_matvecs = 200 + 40 * n;
  for (int it = 0; it < max_matvecs; ++it) {
    CVector w = d.asDiagonal() * (gp.C * (d.asDiagonal() * u));
    lambda = std::real(u.dot(w));
    const double resid = (w - lambda * u).norm();
    ++out.matvecs;
    const double wn = w.norm();
    if (!(wn > 0.0)) {
      throw NonConvergence("gram eigenproblem: power iteration collapsed");
    }
    u = w / wn;
    if (resid <= std::max(1e-13, 1e-12 * std::abs(lambda))) break;
  }
  out.lambda = lambda;
  out.u = u;
  out.V = detail::c_normalize(gp, d.asDiagonal() * u);
  // Cheap top-gap probe: a short deflated power pass from a fixed start.
  {
    CVector v = CVector::Ones(n);
    for (int i = 1; i < n; i += 2) v(i) = -1.0;
    v -= u * u.dot(v);
    double vn = v.norm();
    if (vn > 1e-12) {
      v /= vn;
      double lam2 = 0.0;
      for (int it = 0; it < 40; ++it) {
        CVector w = d.asDiagonal() * (gp.C * (d.asDiagonal() * v));
        w -= u * u.dot(w);
        lam2 = std::real(v.dot(w));
        vn = w.norm();
        if (!(vn > 0.0)) break;
        v = w / vn;
      }
      out.degenerate = out.lambda - lam2 <= 1e-8 * std::max(out.lambda, 1e-300);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pure-state maximum likelihood

struct MleOptions {
  double tol = 1e-9;
  long max_iter = 10000;
  double damping = 0.5;
};

struct MleSolution {
  Ket psi;
  std::vector<int> ids;  // observed outcome ids, ascending
  RVector a;             // auxiliary weights at the fixed point, max gauge
  double lambda_top = 0.0;  // top eigenvalue of R(y, a) in the stored gauge
  LikelihoodValue log_likelihood;
  long iterations = 0;
  double residual = 0.0;  // max_i |g_i - gbar| / gbar, g_i = |<y_i|psi>|^2/a_i
  bool converged = false;
  bool degenerate = false;
  std::vector<double> likelihood_trace;  // kernel value per accepted iterate
};

namespace detail {

struct MleWorkspace {
  std::vector<Ket> kets;
  std::vector<int> ids;
  RVector f;
  double weight_log_offset = 0.0;  // sum f_i ln(w_i scale_i)
};

inline MleWorkspace mle_workspace(const Pom& pom,
                                  const std::vector<OutcomeFreq>& data) {
  if (data.empty()) throw InvariantViolation("estimate_mle_pure: no data");
  MleWorkspace ws;
  ws.f.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Effect& e = effect_by_id(pom, data[i].id);
    if (!e.rank1()) {
      throw UnsupportedPom(
          "estimate_mle_pure: outcome " + std::to_string(data[i].id) +
          " is not a rank-1 effect; pure-state MLE needs outcome states");
    }
    if (!(data[i].f > 0.0)) {
      throw InvariantViolation("estimate_mle_pure: nonpositive frequency");
    }
    ws.kets.push_back(*e.ket);
    ws.ids.push_back(data[i].id);
    ws.f(i) = data[i].f;
    ws.weight_log_offset += data[i].f * std::log(e.weight * e.scale);
  }
  return ws;
}

inline RVector max_gauge(RVector v) {
  const double m = v.maxCoeff();
  if (!(m > 0.0)) throw InvariantViolation("max_gauge: no positive entry");
  return v / m;
}

}  // namespace detail

// Damped fixed-point iteration for the extremal equations
// |<y_i|psi>|^2 / a_i = const: alternate the top eigenvector of R(y, a)
// with a step of a toward |<y_i|psi>|^2, halved whenever the likelihood of
// the new iterate drops so the recorded trace stays monotone.  The endgame
// is finished on the equivalent smooth dual: minimizing
// phi(t) = log lambda(t) + sum f_i t_i over t = log a, whose gradient
// f_i - |u_i|^2 is free from the eigensolve and reproduces the extremal
// residual exactly (max_i |f_i - |u_i|^2| / f_i).
inline MleSolution estimate_mle_pure(const Pom& pom,
                                     const std::vector<OutcomeFreq>& data,
                                     long long n_data,
                                     const MleOptions& opts = {}) {
  detail::MleWorkspace ws = detail::mle_workspace(pom, data);
  const int m = static_cast<int>(ws.kets.size());

  GramProblem gp = GramProblem::from_kets(ws.kets, ws.f,
                                          detail::max_gauge(ws.f));
  GramTopEig top = gram_eigenproblem(gp);

  auto kernel_of = [&](const CVector& V, RVector& g_out) {
    const CVector overlaps = gp.C * V;
    double acc = 0.0;
    g_out.resize(m);
    for (int i = 0; i < m; ++i) {
      g_out(i) = std::norm(overlaps(i));
      acc += g_out(i) > 0.0
                 ? ws.f(i) * std::log(g_out(i))
                 : -std::numeric_limits<double>::infinity();
    }
    return acc;
  };

  auto extremal_residual = [&](const RVector& gg, const RVector& a) {
    double gbar = 0.0;
    RVector gdiv(m);
    for (int i = 0; i < m; ++i) {
      gdiv(i) = gg(i) / a(i);
      gbar += ws.f(i) * gdiv(i);
    }
    if (!(gbar > 0.0)) return std::numeric_limits<double>::infinity();
    double r = 0.0;
    for (int i = 0; i < m; ++i) {
      r = std::max(r, std::abs(gdiv(i) - gbar) / gbar);
    }
    return r;
  };

  auto solve_at = [&](RVector a_try, GramTopEig& top_out, RVector& g_out,
                      double& kernel_out) {
    GramProblem gp_try = gp;
    gp_try.a = std::move(a_try);
    top_out = gram_eigenproblem(gp_try, &top.u);
    kernel_out = kernel_of(top_out.V, g_out);
  };

  RVector g;
  double kernel = kernel_of(top.V, g);
  const double eta = opts.damping;
  long iter = 1;
  std::vector<double> trace{kernel};
  bool degenerate_seen = top.degenerate;
  double residual = extremal_residual(g, gp.a);

  // ---- primary damped fixed point -----------------------------------------
  double residual_checkpoint = residual;
  while (residual > opts.tol && iter < opts.max_iter) {
    const double slack = 1e-13 * (1.0 + std::abs(kernel));
    bool accepted = false;
    double step = eta;
    const RVector g_gauged = detail::max_gauge(g.cwiseMax(0.0).unaryExpr(
        [](double v) { return std::max(v, 1e-300); }));
    while (step > 1e-10) {
      RVector a_try = detail::max_gauge((1.0 - step) * gp.a + step * g_gauged);
      GramTopEig top_try;
      RVector g_try;
      double kernel_try;
      solve_at(a_try, top_try, g_try, kernel_try);
      // Likelihood must not drop; once it is flat to machine precision the
      // extremal residual has to carry the progress, otherwise the endgame
      // zigzags inside the likelihood noise ball.
      const bool likelihood_ok = kernel_try >= kernel - slack;
      const bool real_gain = kernel_try >= kernel + 10.0 * slack;
      if (likelihood_ok &&
          (real_gain || extremal_residual(g_try, a_try) <= residual)) {
        gp.a = std::move(a_try);
        top = std::move(top_try);
        g = std::move(g_try);
        kernel = kernel_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // hand over to the dual descent
    ++iter;
    trace.push_back(kernel);
    degenerate_seen = degenerate_seen || top.degenerate;
    residual = extremal_residual(g, gp.a);
    if (iter % 32 == 0) {
      if (residual > 0.25 * residual_checkpoint) break;  // crawling
      residual_checkpoint = residual;
    }
  }

  // ---- dual descent polish -------------------------------------------------
  if (residual > opts.tol && iter < opts.max_iter && kernel > -1e300) {
    RVector t = gp.a.array().log();
    const RVector sqrt_f = ws.f.cwiseSqrt();
    // phi and gradient at t; |u_i|^2 comes from the Hermitian-form
    // eigenvector u = D^{1/2} V / |D^{1/2} V|
    GramTopEig cur = top;
    auto eval_phi = [&](const RVector& tt, GramTopEig& out, RVector& grad) {
      RVector a = tt.array().exp();
      GramProblem gpt = gp;
      gpt.a = a;
      out = gram_eigenproblem(gpt, &cur.u);
      grad.resize(m);
      const double un2 = out.u.squaredNorm();
      for (int i = 0; i < m; ++i) {
        grad(i) = ws.f(i) - std::norm(out.u(i)) / un2;
      }
      return std::log(out.lambda) + ws.f.dot(tt);
    };
    RVector grad;
    double phi = eval_phi(t, cur, grad);
    ++iter;
    // L-BFGS two-loop recursion, memory 8
    std::vector<RVector> s_hist, y_hist;
    std::vector<double> rho_hist;
    double dual_residual = (grad.cwiseQuotient(ws.f)).cwiseAbs().maxCoeff();
    while (dual_residual > 0.5 * opts.tol && iter < opts.max_iter) {
      RVector q = grad;
      std::vector<double> alpha(s_hist.size());
      for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
        alpha[k] = rho_hist[k] * s_hist[k].dot(q);
        q -= alpha[k] * y_hist[k];
      }
      if (!s_hist.empty()) {
        const RVector& sl = s_hist.back();
        const RVector& yl = y_hist.back();
        q *= sl.dot(yl) / yl.squaredNorm();
      }
      for (std::size_t k = 0; k < s_hist.size(); ++k) {
        const double beta = rho_hist[k] * y_hist[k].dot(q);
        q += (alpha[k] - beta) * s_hist[k];
      }
      RVector dir = -q;
      if (!(grad.dot(dir) < 0.0)) dir = -grad;  // safeguard descent

      double step = 1.0;
      bool ok = false;
      RVector t_new, grad_new;
      GramTopEig top_new;
      double phi_new = 0.0;
      for (int ls = 0; ls < 40 && iter < opts.max_iter; ++ls) {
        t_new = t + step * dir;
        t_new.array() -= t_new.maxCoeff();  // max gauge in log space
        phi_new = eval_phi(t_new, top_new, grad_new);
        ++iter;
        if (phi_new <= phi + 1e-4 * step * grad.dot(dir)) {
          ok = true;
          break;
        }
        step *= 0.5;
      }
      if (!ok) break;
      const RVector s = t_new - t;
      const RVector yv = grad_new - grad;
      const double sy = s.dot(yv);
      if (sy > 1e-18) {
        s_hist.push_back(s);
        y_hist.push_back(yv);
        rho_hist.push_back(1.0 / sy);
        if (s_hist.size() > 8) {
          s_hist.erase(s_hist.begin());
          y_hist.erase(y_hist.begin());
          rho_hist.erase(rho_hist.begin());
        }
      }
      t = std::move(t_new);
      grad = std::move(grad_new);
      cur = std::move(top_new);
      phi = phi_new;
      degenerate_seen = degenerate_seen || cur.degenerate;
      dual_residual = (grad.cwiseQuotient(ws.f)).cwiseAbs().maxCoeff();
    }
    // adopt the polished point if it is at least as good
    RVector a_pol = t.array().exp();
    a_pol = detail::max_gauge(std::move(a_pol));
    GramTopEig top_pol;
    RVector g_pol;
    double kernel_pol;
    solve_at(a_pol, top_pol, g_pol, kernel_pol);
    const double residual_pol = extremal_residual(g_pol, a_pol);
    if (residual_pol < residual &&
        kernel_pol >= kernel - 1e-13 * (1.0 + std::abs(kernel))) {
      gp.a = std::move(a_pol);
      top = std::move(top_pol);
      g = std::move(g_pol);
      kernel = kernel_pol;
      residual = residual_pol;
      trace.push_back(kernel);
    }
  }

  CVector amp = CVector::Zero(pom.dim);
  for (int i = 0; i < m; ++i) amp += top.V(i) * ws.kets[i].amp();

  MleSolution sol{Ket(std::move(amp)),
                  ws.ids,
                  gp.a,
                  top.lambda,
                  LikelihoodValue{kernel, ws.weight_log_offset, n_data},
                  iter,
                  residual,
                  residual <= opts.tol,
                  degenerate_seen,
                  std::move(trace)};
  return sol;
}

inline MleSolution estimate_mle_pure(const Pom& pom, const FrequencyTable& ft,
                                     const MleOptions& opts = {}) {
  return estimate_mle_pure(pom, to_outcome_freqs(ft), ft.n, opts);
}

// Closed-form two-detection solution: the Schroedinger-cat-like superposition
// (e^{i arg C12}|y1> + |y2>) / sqrt(2 (1 + |C12|)).  lambda here follows the
// equal-frequency secular-equation normalization 1 + |C12|, which is twice
// the top eigenvalue of R at f = (1/2, 1/2).
inline MleSolution estimate_double_analytic(const Ket& y1, const Ket& y2) {
  require_same_dim(y1.dim(), y2.dim(), "estimate_double_analytic");
  const Complex c12 = inner(y1, y2);
  const double absc = std::abs(c12);

  MleSolution sol{y1,
                  {0, 1},
                  RVector::Ones(2),
                  1.0 + absc,
                  LikelihoodValue{},
                  0,
                  0.0,
                  true,
                  false,
                  {}};
  if (absc >= 1.0 - 1e-12) {
    // coincident detections: any superposition collapses to y1
    sol.degenerate = true;
    sol.log_likelihood = LikelihoodValue{0.0, 0.0, 2};
    return sol;
  }
  const Complex phase = absc > 0.0 ? c12 / absc : Complex(1.0, 0.0);
  CVector amp = (phase * y1.amp() + y2.amp()) / std::sqrt(2.0 * (1.0 + absc));
  sol.psi = Ket(std::move(amp));
  sol.log_likelihood = LikelihoodValue{std::log(0.5 * (1.0 + absc)), 0.0, 2};
  return sol;
}

// ---------------------------------------------------------------------------
// Orthogonal closed form (Eq.-(10)-style reconstruction)

inline DensityMatrix estimate_orthogonal(const Pom& pom,
                                         const FrequencyTable& ft) {
  std::vector<const Effect*> eff;
  for (int id : ft.ids) {
    const Effect& e = effect_by_id(pom, id);
    if (!e.rank1()) {
      throw UnsupportedPom("estimate_orthogonal: outcome " +
                           std::to_string(id) + " is not rank 1");
    }
    eff.push_back(&e);
  }
  for (std::size_t i = 0; i < eff.size(); ++i) {
    for (std::size_t j = i + 1; j < eff.size(); ++j) {
      if (std::abs(inner(*eff[i]->ket, *eff[j]->ket)) > 1e-8) {
        throw UnsupportedPom(
            "estimate_orthogonal: outcome states are not orthogonal");
      }
    }
  }
  CMatrix rho = CMatrix::Zero(pom.dim, pom.dim);
  for (std::size_t i = 0; i < eff.size(); ++i) {
    rho.noalias() += ft.f[i] * eff[i]->ket->projector();
  }
  return DensityMatrix(std::move(rho));
}

// ---------------------------------------------------------------------------
// Least-squares inversion baseline

struct InversionSolution {
  CMatrix rho_raw;  // Hermitian, unit trace; PSD NOT guaranteed
  double min_eigenvalue = 0.0;
  double constraint_residual = 0.0;  // ||A theta - b||_2
  double max_defect = 0.0;           // max_i |w_i Tr(rho Pi_i) - f_i|
  int rank = 0;
  bool rank_deficient = false;
};

namespace detail {

// Coordinates of a Hermitian matrix in the orthonormal traceless basis:
// diagonal entries first (d-1 of them), then (sqrt2 Re M_pq, -sqrt2 Im M_pq)
// for p < q in row-major order.
inline void traceless_coords(const CMatrix& M, RVector& out) {
  const int d = static_cast<int>(M.rows());
  out.resize(d * d - 1);
  int p = 0;
  double running = 0.0;  // sum of the first l diagonal entries
  for (int l = 1; l < d; ++l) {
    running += M(l - 1, l - 1).real();
    out(p++) = (running - double(l) * M(l, l).real()) /
               std::sqrt(double(l) * double(l + 1));
  }
  const double s2 = std::sqrt(2.0);
  for (int r = 0; r < d; ++r) {
    for (int c = r + 1; c < d; ++c) {
      out(p++) = s2 * M(r, c).real();
      out(p++) = -s2 * M(r, c).imag();
    }
  }
}

inline void traceless_coords_rank1(const CVector& y, double scale,
                                   RVector& out) {
  const int d = static_cast<int>(y.size());
  out.resize(d * d - 1);
  int p = 0;
  double running = 0.0;
  for (int l = 1; l < d; ++l) {
    running += scale * std::norm(y(l - 1));
    out(p++) = (running - double(l) * scale * std::norm(y(l))) /
               std::sqrt(double(l) * double(l + 1));
  }
  const double s2 = std::sqrt(2.0);
  for (int r = 0; r < d; ++r) {
    for (int c = r + 1; c < d; ++c) {
      const Complex m = scale * y(r) * std::conj(y(c));
      out(p++) = s2 * m.real();
      out(p++) = -s2 * m.imag();
    }
  }
}

inline CMatrix from_traceless_coords(const RVector& theta, int d) {
  CMatrix M = CMatrix::Identity(d, d) / double(d);
  int p = 0;
  for (int l = 1; l < d; ++l) {
    const double c = theta(p++) / std::sqrt(double(l) * double(l + 1));
    for (int j = 0; j < l; ++j) M(j, j) += c;
    M(l, l) -= double(l) * c;
  }
  const double inv_s2 = 1.0 / std::sqrt(2.0);
  for (int r = 0; r < d; ++r) {
    for (int c = r + 1; c < d; ++c) {
      const double re = theta(p++) * inv_s2;
      const double im = -theta(p++) * inv_s2;
      M(r, c) += Complex(re, im);
      M(c, r) += Complex(re, -im);
    }
  }
  return M;
}

}  // namespace detail

// Minimum-norm least-squares solution of w_i Tr(rho Pi_i) = f_i over
// Hermitian unit-trace matrices.  Positivity is deliberately NOT enforced;
// the returned min eigenvalue is the finding.
inline InversionSolution estimate_inversion(
    const Pom& pom, const std::vector<OutcomeFreq>& data) {
  if (data.empty()) throw InvariantViolation("estimate_inversion: no data");
  const int d = pom.dim;
  const int n_par = d * d - 1;
  const int rows = static_cast<int>(data.size());
  RMatrix A(rows, n_par);
  RVector b(rows);
  RVector coords;
  for (int r = 0; r < rows; ++r) {
    const Effect& e = effect_by_id(pom, data[r].id);
    if (e.rank1()) {
      detail::traceless_coords_rank1(e.ket->amp(), e.scale, coords);
    } else {
      detail::traceless_coords(*e.dense, coords);
    }
    A.row(r) = e.weight * coords.transpose();
    b(r) = data[r].f - e.weight * e.trace() / double(d);
  }

  Eigen::CompleteOrthogonalDecomposition<RMatrix> cod(A);
  const RVector theta = cod.solve(b);

  InversionSolution sol;
  sol.rank = static_cast<int>(cod.rank());
  sol.rank_deficient = sol.rank < std::min(rows, n_par);
  sol.rho_raw = detail::from_traceless_coords(theta, d);
  const RVector defect = A * theta - b;
  sol.constraint_residual = defect.norm();
  sol.max_defect = defect.cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sol.rho_raw,
                                            Eigen::EigenvaluesOnly);
  sol.min_eigenvalue = es.eigenvalues().minCoeff();
  return sol;
}

inline InversionSolution estimate_inversion(const Pom& pom,
                                            const FrequencyTable& ft) {
  return estimate_inversion(pom, to_outcome_freqs(ft));
}

// ---------------------------------------------------------------------------
// Comparison report

// Clamp negative eigenvalues to zero and renormalize; the standard physical
// projection used to evaluate a likelihood on a non-PSD reconstruction.
inline DensityMatrix psd_clip(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const RVector lam = es.eigenvalues().cwiseMax(0.0);
  const double tr = lam.sum();
  if (!(tr > 0.0)) throw InvariantViolation("psd_clip: no positive part");
  CMatrix out = es.eigenvectors() * (lam / tr).asDiagonal() *
                es.eigenvectors().adjoint();
  return DensityMatrix(std::move(out));
}

struct NamedState {
  std::string name;
  CMatrix state;
};

struct CompareRow {
  std::string name;
  double log_per_datum = 0.0;
  double weight_log_offset = 0.0;
  double min_eigenvalue = 0.0;
  bool psd_clipped = false;
  std::optional<double> fidelity_to_true;
};

struct CompareReport {
  std::vector<CompareRow> rows;
};

inline CompareReport likelihood_compare(
    const std::vector<NamedState>& states, const Pom& pom,
    const FrequencyTable& ft,
    const std::optional<DensityMatrix>& true_state = std::nullopt) {
  CompareReport rep;
  for (const NamedState& ns : states) {
    require_same_dim(ns.state.rows(), pom.dim, "likelihood_compare");
    CompareRow row;
    row.name = ns.name;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(ns.state,
                                              Eigen::EigenvaluesOnly);
    row.min_eigenvalue = es.eigenvalues().minCoeff();
    row.psd_clipped = row.min_eigenvalue < -1e-10;
    // clipping also scrubs numerical dust on already-physical states
    const DensityMatrix usable = psd_clip(ns.state);
    const LikelihoodValue lv = log_likelihood(usable, pom, ft);
    row.log_per_datum = lv.log_per_datum;
    row.weight_log_offset = lv.weight_log_offset;
    if (true_state) row.fidelity_to_true = fidelity(usable, *true_state);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace qse
