#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "qse/measurement.hpp"

// The likelihood functional and the inequality chain around it.  Products
// over data are always evaluated in log space; a dataset with n = 10^4
// underflows the direct product long before it troubles the logarithm.

namespace qse {

struct FrequencyTable {
  std::vector<int> ids;          // distinct outcome ids, ascending
  std::vector<long long> counts; // aligned, all > 0
  long long n = 0;
  std::vector<double> f;         // counts / n

  int n_distinct() const { return static_cast<int>(ids.size()); }

  static FrequencyTable from_counts(std::vector<int> ids_in,
                                    std::vector<long long> counts_in) {
    if (ids_in.size() != counts_in.size() || ids_in.empty()) {
      throw InvariantViolation("FrequencyTable: ids/counts shape");
    }
    std::vector<std::size_t> order(ids_in.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ids_in[a] < ids_in[b];
    });
    FrequencyTable ft;
    for (std::size_t i : order) {
      if (counts_in[i] < 0) {
        throw InvariantViolation("FrequencyTable: negative count");
      }
      if (counts_in[i] == 0) continue;  // zero-count entries are omitted
      if (!ft.ids.empty() && ft.ids.back() == ids_in[i]) {
        throw InvariantViolation("FrequencyTable: duplicate id " +
                                 std::to_string(ids_in[i]));
      }
      ft.ids.push_back(ids_in[i]);
      ft.counts.push_back(counts_in[i]);
      ft.n += counts_in[i];
    }
    if (ft.n < 1) throw InvariantViolation("FrequencyTable: empty data");
    ft.f.resize(ft.ids.size());
    for (std::size_t i = 0; i < ft.ids.size(); ++i) {
      ft.f[i] = double(ft.counts[i]) / double(ft.n);
    }
    return ft;
  }
};

inline FrequencyTable tabulate(const std::vector<int>& outcomes) {
  if (outcomes.empty()) throw InvariantViolation("tabulate: empty data");
  std::map<int, long long> hist;
  for (int id : outcomes) ++hist[id];
  std::vector<int> ids;
  std::vector<long long> counts;
  for (const auto& [id, k] : hist) {
    ids.push_back(id);
    counts.push_back(k);
  }
  return FrequencyTable::from_counts(std::move(ids), std::move(counts));
}

// Auxiliary positive weights a_i in the max gauge (max a_i = 1).
struct AuxWeights {
  RVector a;

  static AuxWeights max_gauge(RVector raw) {
    if (raw.size() < 1) throw InvariantViolation("AuxWeights: empty");
    const double m = raw.maxCoeff();
    if (!(m > 0.0) || raw.minCoeff() <= 0.0) {
      throw InvariantViolation("AuxWeights: entries must be positive");
    }
    return AuxWeights{raw / m};
  }
};

// Per-datum log likelihood split into the outcome-state part
// sum' f_i ln x_i and the measure-weight constant the discretization
// contributes; the latter is the same for every state, so argmax never sees
// it, but bound checks against true detection probabilities need the total.
struct LikelihoodValue {
  double log_per_datum = 0.0;      // sum' f_i ln x_i, <= 0, -inf allowed
  double weight_log_offset = 0.0;  // sum' f_i ln(p_i / x_i)
  long long n = 0;

  double total() const { return log_per_datum + weight_log_offset; }
};

namespace detail {

// Outcome-state probability x_i: <y|rho|y> for rank-1 effects (the Eq.-(5)
// style kernel), Tr(rho Pi) otherwise.  Offset multiplier makes
// x_i * offset_i the full detection probability w_i Tr(rho Pi_i).
inline void effect_probability(const CMatrix& rho, const Effect& e, double& x,
                               double& offset_factor) {
  if (e.rank1()) {
    x = (e.ket->amp().adjoint() * rho * e.ket->amp())(0).real();
    offset_factor = e.weight * e.scale;
  } else {
    x = (rho.cwiseProduct(e.dense->transpose())).sum().real();
    offset_factor = e.weight;
  }
  if (x < 0.0) x = 0.0;  // numerical dust on PSD forms
}

}  // namespace detail

inline const Effect& effect_by_id(const Pom& pom, int id) {
  // ids are assigned sequentially by every builder
  if (id >= 0 && id < pom.n_effects() && pom.effects[id].id == id) {
    return pom.effects[id];
  }
  for (const Effect& e : pom.effects) {
    if (e.id == id) return e;
  }
  throw InvariantViolation("unknown outcome id " + std::to_string(id));
}

inline LikelihoodValue log_likelihood(const DensityMatrix& rho, const Pom& pom,
                                      const FrequencyTable& ft) {
  require_same_dim(rho.dim(), pom.dim, "log_likelihood");
  LikelihoodValue lv;
  lv.n = ft.n;
  for (int i = 0; i < ft.n_distinct(); ++i) {
    const Effect& e = effect_by_id(pom, ft.ids[i]);
    double x, off;
    detail::effect_probability(rho.matrix(), e, x, off);
    lv.weight_log_offset += ft.f[i] * std::log(off);
    if (x <= 0.0) {
      lv.log_per_datum = -std::numeric_limits<double>::infinity();
      return lv;
    }
    lv.log_per_datum += ft.f[i] * std::log(x);
  }
  return lv;
}

inline LikelihoodValue log_likelihood(const Ket& psi, const Pom& pom,
                                      const FrequencyTable& ft) {
  return log_likelihood(DensityMatrix::from_ket(psi), pom, ft);
}

// R(y, a) = sum' (f_i / a_i) |y_i><y_i| for rank-1 effects; general effects
// enter as f_i / a_i * Pi_i.
inline HermitianOperator r_operator(const Pom& pom, const FrequencyTable& ft,
                                    const AuxWeights& aux) {
  if (aux.a.size() != ft.n_distinct()) {
    throw DimensionMismatch("r_operator: weights misaligned with table");
  }
  CMatrix r = CMatrix::Zero(pom.dim, pom.dim);
  for (int i = 0; i < ft.n_distinct(); ++i) {
    const double ai = aux.a(i);
    if (!(ai > 0.0)) throw InvariantViolation("r_operator: a_i must be > 0");
    const Effect& e = effect_by_id(pom, ft.ids[i]);
    const double c = ft.f[i] / ai;
    if (e.rank1()) {
      r.noalias() += c * e.ket->projector();
    } else {
      r.noalias() += c * *e.dense;
    }
  }
  return HermitianOperator(std::move(r));
}

struct JensenGap {
  double lhs = 0.0;  // prod (x_i / a_i)^{f_i}
  double rhs = 0.0;  // sum f_i x_i / a_i
};

// Geometric-arithmetic mean inequality in the frequency parametrization;
// equality holds exactly at x = a.
inline JensenGap jensen_gap(const RVector& x, const RVector& a,
                            const RVector& f) {
  if (x.size() != a.size() || x.size() != f.size() || x.size() < 1) {
    throw DimensionMismatch("jensen_gap: vector sizes differ");
  }
  double log_lhs = 0.0;
  double rhs = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(a(i) > 0.0)) throw InvariantViolation("jensen_gap: a_i must be > 0");
    if (x(i) < 0.0) throw InvariantViolation("jensen_gap: x_i must be >= 0");
    rhs += f(i) * x(i) / a(i);
    if (f(i) > 0.0) {
      log_lhs += x(i) == 0.0 ? -std::numeric_limits<double>::infinity()
                             : f(i) * (std::log(x(i)) - std::log(a(i)));
    }
  }
  return JensenGap{std::exp(log_lhs), rhs};
}

// prod' f_j^{f_j}: the upper bound the likelihood of any state obeys for
// complete measurements, attained by the orthogonal reconstruction.
inline double upper_bound_state_independent(const FrequencyTable& ft) {
  double acc = 0.0;
  for (double fi : ft.f) acc += fi * std::log(fi);
  return std::exp(acc);
}

}  // namespace qse
