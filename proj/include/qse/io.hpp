#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qse/ensemble.hpp"

// File formats.  Complex matrices serialize as row-major nested arrays of
// [re, im] pairs with a "dim" field; POMs serialize as the spec that
// reproduces them, not as dense effect lists (a dump flag emits those).

namespace qse {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline void check_keys(const Json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
  }
}

// ---------------------------------------------------------------------------
// Matrices and kets

inline Json matrix_to_json(const CMatrix& m) {
  Json entries = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back({m(r, c).real(), m(r, c).imag()});
    }
    entries.push_back(std::move(row));
  }
  return Json{{"dim", m.rows()}, {"entries", std::move(entries)}};
}

inline CMatrix matrix_from_json(const Json& j) {
  check_keys(j, {"dim", "entries"}, "matrix");
  const int d = j.at("dim").get<int>();
  if (d < 1) throw ConfigError("matrix: dim must be >= 1");
  const Json& entries = j.at("entries");
  if (!entries.is_array() || static_cast<int>(entries.size()) != d) {
    throw ConfigError("matrix: entries must be a dim x dim array");
  }
  CMatrix m(d, d);
  for (int r = 0; r < d; ++r) {
    const Json& row = entries.at(r);
    if (!row.is_array() || static_cast<int>(row.size()) != d) {
      throw ConfigError("matrix: row " + std::to_string(r) + " has wrong size");
    }
    for (int c = 0; c < d; ++c) {
      m(r, c) = Complex(row.at(c).at(0).get<double>(),
                        row.at(c).at(1).get<double>());
    }
  }
  return m;
}

inline Json ket_to_json(const Ket& k) {
  Json amps = Json::array();
  for (Eigen::Index i = 0; i < k.amp().size(); ++i) {
    amps.push_back({k.amp()(i).real(), k.amp()(i).imag()});
  }
  return Json{{"dim", k.dim()}, {"amplitudes", std::move(amps)}};
}

inline Ket ket_from_json(const Json& j) {
  check_keys(j, {"dim", "amplitudes"}, "ket");
  const int d = j.at("dim").get<int>();
  const Json& amps = j.at("amplitudes");
  if (!amps.is_array() || static_cast<int>(amps.size()) != d) {
    throw ConfigError("ket: amplitudes must have length dim");
  }
  CVector v(d);
  for (int i = 0; i < d; ++i) {
    v(i) = Complex(amps.at(i).at(0).get<double>(),
                   amps.at(i).at(1).get<double>());
  }
  return Ket(std::move(v));
}

// ---------------------------------------------------------------------------
// POM specs

struct PomSpec {
  PomKind kind = PomKind::fock_projective;
  int dim = kDefaultDim;
  // heterodyne_grid: either a disk description or explicit points
  std::optional<double> radius;
  std::optional<double> spacing;
  std::vector<GridPoint> points;
  double max_point_truncation = 1e-6;
  // quadrature_bins
  std::vector<double> phases;
  std::vector<double> bin_edges;
  // custom rank-1
  std::vector<Ket> kets;
  std::vector<double> weights;
  double scale = 1.0;
};

inline Pom build_pom(const PomSpec& spec) {
  switch (spec.kind) {
    case PomKind::fock_projective:
      return pom_fock_projective(spec.dim);
    case PomKind::heterodyne_grid: {
      if (!spec.points.empty()) {
        return pom_heterodyne_grid(spec.dim, spec.points,
                                   spec.max_point_truncation);
      }
      if (!spec.radius || !spec.spacing) {
        throw ConfigError("heterodyne_grid: need radius+spacing or points");
      }
      return pom_heterodyne_grid(spec.dim,
                                 make_disk_grid(*spec.radius, *spec.spacing),
                                 spec.max_point_truncation);
    }
    case PomKind::quadrature_bins:
      return pom_quadrature_bins(spec.dim, spec.phases, spec.bin_edges);
    case PomKind::custom:
      return pom_custom_rank1(spec.dim, spec.kets, spec.weights, spec.scale);
  }
  throw ConfigError("build_pom: unknown kind");
}

inline Json edge_to_json(double e) {
  if (e == std::numeric_limits<double>::infinity()) return "inf";
  if (e == -std::numeric_limits<double>::infinity()) return "-inf";
  return e;
}

inline double edge_from_json(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("bin_edges: bad edge \"" + s + "\"");
  }
  return j.get<double>();
}

inline Json pom_spec_to_json(const PomSpec& spec) {
  Json j{{"kind", to_string(spec.kind)}, {"dim", spec.dim}};
  switch (spec.kind) {
    case PomKind::fock_projective:
      break;
    case PomKind::heterodyne_grid:
      if (spec.radius && spec.spacing && spec.points.empty()) {
        j["radius"] = *spec.radius;
        j["spacing"] = *spec.spacing;
      } else {
        Json pts = Json::array();
        for (const GridPoint& p : spec.points) {
          pts.push_back({p.center.real(), p.center.imag(), p.area});
        }
        j["points"] = std::move(pts);
      }
      if (spec.max_point_truncation != 1e-6) {
        j["max_point_truncation"] = spec.max_point_truncation;
      }
      break;
    case PomKind::quadrature_bins: {
      j["phases"] = spec.phases;
      Json edges = Json::array();
      for (double e : spec.bin_edges) edges.push_back(edge_to_json(e));
      j["bin_edges"] = std::move(edges);
      break;
    }
    case PomKind::custom: {
      Json kets = Json::array();
      for (const Ket& k : spec.kets) kets.push_back(ket_to_json(k));
      j["kets"] = std::move(kets);
      j["weights"] = spec.weights;
      j["scale"] = spec.scale;
      break;
    }
  }
  return j;
}

inline PomSpec pom_spec_from_json(const Json& j) {
  check_keys(j,
             {"kind", "dim", "radius", "spacing", "points",
              "max_point_truncation", "phases", "bin_edges", "kets", "weights",
              "scale"},
             "pom_spec");
  PomSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  spec.dim = j.value("dim", kDefaultDim);
  if (kind == "fock_projective") {
    spec.kind = PomKind::fock_projective;
  } else if (kind == "heterodyne_grid") {
    spec.kind = PomKind::heterodyne_grid;
    if (j.contains("points")) {
      for (const Json& p : j.at("points")) {
        spec.points.push_back(GridPoint{
            Complex(p.at(0).get<double>(), p.at(1).get<double>()),
            p.at(2).get<double>()});
      }
    } else {
      spec.radius = j.at("radius").get<double>();
      spec.spacing = j.at("spacing").get<double>();
    }
    spec.max_point_truncation = j.value("max_point_truncation", 1e-6);
  } else if (kind == "quadrature_bins") {
    spec.kind = PomKind::quadrature_bins;
    spec.phases = j.at("phases").get<std::vector<double>>();
    for (const Json& e : j.at("bin_edges")) {
      spec.bin_edges.push_back(edge_from_json(e));
    }
  } else if (kind == "custom") {
    spec.kind = PomKind::custom;
    for (const Json& k : j.at("kets")) spec.kets.push_back(ket_from_json(k));
    if (j.contains("weights")) {
      spec.weights = j.at("weights").get<std::vector<double>>();
    }
    spec.scale = j.value("scale", 1.0);
  } else {
    throw ConfigError("pom_spec: unknown kind \"" + kind + "\"");
  }
  return spec;
}

// Dense effect dump, behind an explicit flag in the CLI.
inline Json pom_effects_to_json(const Pom& pom) {
  Json effects = Json::array();
  for (const Effect& e : pom.effects) {
    Json je{{"id", e.id}, {"weight", e.weight}};
    je["matrix"] = matrix_to_json(e.op_matrix());
    if (e.label) je["label"] = {(*e.label)[0], (*e.label)[1]};
    effects.push_back(std::move(je));
  }
  return effects;
}

// ---------------------------------------------------------------------------
// State specs

enum class StateKind { fock, coherent, thermal, displaced_thermal, matrix_file };

struct StateSpec {
  StateKind kind = StateKind::fock;
  int fock_k = 0;
  Complex alpha{0.0, 0.0};
  double mean_n = 0.0;
  std::string path;
};

inline DensityMatrix build_state(const StateSpec& spec, int dim) {
  switch (spec.kind) {
    case StateKind::fock:
      if (spec.fock_k < 0 || spec.fock_k >= dim) {
        throw ConfigError("state: fock level out of range");
      }
      return DensityMatrix::from_ket(Ket::basis_state(spec.fock_k, dim));
    case StateKind::coherent:
      return DensityMatrix::from_ket(coherent_state(spec.alpha, dim).ket);
    case StateKind::thermal:
      return displaced_thermal(0.0, spec.mean_n, dim).rho;
    case StateKind::displaced_thermal:
      return displaced_thermal(spec.alpha, spec.mean_n, dim).rho;
    case StateKind::matrix_file: {
      std::ifstream in(spec.path);
      if (!in) throw ConfigError("state: cannot open \"" + spec.path + "\"");
      Json j = Json::parse(in);
      CMatrix m = matrix_from_json(j);
      if (m.rows() != dim) {
        throw ConfigError("state: matrix dim " + std::to_string(m.rows()) +
                          " does not match requested dim " +
                          std::to_string(dim));
      }
      return DensityMatrix(std::move(m));
    }
  }
  throw ConfigError("state: unknown kind");
}

inline Json state_spec_to_json(const StateSpec& spec) {
  switch (spec.kind) {
    case StateKind::fock:
      return Json{{"kind", "fock"}, {"k", spec.fock_k}};
    case StateKind::coherent:
      return Json{{"kind", "coherent"},
                  {"alpha", {spec.alpha.real(), spec.alpha.imag()}}};
    case StateKind::thermal:
      return Json{{"kind", "thermal"}, {"mean_n", spec.mean_n}};
    case StateKind::displaced_thermal:
      return Json{{"kind", "displaced_thermal"},
                  {"alpha", {spec.alpha.real(), spec.alpha.imag()}},
                  {"mean_n", spec.mean_n}};
    case StateKind::matrix_file:
      return Json{{"kind", "matrix_file"}, {"path", spec.path}};
  }
  throw ConfigError("state: unknown kind");
}

inline StateSpec state_spec_from_json(const Json& j) {
  check_keys(j, {"kind", "k", "alpha", "mean_n", "path"}, "state");
  StateSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fock") {
    spec.kind = StateKind::fock;
    spec.fock_k = j.at("k").get<int>();
  } else if (kind == "coherent") {
    spec.kind = StateKind::coherent;
    spec.alpha = Complex(j.at("alpha").at(0).get<double>(),
                         j.at("alpha").at(1).get<double>());
  } else if (kind == "thermal") {
    spec.kind = StateKind::thermal;
    spec.mean_n = j.at("mean_n").get<double>();
  } else if (kind == "displaced_thermal") {
    spec.kind = StateKind::displaced_thermal;
    spec.alpha = Complex(j.at("alpha").at(0).get<double>(),
                         j.at("alpha").at(1).get<double>());
    spec.mean_n = j.at("mean_n").get<double>();
  } else if (kind == "matrix_file") {
    spec.kind = StateKind::matrix_file;
    spec.path = j.at("path").get<std::string>();
  } else {
    throw ConfigError("state: unknown kind \"" + kind + "\"");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Measurement records

struct MeasurementRecord {
  PomSpec pom_spec;
  FrequencyTable table;
  Json meta;  // n, seed, residual_mass... informational only
};

inline Json record_to_json(const MeasurementRecord& rec) {
  Json outcomes = Json::array();
  for (int i = 0; i < rec.table.n_distinct(); ++i) {
    outcomes.push_back(
        Json{{"id", rec.table.ids[i]}, {"count", rec.table.counts[i]}});
  }
  Json j{{"pom_spec", pom_spec_to_json(rec.pom_spec)},
         {"outcomes", std::move(outcomes)}};
  if (!rec.meta.is_null()) j["meta"] = rec.meta;
  return j;
}

inline MeasurementRecord record_from_json(const Json& j) {
  check_keys(j, {"pom_spec", "outcomes", "meta"}, "record");
  MeasurementRecord rec;
  rec.pom_spec = pom_spec_from_json(j.at("pom_spec"));
  std::vector<int> ids;
  std::vector<long long> counts;
  for (const Json& o : j.at("outcomes")) {
    check_keys(o, {"id", "count"}, "record outcome");
    ids.push_back(o.at("id").get<int>());
    counts.push_back(o.at("count").get<long long>());
  }
  rec.table = FrequencyTable::from_counts(std::move(ids), std::move(counts));
  if (j.contains("meta")) rec.meta = j.at("meta");
  return rec;
}

inline std::string record_to_csv(const FrequencyTable& ft) {
  std::ostringstream out;
  out << "id,count\n";
  for (int i = 0; i < ft.n_distinct(); ++i) {
    out << ft.ids[i] << "," << ft.counts[i] << "\n";
  }
  return out.str();
}

inline FrequencyTable record_from_csv(std::istream& in) {
  std::string line;
  std::vector<int> ids;
  std::vector<long long> counts;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("id", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("record csv: bad line \"" + line + "\"");
    }
    ids.push_back(std::stoi(line.substr(0, comma)));
    counts.push_back(std::stoll(line.substr(comma + 1)));
  }
  return FrequencyTable::from_counts(std::move(ids), std::move(counts));
}

// ---------------------------------------------------------------------------
// Estimates and reports

inline Json mle_solution_to_json(const MleSolution& sol,
                                 const MleOptions& opts) {
  return Json{{"method", "mle"},
              {"state", ket_to_json(sol.psi)},
              {"log_likelihood_per_datum", sol.log_likelihood.log_per_datum},
              {"weight_log_offset", sol.log_likelihood.weight_log_offset},
              {"min_eigenvalue", 0.0},
              {"lambda_top", sol.lambda_top},
              {"aux_weights", std::vector<double>(sol.a.data(),
                                                  sol.a.data() + sol.a.size())},
              {"iterations", sol.iterations},
              {"residual", sol.residual},
              {"converged", sol.converged},
              {"degenerate", sol.degenerate},
              {"non_physical", false},
              {"options",
               {{"tol", opts.tol},
                {"max_iter", opts.max_iter},
                {"damping", opts.damping}}}};
}

inline Json inversion_solution_to_json(const InversionSolution& sol,
                                       const LikelihoodValue& lv) {
  return Json{{"method", "inversion"},
              {"state", matrix_to_json(sol.rho_raw)},
              {"log_likelihood_per_datum", lv.log_per_datum},
              {"weight_log_offset", lv.weight_log_offset},
              {"likelihood_psd_clipped", true},
              {"min_eigenvalue", sol.min_eigenvalue},
              {"non_physical", sol.min_eigenvalue < -1e-10},
              {"constraint_residual", sol.constraint_residual},
              {"max_defect", sol.max_defect},
              {"rank", sol.rank},
              {"rank_deficient", sol.rank_deficient},
              {"iterations", 0},
              {"residual", sol.constraint_residual},
              {"degenerate", false},
              {"options", Json::object()}};
}

inline Json orthogonal_estimate_to_json(const DensityMatrix& rho,
                                        const LikelihoodValue& lv) {
  return Json{{"method", "orthogonal"},
              {"state", matrix_to_json(rho.matrix())},
              {"log_likelihood_per_datum", lv.log_per_datum},
              {"weight_log_offset", lv.weight_log_offset},
              {"min_eigenvalue", rho.min_eigenvalue()},
              {"non_physical", false},
              {"iterations", 0},
              {"residual", 0.0},
              {"degenerate", false},
              {"options", Json::object()}};
}

inline Json ensemble_result_to_json(const EnsembleResult& res,
                                    const SamplingPlan& plan,
                                    const MleOptions& opts) {
  Json se = Json::array();
  for (Eigen::Index r = 0; r < res.standard_error_per_entry.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < res.standard_error_per_entry.cols(); ++c) {
      row.push_back(res.standard_error_per_entry(r, c));
    }
    se.push_back(std::move(row));
  }
  Json j{{"rho_mle", matrix_to_json(res.rho_mle.matrix())},
         {"standard_error_per_entry", std::move(se)},
         {"datasets_used", res.datasets_used},
         {"excluded", res.excluded},
         {"seed", plan.seed},
         {"n_per_dataset", plan.n_per_dataset},
         {"n_datasets", plan.n_datasets},
         {"options",
          {{"tol", opts.tol},
           {"max_iter", opts.max_iter},
           {"damping", opts.damping}}}};
  if (res.observable_mean) {
    j["mean_photon"] = *res.observable_mean;
    j["mean_photon_se"] = *res.observable_se;
  }
  return j;
}

inline std::string study_to_csv(const StudyReport& rep) {
  std::ostringstream out;
  out << "dim,n,trials,inversion_violation_fraction,mle_min_eig_min,"
         "mean_fidelity\n";
  for (const StudyRow& row : rep.rows) {
    out << row.dim << "," << row.n << "," << row.trials << ","
        << row.inversion_violation_fraction << "," << row.mle_min_eig_min
        << "," << row.mean_fidelity << "\n";
  }
  return out.str();
}

inline Json study_to_json(const StudyReport& rep) {
  Json rows = Json::array();
  for (const StudyRow& row : rep.rows) {
    rows.push_back(
        Json{{"dim", row.dim},
             {"n", row.n},
             {"trials", row.trials},
             {"inversion_violation_fraction", row.inversion_violation_fraction},
             {"mle_min_eig_min", row.mle_min_eig_min},
             {"mean_fidelity", row.mean_fidelity},
             {"inversion_min_eig_min", row.inversion_min_eig_min},
             {"inversion_min_eigs", row.inversion_min_eigs},
             {"mle_min_eigs", row.mle_min_eigs}});
  }
  return Json{{"seed", rep.seed}, {"rows", std::move(rows)}};
}

inline Json compare_report_to_json(const CompareReport& rep) {
  Json rows = Json::array();
  for (const CompareRow& row : rep.rows) {
    Json r{{"name", row.name},
           {"log_likelihood_per_datum", row.log_per_datum},
           {"weight_log_offset", row.weight_log_offset},
           {"min_eigenvalue", row.min_eigenvalue},
           {"psd_clipped", row.psd_clipped}};
    if (row.fidelity_to_true) r["fidelity_to_true"] = *row.fidelity_to_true;
    rows.push_back(std::move(r));
  }
  return Json{{"rows", std::move(rows)}};
}

inline std::string compare_report_to_text(const CompareReport& rep) {
  std::ostringstream out;
  out << "name                 log_lik/datum   min_eig      clipped  fidelity\n";
  for (const CompareRow& row : rep.rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-20s %14.9f  %11.3e  %-7s  %s\n",
                  row.name.c_str(), row.log_per_datum, row.min_eigenvalue,
                  row.psd_clipped ? "yes" : "no",
                  row.fidelity_to_true
                      ? std::to_string(*row.fidelity_to_true).c_str()
                      : "-");
    out << buf;
  }
  return out.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write \"" + path + "\"");
  out << content;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open \"" + path + "\"");
  return Json::parse(in);
}

}  // namespace qse
