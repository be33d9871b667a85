#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "declqr/robustness.hpp"

namespace declqr {

struct SweepAxis {
  std::string name;  // one of beta, rho, k_db, phi_deg
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

struct GridSpec {
  int count = 400;
  double omega_min = 1e-4;
  double omega_max = 1e4;
};

// A full experiment description: the plant family (baseline matrices plus
// optional beta/rho coupling patterns), the input perturbation, an optional
// two-axis sweep, the frequency grid, and where outputs go.
struct Scenario {
  std::string name;
  Dag dag;
  Matrix A, B, Q, R;
  Matrix beta_pattern, rho_pattern;  // 0x0 when absent
  double beta = 0.0, rho = 0.0;
  PerturbationSpec perturbation;
  SweepAxis axis1, axis2;
  GridSpec grid;
  std::string output_dir = "out";

  bool has_sweep() const { return axis1.count > 0 && axis2.count > 0; }

  Matrix effective_B(double beta_val) const {
    if (beta_pattern.size() == 0) return B;
    return B + beta_val * beta_pattern;
  }
  Matrix effective_R(double rho_val) const {
    if (rho_pattern.size() == 0) return R;
    return R + rho_val * rho_pattern;
  }
  PartitionedPlant build_plant(double beta_val, double rho_val) const {
    return make_partitioned_plant(dag, A, effective_B(beta_val), Q, effective_R(rho_val));
  }
  PartitionedPlant build_plant() const { return build_plant(beta, rho); }
  FrequencyGrid frequency_grid() const {
    return FrequencyGrid::standard(grid.count, grid.omega_min, grid.omega_max);
  }
};

namespace detail {

inline double rng_unit(std::mt19937_64& rng) {
  // Explicit 53-bit mapping keeps streams identical across standard libraries.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double rng_uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * rng_unit(rng);
}

inline nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array())
    throw std::invalid_argument("matrix '" + name + "' must be an array of rows");
  const size_t nr = j.size();
  if (nr == 0) return Matrix(0, 0);
  if (!j[0].is_array())
    throw std::invalid_argument("matrix '" + name + "' must be an array of rows");
  const size_t nc = j[0].size();
  Matrix M(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc));
  for (size_t r = 0; r < nr; ++r) {
    if (!j[r].is_array() || j[r].size() != nc)
      throw std::invalid_argument("matrix '" + name + "' row " + std::to_string(r + 1) +
                                  " has inconsistent length");
    for (size_t c = 0; c < nc; ++c) {
      if (!j[r][c].is_number())
        throw std::invalid_argument("matrix '" + name + "' contains a non-numeric entry");
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return M;
}

inline SweepAxis axis_from_json(const nlohmann::json& j, const std::string& which) {
  SweepAxis ax;
  if (!j.is_object()) throw std::invalid_argument(which + " must be an object");
  ax.name = j.value("name", std::string());
  if (ax.name != "beta" && ax.name != "rho" && ax.name != "k_db" && ax.name != "phi_deg")
    throw std::invalid_argument(which + ".name must be one of beta, rho, k_db, phi_deg");
  if (!j.contains("min") || !j.contains("max") || !j.contains("count"))
    throw std::invalid_argument(which + " needs min, max, count");
  ax.min = j.at("min").get<double>();
  ax.max = j.at("max").get<double>();
  ax.count = j.at("count").get<int>();
  if (!std::isfinite(ax.min) || !std::isfinite(ax.max) || !(ax.min < ax.max))
    throw std::invalid_argument(which + " range must be finite with min < max");
  if (ax.count < 2) throw std::invalid_argument(which + ".count must be at least 2");
  return ax;
}

inline nlohmann::json axis_to_json(const SweepAxis& ax) {
  return nlohmann::json{{"name", ax.name}, {"min", ax.min}, {"max", ax.max},
                        {"count", ax.count}};
}

}  // namespace detail

inline Scenario builtin_counterexample() {
  Scenario sc;
  sc.name = "counterexample";
  sc.dag.node_count = 2;
  sc.dag.edges = {{1, 2}};
  sc.dag.state_sizes = {1, 1};
  sc.dag.input_sizes = {1, 1};
  sc.A.resize(2, 2);
  sc.A << 1, 0, 1, 1;
  sc.B = Matrix::Identity(2, 2);
  sc.beta_pattern.resize(2, 2);
  sc.beta_pattern << 0, 0, 1, 0;
  sc.Q.resize(2, 2);
  sc.Q << 3, 1, 1, 3;
  sc.R = 100.0 * Matrix::Identity(2, 2);
  sc.rho_pattern.resize(2, 2);
  sc.rho_pattern << 0, 1, 1, 0;
  sc.perturbation.kind = PerturbationKind::static_real;
  sc.perturbation.gains = {1.0, 1.0};
  sc.perturbation.channel = 1;
  sc.axis1 = {"beta", -5.0, 5.0, 101};
  sc.axis2 = {"k_db", -20.0, 40.0, 121};
  return sc;
}

inline Scenario builtin_diamond_random(std::uint64_t seed) {
  Scenario sc;
  sc.name = "diamond-random";
  sc.dag.node_count = 4;
  sc.dag.edges = {{1, 2}, {1, 3}, {2, 4}, {3, 4}};
  sc.dag.state_sizes = {1, 1, 1, 1};
  sc.dag.input_sizes = {1, 1, 1, 1};
  std::mt19937_64 rng(seed);
  const ClosureTable closure = transitive_closure(sc.dag);
  sc.A = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (closure.S(i, j) == 1) sc.A(i, j) = detail::rng_uniform(rng, -1.0, 1.0);
  sc.B = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) sc.B(i, i) = detail::rng_uniform(rng, 0.5, 1.5);
  Matrix M(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) M(i, j) = detail::rng_uniform(rng, -1.0, 1.0);
  sc.Q = M.transpose() * M + 0.5 * Matrix::Identity(4, 4);
  sc.R = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) sc.R(i, i) = detail::rng_uniform(rng, 0.5, 2.0);
  sc.perturbation.kind = PerturbationKind::static_real;
  sc.perturbation.gains = {1.0, 1.0, 1.0, 1.0};
  sc.perturbation.channel = 1;
  return sc;
}

inline Scenario scenario_from_json(const nlohmann::json& doc, const std::string& name) {
  if (!doc.is_object()) throw std::invalid_argument("scenario document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "dag" && key != "matrices" && key != "perturbation" && key != "sweep" &&
        key != "grid" && key != "output" && key != "name")
      throw std::invalid_argument("unknown top-level key '" + key + "'");
  }
  Scenario sc;
  sc.name = doc.value("name", name);

  if (!doc.contains("dag")) throw std::invalid_argument("scenario needs a 'dag' section");
  const nlohmann::json& jd = doc.at("dag");
  sc.dag.node_count = jd.value("nodes", 0);
  if (sc.dag.node_count < 1) throw std::invalid_argument("dag.nodes must be at least 1");
  if (jd.contains("edges")) {
    for (const auto& e : jd.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("dag.edges entries must be [from, to] pairs");
      sc.dag.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  sc.dag.state_sizes = jd.value("state_sizes", std::vector<int>(sc.dag.node_count, 1));
  sc.dag.input_sizes = jd.value("input_sizes", std::vector<int>(sc.dag.node_count, 1));

  if (!doc.contains("matrices"))
    throw std::invalid_argument("scenario needs a 'matrices' section");
  const nlohmann::json& jm = doc.at("matrices");
  for (const char* key : {"A", "B", "Q", "R"})
    if (!jm.contains(key))
      throw std::invalid_argument(std::string("matrices.") + key + " is required");
  sc.A = detail::matrix_from_json(jm.at("A"), "A");
  sc.B = detail::matrix_from_json(jm.at("B"), "B");
  sc.Q = detail::matrix_from_json(jm.at("Q"), "Q");
  sc.R = detail::matrix_from_json(jm.at("R"), "R");
  if (jm.contains("beta_pattern"))
    sc.beta_pattern = detail::matrix_from_json(jm.at("beta_pattern"), "beta_pattern");
  if (jm.contains("rho_pattern"))
    sc.rho_pattern = detail::matrix_from_json(jm.at("rho_pattern"), "rho_pattern");
  sc.beta = jm.value("beta", 0.0);
  sc.rho = jm.value("rho", 0.0);
  if (sc.beta_pattern.size() != 0 &&
      (sc.beta_pattern.rows() != sc.B.rows() || sc.beta_pattern.cols() != sc.B.cols()))
    throw std::invalid_argument("beta_pattern must match B");
  if (sc.rho_pattern.size() != 0 &&
      (sc.rho_pattern.rows() != sc.R.rows() || sc.rho_pattern.cols() != sc.R.cols()))
    throw std::invalid_argument("rho_pattern must match R");

  if (doc.contains("perturbation")) {
    const nlohmann::json& jp = doc.at("perturbation");
    const std::string kind = jp.value("kind", "static_real");
    if (kind == "static_real")
      sc.perturbation.kind = PerturbationKind::static_real;
    else if (kind == "static_complex")
      sc.perturbation.kind = PerturbationKind::static_complex;
    else
      throw std::invalid_argument("perturbation.kind must be static_real or static_complex "
                                  "in scenario files");
    sc.perturbation.gains =
        jp.value("gains", std::vector<double>(sc.dag.node_count, 1.0));
    if (jp.contains("phases_deg"))
      sc.perturbation.phases_deg = jp.at("phases_deg").get<std::vector<double>>();
    else if (sc.perturbation.kind == PerturbationKind::static_complex)
      sc.perturbation.phases_deg.assign(sc.dag.node_count, 0.0);
    sc.perturbation.channel = jp.value("channel", 1);
    if (static_cast<int>(sc.perturbation.gains.size()) != sc.dag.node_count)
      throw std::invalid_argument("perturbation.gains needs one entry per node");
    if (sc.perturbation.channel < 1 || sc.perturbation.channel > sc.dag.node_count)
      throw std::invalid_argument("perturbation.channel out of range");
  } else {
    sc.perturbation.kind = PerturbationKind::static_real;
    sc.perturbation.gains.assign(sc.dag.node_count, 1.0);
    sc.perturbation.channel = 1;
  }

  if (doc.contains("sweep")) {
    const nlohmann::json& js = doc.at("sweep");
    if (!js.contains("axis1") || !js.contains("axis2"))
      throw std::invalid_argument("sweep needs axis1 and axis2");
    sc.axis1 = detail::axis_from_json(js.at("axis1"), "sweep.axis1");
    sc.axis2 = detail::axis_from_json(js.at("axis2"), "sweep.axis2");
  }

  if (doc.contains("grid")) {
    const nlohmann::json& jg = doc.at("grid");
    sc.grid.count = jg.value("count", sc.grid.count);
    sc.grid.omega_min = jg.value("omega_min", sc.grid.omega_min);
    sc.grid.omega_max = jg.value("omega_max", sc.grid.omega_max);
    if (sc.grid.count < 2 || !(sc.grid.omega_min > 0.0) ||
        !(sc.grid.omega_max > sc.grid.omega_min))
      throw std::invalid_argument("grid needs count >= 2 and 0 < omega_min < omega_max");
  }
  if (doc.contains("output")) sc.output_dir = doc.at("output").value("dir", sc.output_dir);

  // The scenario must describe a plant the synthesis layer accepts.
  sc.build_plant();
  return sc;
}

// Loads a scenario file, or one of the built-in named scenarios
// ("counterexample", "diamond-random" — the latter uses the seed).
inline Scenario load_scenario(const std::string& path_or_name, std::uint64_t seed = 0) {
  if (path_or_name == "counterexample") return builtin_counterexample();
  if (path_or_name == "diamond-random") return builtin_diamond_random(seed);
  std::ifstream in(path_or_name);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path_or_name + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("scenario parse error in '" + path_or_name + "': " + e.what());
  }
  return scenario_from_json(doc, std::filesystem::path(path_or_name).stem().string());
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json doc;
  nlohmann::json jd;
  jd["nodes"] = sc.dag.node_count;
  nlohmann::json edges = nlohmann::json::array();
  for (auto [f, t] : sc.dag.edges) edges.push_back(nlohmann::json::array({f, t}));
  jd["edges"] = std::move(edges);
  jd["state_sizes"] = sc.dag.state_sizes;
  jd["input_sizes"] = sc.dag.input_sizes;
  doc["dag"] = std::move(jd);

  nlohmann::json jm;
  jm["A"] = detail::matrix_to_json(sc.A);
  jm["B"] = detail::matrix_to_json(sc.B);
  jm["Q"] = detail::matrix_to_json(sc.Q);
  jm["R"] = detail::matrix_to_json(sc.R);
  if (sc.beta_pattern.size() != 0) jm["beta_pattern"] = detail::matrix_to_json(sc.beta_pattern);
  if (sc.rho_pattern.size() != 0) jm["rho_pattern"] = detail::matrix_to_json(sc.rho_pattern);
  jm["beta"] = sc.beta;
  jm["rho"] = sc.rho;
  doc["matrices"] = std::move(jm);

  nlohmann::json jp;
  jp["kind"] = sc.perturbation.kind == PerturbationKind::static_complex ? "static_complex"
                                                                        : "static_real";
  jp["gains"] = sc.perturbation.gains;
  if (!sc.perturbation.phases_deg.empty()) jp["phases_deg"] = sc.perturbation.phases_deg;
  jp["channel"] = sc.perturbation.channel;
  doc["perturbation"] = std::move(jp);

  if (sc.has_sweep()) {
    doc["sweep"] = nlohmann::json{{"axis1", detail::axis_to_json(sc.axis1)},
                                  {"axis2", detail::axis_to_json(sc.axis2)}};
  }
  doc["grid"] = nlohmann::json{{"count", sc.grid.count},
                               {"omega_min", sc.grid.omega_min},
                               {"omega_max", sc.grid.omega_max}};
  doc["output"] = nlohmann::json{{"dir", sc.output_dir}};
  return doc;
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scenario file '" + path + "'");
  out << scenario_to_json(sc).dump(2) << "\n";
}

// Closed-form 3x3 perturbed closed-loop matrix for the two-node chain
// instance (states x1, eta1, x2), with the first channel's gain scaled by k;
// the independent reference the assembled loop is checked against.
inline Matrix counterexample_acl(double beta, double rho, double k) {
  if (!(std::abs(rho) < 100.0))
    throw std::invalid_argument("|rho| must be below 100 to keep R positive definite");
  Matrix A(2, 2), B(2, 2), Q(2, 2), R(2, 2);
  A << 1, 0, 1, 1;
  B << 1, 0, beta, 1;
  Q << 3, 1, 1, 3;
  R << 100, rho, rho, 100;
  const Matrix F1 = solve_care(A, B, Q, R).F;
  Matrix a1(1, 1), b1(1, 1), q1(1, 1), r1(1, 1);
  a1 << 1;
  b1 << 1;
  q1 << 3;
  r1 << 100;
  const double f2 = solve_care(a1, b1, q1, r1).F(0, 0);
  Matrix M(3, 3);
  M << 1 + k * F1(0, 0), k * F1(0, 1), 0,
      1 + beta * F1(0, 0) + F1(1, 0), 1 + beta * F1(0, 1) + F1(1, 1), 0,
      1 + k * beta * F1(0, 0) + F1(1, 0), F1(1, 1) - f2 + k * beta * F1(0, 1), 1 + f2;
  return M;
}

}  // namespace declqr
