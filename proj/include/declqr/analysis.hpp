#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "declqr/scenario.hpp"
#include "declqr/sweep.hpp"

namespace declqr {

// Everything analyze() establishes about one scenario: per-node design
// quality, frequency-domain optimality margins, the structured-uncertainty
// certificate (when its block-diagonality hypotheses hold), information-
// constraint conformance, nominal cost, and per-channel gain/phase margins.
struct AnalysisReport {
  std::string scenario_name;
  int nodes = 0;
  double beta = 0.0, rho = 0.0;

  bool b_block_diagonal = false;
  bool r_block_diagonal = false;
  bool hypotheses_ok() const { return b_block_diagonal && r_block_diagonal; }
  std::string hypothesis_note;

  std::vector<double> care_residuals;
  std::vector<double> care_abscissas;
  std::vector<double> kalman_margins;
  std::vector<double> kalman_scales;  // ||R_des(i)|| used for the pass level
  bool kalman_pass = false;

  std::optional<MuCertificate> mu;
  bool mu_pass = false;

  double info_constraint_worst = 0.0;
  bool info_pass = false;

  double h2_nominal = 0.0;

  std::vector<MarginReport> gain_margins;   // one per node channel
  std::vector<MarginReport> phase_margins;  // one per node channel
  bool guarantee_gain_pass = false;   // certified interval covers (1/2, window]
  bool guarantee_phase_pass = false;  // certified phase range covers (-60, 60)
  std::vector<bool> perturbation_admissibility;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

namespace detail {

inline bool block_diagonal_ok(const Matrix& M, const BlockPartition& rp,
                              const BlockPartition& cp) {
  try {
    require_block_diagonal(M, "M", rp, cp);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

}  // namespace detail

// Runs the full certification pipeline on a scenario. `margin_tol` is the
// gain-bisection resolution; phase margins resolve to 0.05 degrees.
inline AnalysisReport analyze(const Scenario& sc, double margin_tol = 1e-4) {
  AnalysisReport rep;
  rep.scenario_name = sc.name;
  rep.nodes = sc.dag.node_count;
  rep.beta = sc.beta;
  rep.rho = sc.rho;

  const PartitionedPlant plant = sc.build_plant();
  const DecentralizedController ctrl = synthesize(plant);
  const FrequencyGrid grid = sc.frequency_grid();

  rep.b_block_diagonal =
      detail::block_diagonal_ok(plant.B, plant.state_part, plant.input_part);
  rep.r_block_diagonal =
      detail::block_diagonal_ok(plant.R, plant.input_part, plant.input_part);
  if (!rep.hypotheses_ok()) {
    std::string which = !rep.b_block_diagonal ? "B" : "R";
    if (!rep.b_block_diagonal && !rep.r_block_diagonal) which = "B and R";
    rep.hypothesis_note = which + " not block-diagonal: the decentralized margin "
                          "guarantees do not apply to this plant";
  }

  for (const CareSolution& s : ctrl.node_solutions) {
    rep.care_residuals.push_back(s.residual);
    rep.care_abscissas.push_back(s.closed_loop_abscissa);
  }

  const std::vector<KalmanMargin> km = decentralized_kalman_check(plant, ctrl, grid);
  rep.kalman_pass = true;
  for (int i = 1; i <= plant.node_count(); ++i) {
    const NodeSubsystem sub = descendant_subsystem(plant, i);
    const double scale = spectral_norm(sub.R);
    rep.kalman_margins.push_back(km[i - 1].margin);
    rep.kalman_scales.push_back(scale);
    if (km[i - 1].margin < -1e-8 * scale) rep.kalman_pass = false;
  }

  if (rep.hypotheses_ok()) {
    rep.mu = mu_upper_bound(plant, ctrl, grid);
    rep.mu_pass = rep.mu->overall <= 1.0 + 1e-6;
  }

  const FrequencyGrid info_grid = FrequencyGrid::standard(50);
  double worst = 0.0;
  for (const StateSpaceModel& map :
       {closed_loop_input_map(plant, ctrl), loop_gain_dec(plant, ctrl)}) {
    const InfoConstraintReport r = verify_information_constraint(
        map, plant.closure, plant.input_part, plant.input_part, info_grid, 0.0);
    for (const InfoFlag& f : r.flags) worst = std::max(worst, f.block_norm);
  }
  rep.info_constraint_worst = worst;
  rep.info_pass = worst <= 1e-8;

  rep.h2_nominal = h2_cost(plant, ctrl, unit_noise(plant.state_part));

  rep.guarantee_gain_pass = true;
  rep.guarantee_phase_pass = true;
  for (int ch = 1; ch <= plant.node_count(); ++ch) {
    rep.gain_margins.push_back(gain_margin(plant, ctrl, ch, 1e-3, 1e3, margin_tol));
    rep.phase_margins.push_back(phase_margin(plant, ctrl, ch));
    const MarginReport& g = rep.gain_margins.back();
    const MarginReport& p = rep.phase_margins.back();
    if (!(g.gain_low <= 0.5 + margin_tol && g.high_at_window_edge))
      rep.guarantee_gain_pass = false;
    if (!(p.phase_limit_deg >= 60.0 - 0.05)) rep.guarantee_phase_pass = false;
  }
  if (!rep.hypotheses_ok()) {
    rep.guarantee_gain_pass = false;
    rep.guarantee_phase_pass = false;
  }

  std::vector<Matrix> r_blocks;
  for (int i = 1; i <= plant.node_count(); ++i)
    r_blocks.push_back(detail::node_input_block(plant, i));
  rep.perturbation_admissibility = perturbation_admissible(sc.perturbation, r_blocks, grid);
  return rep;
}

inline nlohmann::json AnalysisReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario_name;
  j["nodes"] = nodes;
  j["beta"] = beta;
  j["rho"] = rho;
  j["hypotheses"] = {{"b_block_diagonal", b_block_diagonal},
                     {"r_block_diagonal", r_block_diagonal},
                     {"ok", hypotheses_ok()},
                     {"note", hypothesis_note}};
  j["care"] = {{"residuals", care_residuals}, {"closed_loop_abscissas", care_abscissas}};
  j["kalman"] = {{"margins", kalman_margins},
                 {"scales", kalman_scales},
                 {"pass", kalman_pass}};
  if (mu) {
    j["mu"] = {{"node_peaks", mu->node_peaks},
               {"kalman_margins", mu->kalman_margins},
               {"overall", mu->overall},
               {"pass", mu_pass}};
  } else {
    j["mu"] = {{"skipped", hypothesis_note}};
  }
  j["information_constraint"] = {{"worst_block_norm", info_constraint_worst},
                                 {"pass", info_pass}};
  j["h2_nominal"] = h2_nominal;
  auto margin_json = [](const MarginReport& m) {
    nlohmann::json o;
    o["channel"] = m.channel;
    o["method"] = m.method;
    if (m.method == "eigenvalue_sweep") {
      o["gain_low"] = m.gain_low;
      o["gain_high"] = m.gain_high;
      o["gain_low_db"] = to_db(m.gain_low);
      o["gain_high_db"] = to_db(m.gain_high);
      o["low_at_window_edge"] = m.low_at_window_edge;
      o["high_at_window_edge"] = m.high_at_window_edge;
      o["abscissa_at_low"] = m.abscissa_at_low;
      o["abscissa_at_high"] = m.abscissa_at_high;
    } else {
      o["phase_limit_deg"] = m.phase_limit_deg;
      o["phase_at_window_edge"] = m.phase_at_window_edge;
    }
    return o;
  };
  j["gain_margins"] = nlohmann::json::array();
  for (const MarginReport& m : gain_margins) j["gain_margins"].push_back(margin_json(m));
  j["phase_margins"] = nlohmann::json::array();
  for (const MarginReport& m : phase_margins) j["phase_margins"].push_back(margin_json(m));
  j["guarantees"] = {{"gain_interval_pass", guarantee_gain_pass},
                     {"phase_range_pass", guarantee_phase_pass}};
  j["perturbation_admissible"] = perturbation_admissibility;
  return j;
}

inline std::string AnalysisReport::to_text() const {
  std::ostringstream out;
  auto pf = [](bool b) { return b ? "PASS" : "FAIL"; };
  out << "scenario: " << scenario_name << "  (nodes: " << nodes << ", beta: " << beta
      << ", rho: " << rho << ")\n";
  out << "hypotheses: B block-diagonal: " << (b_block_diagonal ? "yes" : "no")
      << ", R block-diagonal: " << (r_block_diagonal ? "yes" : "no") << "\n";
  if (!hypothesis_note.empty()) out << "  note: " << hypothesis_note << "\n";
  out << "per-node designs:\n";
  for (size_t i = 0; i < care_residuals.size(); ++i)
    out << "  node " << (i + 1) << ": residual " << care_residuals[i] << ", closed-loop abscissa "
        << care_abscissas[i] << "\n";
  out << "optimality margins (want >= -1e-8 * ||R_i||): " << pf(kalman_pass) << "\n";
  for (size_t i = 0; i < kalman_margins.size(); ++i)
    out << "  node " << (i + 1) << ": " << kalman_margins[i] << "  (scale " << kalman_scales[i]
        << ")\n";
  if (mu) {
    out << "interaction certificate (want overall <= 1 + 1e-6): " << pf(mu_pass) << "\n";
    out << "  node peaks:";
    for (double p : mu->node_peaks) out << " " << p;
    out << "\n  overall: " << mu->overall << "\n";
  } else {
    out << "interaction certificate: skipped (" << hypothesis_note << ")\n";
  }
  out << "information constraint (worst forbidden-block norm, want <= 1e-8): "
      << info_constraint_worst << "  " << pf(info_pass) << "\n";
  out << "nominal quadratic cost rate (unit noise): " << h2_nominal << "\n";
  out << "channel margins:\n";
  for (size_t i = 0; i < gain_margins.size(); ++i) {
    const MarginReport& g = gain_margins[i];
    out << "  channel " << g.channel << ": gain stable over [" << g.gain_low << ", "
        << g.gain_high << "]";
    if (g.high_at_window_edge) out << " (upper end = window edge)";
    out << "  [" << to_db(g.gain_low) << " dB, " << to_db(g.gain_high) << " dB]\n";
    const MarginReport& p = phase_margins[i];
    out << "  channel " << p.channel << ": phase stable over (-" << p.phase_limit_deg << " deg, +"
        << p.phase_limit_deg << " deg)";
    if (p.phase_at_window_edge) out << " (window edge)";
    out << "\n";
  }
  out << "guaranteed gain interval (1/2, window]: " << pf(guarantee_gain_pass) << "\n";
  out << "guaranteed phase range (-60 deg, 60 deg): " << pf(guarantee_phase_pass) << "\n";
  out << "scenario perturbation admissible per node:";
  for (bool b : perturbation_admissibility) out << " " << (b ? "yes" : "no");
  out << "\n";
  return out.str();
}

}  // namespace declqr
