// Command-line front end: synthesize controllers, run the certification
// pipeline, sweep stability regions, and compute channel margins for a
// scenario (a JSON file or a built-in name).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "declqr/declqr.hpp"

namespace {

struct CommonOpts {
  std::string scenario = "counterexample";
  std::string out_dir;
  int grid_count = 0;
  std::uint64_t seed = 0;
  double tol = 1e-4;
};

void add_common(CLI::App* cmd, CommonOpts& opt) {
  cmd->add_option("--scenario", opt.scenario,
                  "scenario file, or built-in name (counterexample, diamond-random)");
  cmd->add_option("--out", opt.out_dir, "output directory (default: scenario's output.dir)");
  cmd->add_option("--grid", opt.grid_count, "frequency grid point count override");
  cmd->add_option("--seed", opt.seed, "seed for seeded built-in scenarios");
  cmd->add_option("--tol", opt.tol, "margin bisection tolerance");
}

declqr::Scenario load(const CommonOpts& opt) {
  declqr::Scenario sc = declqr::load_scenario(opt.scenario, opt.seed);
  if (opt.grid_count > 0) sc.grid.count = opt.grid_count;
  if (!opt.out_dir.empty()) sc.output_dir = opt.out_dir;
  return sc;
}

std::filesystem::path ensure_out_dir(const declqr::Scenario& sc) {
  std::filesystem::path dir(sc.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
}

nlohmann::json gain_to_json(const declqr::Matrix& F) {
  return declqr::detail::matrix_to_json(F);
}

int cmd_synth(const CommonOpts& opt) {
  const declqr::Scenario sc = load(opt);
  const declqr::PartitionedPlant plant = sc.build_plant();
  const declqr::DecentralizedController ctrl = declqr::synthesize(plant);
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["state_dim"] = plant.state_dim();
  j["input_dim"] = plant.input_dim();
  j["internal_dim"] = ctrl.internal_dim();
  j["gains"] = nlohmann::json::array();
  for (size_t i = 0; i < ctrl.gains.size(); ++i) {
    nlohmann::json node;
    node["node"] = static_cast<int>(i + 1);
    node["descendants"] = ctrl.des_sets[i];
    node["F"] = gain_to_json(ctrl.gains[i]);
    node["care_residual"] = ctrl.node_solutions[i].residual;
    node["closed_loop_abscissa"] = ctrl.node_solutions[i].closed_loop_abscissa;
    j["gains"].push_back(std::move(node));
  }
  j["realization"] = {{"A_K", gain_to_json(ctrl.A_K)},
                      {"B_K", gain_to_json(ctrl.B_K)},
                      {"C_K", gain_to_json(ctrl.C_K)},
                      {"D_K", gain_to_json(ctrl.D_K)}};
  const auto dir = ensure_out_dir(sc);
  write_text(dir / "controller.json", j.dump(2) + "\n");
  std::cout << "wrote " << (dir / "controller.json").string() << "\n";
  return 0;
}

int cmd_analyze(const CommonOpts& opt) {
  const declqr::Scenario sc = load(opt);
  const declqr::AnalysisReport rep = declqr::analyze(sc, opt.tol);
  const auto dir = ensure_out_dir(sc);
  write_text(dir / "analysis.json", rep.to_json().dump(2) + "\n");
  write_text(dir / "analysis.txt", rep.to_text());
  std::cout << rep.to_text();
  std::cout << "wrote " << (dir / "analysis.json").string() << " and analysis.txt\n";
  return rep.hypotheses_ok() ? 0 : 2;
}

int cmd_sweep(const CommonOpts& opt) {
  const declqr::Scenario sc = load(opt);
  if (!sc.has_sweep())
    throw std::invalid_argument("scenario '" + sc.name + "' defines no sweep axes");
  const declqr::StabilityRegion region = declqr::sweep2d(sc);
  const auto dir = ensure_out_dir(sc);
  declqr::emit_csv(region, (dir / "sweep.csv").string());
  declqr::emit_svg_heatmap(region, (dir / "sweep.svg").string());
  int stable = 0;
  for (const auto& c : region.cells) stable += c.stable;
  std::cout << "swept " << region.axis1.name << " x " << region.axis2.name << " ("
            << region.axis1_values.size() << " x " << region.axis2_values.size() << "); "
            << stable << " of " << region.cells.size() << " cells stable\n";
  std::cout << "wrote " << (dir / "sweep.csv").string() << " and sweep.svg\n";
  return 0;
}

int cmd_margins(const CommonOpts& opt) {
  const declqr::Scenario sc = load(opt);
  const declqr::PartitionedPlant plant = sc.build_plant();
  const declqr::DecentralizedController ctrl = declqr::synthesize(plant);
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["channels"] = nlohmann::json::array();
  for (int ch = 1; ch <= plant.node_count(); ++ch) {
    const declqr::MarginReport g = declqr::gain_margin(plant, ctrl, ch, 1e-3, 1e3, opt.tol);
    const declqr::MarginReport p = declqr::phase_margin(plant, ctrl, ch);
    nlohmann::json o;
    o["channel"] = ch;
    o["gain_low"] = g.gain_low;
    o["gain_high"] = g.gain_high;
    o["gain_low_db"] = declqr::to_db(g.gain_low);
    o["gain_high_db"] = declqr::to_db(g.gain_high);
    o["low_at_window_edge"] = g.low_at_window_edge;
    o["high_at_window_edge"] = g.high_at_window_edge;
    o["phase_limit_deg"] = p.phase_limit_deg;
    o["phase_at_window_edge"] = p.phase_at_window_edge;
    j["channels"].push_back(std::move(o));
    std::cout << "channel " << ch << ": gain [" << g.gain_low << ", " << g.gain_high
              << "], phase +/-" << p.phase_limit_deg << " deg\n";
  }
  const auto dir = ensure_out_dir(sc);
  write_text(dir / "margins.json", j.dump(2) + "\n");
  std::cout << "wrote " << (dir / "margins.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized LQR synthesis and robustness certification"};
  app.require_subcommand(1);

  CommonOpts synth_opt, analyze_opt, sweep_opt, margins_opt;
  CLI::App* synth = app.add_subcommand("synth", "synthesize the decentralized controller");
  add_common(synth, synth_opt);
  CLI::App* analyze = app.add_subcommand("analyze", "run the full certification pipeline");
  add_common(analyze, analyze_opt);
  CLI::App* sweep = app.add_subcommand("sweep", "evaluate the scenario's 2-D stability sweep");
  add_common(sweep, sweep_opt);
  CLI::App* margins = app.add_subcommand("margins", "per-channel gain and phase margins");
  add_common(margins, margins_opt);

  CLI11_PARSE(app, argc, argv);
  try {
    if (synth->parsed()) return cmd_synth(synth_opt);
    if (analyze->parsed()) return cmd_analyze(analyze_opt);
    if (sweep->parsed()) return cmd_sweep(sweep_opt);
    if (margins->parsed()) return cmd_margins(margins_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
