#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "declqr/scenario.hpp"

namespace declqr {

struct StabilityCell {
  int stable = 0;
  double max_real_eig = std::numeric_limits<double>::quiet_NaN();
};

// Stability verdicts over a 2-D parameter sweep: cells are stored row-major,
// cell(i, j) for axis1 value i and axis2 value j.
struct StabilityRegion {
  SweepAxis axis1, axis2;
  std::vector<double> axis1_values, axis2_values;
  std::vector<StabilityCell> cells;

  const StabilityCell& at(int i, int j) const {
    return cells[static_cast<size_t>(i) * axis2_values.size() + j];
  }
};

namespace detail {

inline std::vector<double> axis_values(const SweepAxis& ax) {
  std::vector<double> v(ax.count);
  for (int i = 0; i < ax.count; ++i) {
    const double t = static_cast<double>(i) / (ax.count - 1);
    v[i] = ax.min * (1.0 - t) + ax.max * t;  // exact at the endpoints
  }
  return v;
}

struct SweepParams {
  double beta = 0.0, rho = 0.0;
  double k = 1.0, phi_deg = 0.0;
};

inline void apply_axis(SweepParams& p, const std::string& name, double value) {
  if (name == "beta")
    p.beta = value;
  else if (name == "rho")
    p.rho = value;
  else if (name == "k_db")
    p.k = std::pow(10.0, value / 20.0);
  else if (name == "phi_deg")
    p.phi_deg = value;
  else
    throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

// One column worker: rebuilds plant + controller only when (beta, rho)
// actually changed, evaluates the perturbed loop's spectral abscissa.
class SweepEvaluator {
 public:
  explicit SweepEvaluator(const Scenario& sc) : sc_(sc) {}

  StabilityCell evaluate(const SweepParams& p) {
    StabilityCell cell;
    try {
      if (!cached_ || cached_->first != p.beta || cached_->second != p.rho) {
        plant_ = sc_.build_plant(p.beta, p.rho);
        ctrl_ = synthesize(*plant_);
        cached_ = {p.beta, p.rho};
      }
      const int N = sc_.dag.node_count;
      std::vector<Complex> gains(N, Complex(1.0, 0.0));
      if (sc_.perturbation.kind == PerturbationKind::static_complex) {
        for (int i = 0; i < N; ++i)
          gains[i] = std::polar(sc_.perturbation.gains[i],
                                sc_.perturbation.phases_deg[i] * std::numbers::pi / 180.0);
      } else {
        for (int i = 0; i < N; ++i) gains[i] = Complex(sc_.perturbation.gains[i], 0.0);
      }
      const int ch = sc_.perturbation.channel;
      gains[ch - 1] = std::polar(p.k, p.phi_deg * std::numbers::pi / 180.0);

      bool all_real = true;
      for (const Complex& g : gains)
        if (g.imag() != 0.0) { all_real = false; break; }
      if (all_real) {
        std::vector<double> rg(N);
        for (int i = 0; i < N; ++i) rg[i] = gains[i].real();
        cell.max_real_eig = spectral_abscissa(perturbed_closed_loop(*plant_, *ctrl_, rg));
      } else {
        const ComplexMatrix acl = perturbed_closed_loop(*plant_, *ctrl_, gains);
        Eigen::ComplexEigenSolver<ComplexMatrix> es(acl, /*computeEigenvectors=*/false);
        if (es.info() != Eigen::Success)
          throw std::runtime_error("eigenvalue iteration failed");
        cell.max_real_eig = es.eigenvalues().real().maxCoeff();
      }
      cell.stable = cell.max_real_eig < 0.0 ? 1 : 0;
    } catch (const std::exception&) {
      // Synthesis or evaluation failed for this cell (e.g. R lost positive
      // definiteness): record it as not stabilizable.
      cell.stable = 0;
      cell.max_real_eig = std::numeric_limits<double>::quiet_NaN();
      cached_.reset();
    }
    return cell;
  }

 private:
  const Scenario& sc_;
  std::optional<PartitionedPlant> plant_;
  std::optional<DecentralizedController> ctrl_;
  std::optional<std::pair<double, double>> cached_;
};

}  // namespace detail

// Evaluates the scenario's perturbed closed loop over the product of the two
// axes. Cells are independent; columns are distributed over worker threads
// and written by cell index, so results do not depend on thread scheduling.
inline StabilityRegion sweep2d(const Scenario& sc, const SweepAxis& axis1,
                               const SweepAxis& axis2, int threads = 0) {
  for (const SweepAxis* ax : {&axis1, &axis2}) {
    if (ax->count < 2) throw std::invalid_argument("sweep axes need at least two points");
    if (!std::isfinite(ax->min) || !std::isfinite(ax->max) || !(ax->min < ax->max))
      throw std::invalid_argument("sweep axis range must be finite with min < max");
  }
  StabilityRegion region;
  region.axis1 = axis1;
  region.axis2 = axis2;
  region.axis1_values = detail::axis_values(axis1);
  region.axis2_values = detail::axis_values(axis2);
  region.cells.resize(static_cast<size_t>(axis1.count) * axis2.count);

  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }
  threads = std::min(threads, axis1.count);

  auto run_columns = [&](int first_col, int stride) {
    detail::SweepEvaluator eval(sc);
    for (int i = first_col; i < axis1.count; i += stride) {
      detail::SweepParams base;
      base.beta = sc.beta;
      base.rho = sc.rho;
      detail::apply_axis(base, axis1.name, region.axis1_values[i]);
      for (int j = 0; j < axis2.count; ++j) {
        detail::SweepParams p = base;
        detail::apply_axis(p, axis2.name, region.axis2_values[j]);
        region.cells[static_cast<size_t>(i) * axis2.count + j] = eval.evaluate(p);
      }
    }
  };

  if (threads == 1) {
    run_columns(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(run_columns, t, threads);
    for (std::thread& th : pool) th.join();
  }
  return region;
}

inline StabilityRegion sweep2d(const Scenario& sc, int threads = 0) {
  if (!sc.has_sweep()) throw std::invalid_argument("scenario defines no sweep axes");
  return sweep2d(sc, sc.axis1, sc.axis2, threads);
}

namespace detail {

inline std::string format_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline void emit_csv(const StabilityRegion& region, std::ostream& out) {
  out << "axis1,axis2,stable,max_real_eig\n";
  for (size_t i = 0; i < region.axis1_values.size(); ++i)
    for (size_t j = 0; j < region.axis2_values.size(); ++j) {
      const StabilityCell& cell = region.cells[i * region.axis2_values.size() + j];
      out << detail::format_g12(region.axis1_values[i]) << ','
          << detail::format_g12(region.axis2_values[j]) << ',' << cell.stable << ','
          << detail::format_g12(cell.max_real_eig) << '\n';
    }
}

inline void emit_csv(const StabilityRegion& region, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  emit_csv(region, out);
}

// Cell raster of the region: one rect per cell, stable cells in blue,
// unstable in grey, with simple axis labels. Deterministic output.
inline void emit_svg_heatmap(const StabilityRegion& region, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const int n1 = static_cast<int>(region.axis1_values.size());
  const int n2 = static_cast<int>(region.axis2_values.size());
  const double plot_w = 720.0, plot_h = 480.0;
  const double ml = 70.0, mb = 50.0, mt = 30.0, mr = 20.0;
  const double W = ml + plot_w + mr, H = mt + plot_h + mb;
  const double cw = plot_w / n1, chh = plot_h / n2;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::format_g6(W)
      << "\" height=\"" << detail::format_g6(H) << "\" viewBox=\"0 0 " << detail::format_g6(W)
      << " " << detail::format_g6(H) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << detail::format_g6(W) << "\" height=\""
      << detail::format_g6(H) << "\" fill=\"#ffffff\"/>\n";
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const StabilityCell& cell = region.cells[static_cast<size_t>(i) * n2 + j];
      const char* fill = cell.stable ? "#3b6fb5" : "#e3e3e3";
      const double x = ml + i * cw;
      const double y = mt + plot_h - (j + 1) * chh;  // axis2 increases upward
      out << "<rect x=\"" << detail::format_g6(x) << "\" y=\"" << detail::format_g6(y)
          << "\" width=\"" << detail::format_g6(cw * 1.002) << "\" height=\""
          << detail::format_g6(chh * 1.002) << "\" fill=\"" << fill << "\"/>\n";
    }
  out << "<rect x=\"" << detail::format_g6(ml) << "\" y=\"" << detail::format_g6(mt)
      << "\" width=\"" << detail::format_g6(plot_w) << "\" height=\""
      << detail::format_g6(plot_h)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fr = static_cast<double>(t) / ticks;
    const double xv = region.axis1.min * (1.0 - fr) + region.axis1.max * fr;
    const double yv = region.axis2.min * (1.0 - fr) + region.axis2.max * fr;
    const double xp = ml + fr * plot_w;
    const double yp = mt + plot_h - fr * plot_h;
    out << "<text x=\"" << detail::format_g6(xp) << "\" y=\"" << detail::format_g6(mt + plot_h + 18)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << detail::format_g6(xv) << "</text>\n";
    out << "<text x=\"" << detail::format_g6(ml - 8) << "\" y=\"" << detail::format_g6(yp + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
        << detail::format_g6(yv) << "</text>\n";
  }
  out << "<text x=\"" << detail::format_g6(ml + plot_w / 2) << "\" y=\""
      << detail::format_g6(H - 12)
      << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">"
      << region.axis1.name << "</text>\n";
  out << "<text x=\"16\" y=\"" << detail::format_g6(mt + plot_h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << detail::format_g6(mt + plot_h / 2) << ")\">" << region.axis2.name << "</text>\n";
  out << "<text x=\"" << detail::format_g6(ml + plot_w / 2) << "\" y=\"20\" "
      << "font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">stable region ("
      << region.axis1.name << " vs " << region.axis2.name << ")</text>\n";
  out << "</svg>\n";
}

}  // namespace declqr
