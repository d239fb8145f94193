#pragma once

// Scenario realization and the run driver: build the configured grid and
// initial data, advance the configured flow, and emit the diagnostics CSV
// plus metric checkpoints at dyadic times.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "ricciflow/config.hpp"
#include "ricciflow/curvature.hpp"
#include "ricciflow/deturck.hpp"
#include "ricciflow/doubling.hpp"
#include "ricciflow/gauge.hpp"
#include "ricciflow/io.hpp"
#include "ricciflow/rotsym.hpp"

namespace ricci {

inline constexpr const char* kCodeVersion = "ricciflow 1.0";
inline constexpr double kScenarioPi = 3.14159265358979323846;

// ---- scenario realization ---------------------------------------------------

inline GridSpec scenario_grid(const ScenarioConfig& c) {
  if (c.rotsym())
    return GridSpec({AxisSpec{Topology::polar, kScenarioPi, c.resolution}});
  // Doubled torus: periodic box with Z2 reflection planes at x = 0 and L/2.
  if (c.resolution % 2 != 0)
    throw ConfigError("scenario: torus_doubled needs an even resolution");
  std::vector<AxisSpec> axes(
      static_cast<std::size_t>(c.n),
      AxisSpec{Topology::periodic, c.length, c.resolution});
  return GridSpec(std::move(axes));
}

// Distance to the nearest reflection plane, normalized to [0, 1] at L/4.
inline double reflected_triangle(double x, double L) {
  const double d = std::min(std::abs(x), std::min(std::abs(L - x), std::abs(x - 0.5 * L)));
  return 4.0 * d / L;
}

inline MetricField initial_torus_metric(const ScenarioConfig& c, const GridSpec& g) {
  MetricField m(g);
  const int n = g.dim();
  int idx[kMaxDim];
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    g.coords(id, idx);
    const double x = g.x(0, idx[0]);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m.set(id, i, j, i == j ? 1.0 : 0.0);
    if (c.preset == "kinked_warp") {
      const double phi = 1.0 + c.preset_amplitude * reflected_triangle(x, c.length);
      for (int i = 1; i < n; ++i) m.set(id, i, i, phi * phi);
    } else if (c.preset == "conformal_bump") {
      double prod = 1.0;
      for (int a = 0; a < n; ++a)
        prod *= std::cos(2.0 * kScenarioPi * c.preset_mode * g.x(a, idx[a]) /
                         g.axis(a).extent);
      const double f = std::exp(2.0 * c.preset_amplitude * prod);
      for (int i = 0; i < n; ++i) m.set(id, i, i, f);
    }
  }
  return m;
}

// Corner cap with the kink smoothed over scale eps (eps = 0 keeps the corner):
// the quartic blend is C^2, even about the equator, and leaves the polar ends
// untouched.
inline WarpedMetric cap_corner_metric(const GridSpec& g, int n, double slope,
                                      double radius, bool hemisphere, double eps = 0.0) {
  WarpedMetric wm(g, n, hemisphere);
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    const double x = g.x(0, static_cast<int>(id));
    double u = std::abs(x - 0.5 * kScenarioPi);
    if (eps > 0.0 && u < eps) {
      const double s = u / eps;
      u = eps * (0.375 + 0.75 * s * s - 0.125 * s * s * s * s);
    }
    wm.phi.at(id, 0) = radius * std::sin(slope * (0.5 * kScenarioPi - u)) / slope;
    wm.psi.at(id, 0) = radius;
  }
  return wm;
}

inline WarpedMetric initial_warped(const ScenarioConfig& c, const GridSpec& g,
                                   double mollify_eps = 0.0) {
  if (c.preset == "round") {
    WarpedMetric wm(g, c.n, c.hemisphere());
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      const double x = g.x(0, static_cast<int>(id));
      wm.psi.at(id, 0) = c.radius;
      wm.phi.at(id, 0) = c.radius * std::sin(x);
    }
    return wm;
  }
  if (c.preset == "cap_corner")
    return cap_corner_metric(g, c.n, c.preset_slope, c.radius, c.hemisphere(),
                             mollify_eps);
  throw ConfigError("scenario: preset '" + c.preset + "' is not a rotsym preset");
}

// ---- parabolicity monitor ----------------------------------------------------

// Largest lambda with lambda I <= g <= lambda^{-1} I in the background chart.
inline double lambda_parabolicity(const MetricField& g) {
  const int n = g.dim();
  double lam = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd m(n, n);
  for (std::size_t id = 0; id < g.grid().node_count(); ++id) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = g.val(id, i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    lam = std::min(lam, es.eigenvalues().minCoeff());
    lam = std::min(lam, 1.0 / es.eigenvalues().maxCoeff());
  }
  return lam;
}

inline double lambda_parabolicity(const WarpedMetric& wm) {
  const detail::RotsymState st = detail::rotsym_state(wm);
  double lam = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < wm.grid().node_count(); ++id) {
    for (const double v : {st.P.at(id, 0), st.q.at(id, 0)})
      lam = std::min(lam, std::min(v, 1.0 / v));
  }
  return lam;
}

// ---- run driver ---------------------------------------------------------------

struct RunRow {
  double t = 0.0;
  double min_scal = 0.0, min_curv_op_eig = 0.0;
  double pic_margin = std::numeric_limits<double>::quiet_NaN();
  double pic1_margin = std::numeric_limits<double>::quiet_NaN();
  double pic2_margin = std::numeric_limits<double>::quiet_NaN();
  double boundary_A_norm = std::numeric_limits<double>::quiet_NaN();
  double H_min = std::numeric_limits<double>::quiet_NaN();
  double symmetry_residual = std::numeric_limits<double>::quiet_NaN();
  double lambda_parabolicity = 0.0;
  double max_grad_g = 0.0, max_hess_g = 0.0;
  double ricci_residual = std::numeric_limits<double>::quiet_NaN();
  double drift = 0.0;
};

struct RunReport {
  std::vector<RunRow> rows;
  bool halted = false;
  double halt_time = std::numeric_limits<double>::quiet_NaN();
  double max_drift = 0.0;
  std::string csv_path;
  std::vector<std::string> checkpoints;
};

inline const char* run_csv_columns() {
  return "t,min_scal,min_curv_op_eig,pic_margin,pic1_margin,pic2_margin,"
         "boundary_A_norm,H_min,symmetry_residual,lambda_parabolicity,"
         "max_grad_g,max_hess_g,ricci_residual,drift";
}

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double max_abs(const GridField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f.data()[i]));
  return m;
}

inline double max_abs_diff_fields(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Mesh indices holding the dyadic checkpoint times T/2^j (nearest mesh time,
// deduplicated, at most `cap` levels).
inline std::vector<std::pair<int, int>> dyadic_checkpoints(const TimeMesh& mesh,
                                                           int cap = 8) {
  std::vector<std::pair<int, int>> out;  // (level j, mesh index k)
  const double T = mesh.horizon();
  for (int j = 0; j < cap; ++j) {
    const double target = T / static_cast<double>(1 << j);
    if (target < mesh.t[1] - 1e-15) break;
    int best = 1;
    for (int k = 1; k < static_cast<int>(mesh.t.size()); ++k)
      if (std::abs(mesh.t[k] - target) < std::abs(mesh.t[best] - target)) best = k;
    if (!out.empty() && out.back().second == best) break;
    out.emplace_back(j, best);
  }
  return out;
}

}  // namespace detail

inline void write_run_csv(const std::string& path, const ScenarioConfig& cfg,
                          const RunReport& rep) {
  std::ostringstream os;
  os << "# " << kCodeVersion << " run report\n";
  os << "# config:\n";
  std::istringstream cfg_lines(config_to_text(cfg));
  std::string line;
  while (std::getline(cfg_lines, line)) os << "#   " << line << "\n";
  if (rep.halted)
    os << "# halted at t = " << detail::csv_number(rep.halt_time) << "\n";
  os << run_csv_columns() << "\n";
  for (const RunRow& r : rep.rows) {
    os << detail::csv_number(r.t) << ',' << detail::csv_number(r.min_scal) << ','
       << detail::csv_number(r.min_curv_op_eig) << ','
       << detail::csv_number(r.pic_margin) << ',' << detail::csv_number(r.pic1_margin)
       << ',' << detail::csv_number(r.pic2_margin) << ','
       << detail::csv_number(r.boundary_A_norm) << ',' << detail::csv_number(r.H_min)
       << ',' << detail::csv_number(r.symmetry_residual) << ','
       << detail::csv_number(r.lambda_parabolicity) << ','
       << detail::csv_number(r.max_grad_g) << ',' << detail::csv_number(r.max_hess_g)
       << ',' << detail::csv_number(r.ricci_residual) << ','
       << detail::csv_number(r.drift) << "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("run: cannot open '" + path + "' for writing");
  const std::string body = os.str();
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
}

inline RunReport run_torus_scenario(const ScenarioConfig& cfg) {
  const GridSpec full = scenario_grid(cfg);
  const GridSpec half = restricted_grid(full);
  const MetricField g0 = initial_torus_metric(cfg, full);
  const TimeMesh mesh = cfg.time_mesh();

  FlowParams fp;
  fp.fd_order = cfg.fd_order;
  std::vector<MetricField> path = deturck_flow(g0, mesh, fp);

  RunReport rep;
  PicParams pp;
  pp.seed = cfg.seed;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const MetricField& g = path[k];
    RunRow row;
    row.t = mesh.t[k];
    const GridField riem = riemann(g, cfg.fd_order);
    row.min_scal = min_scalar_curvature(g, riem);
    row.min_curv_op_eig = min_curvature_operator_eig(g, riem);
    if (cfg.diag_pic && cfg.n >= 4) {
      row.pic_margin = pic_margin(g, riem, ConeVariant::pic, pp).margin;
      row.pic1_margin = pic_margin(g, riem, ConeVariant::pic1, pp).margin;
      row.pic2_margin = pic_margin(g, riem, ConeVariant::pic2, pp).margin;
    }
    if (cfg.diag_boundary) {
      auto [a0, a1] = boundary_monitor(g, half);
      row.boundary_A_norm = std::max(a0.sup_A, a1.sup_A);
      row.H_min = std::min(a0.H_min, a1.H_min);
    }
    row.symmetry_residual = symmetry_residual(g);
    row.lambda_parabolicity = lambda_parabolicity(g);
    row.max_grad_g = detail::max_abs(hat_gradient(g.components(), cfg.fd_order));
    row.max_hess_g = detail::max_abs(hat_hessian(g.components(), cfg.fd_order));
    row.drift = detail::max_abs_diff_fields(g.components(), g0.components());
    rep.max_drift = std::max(rep.max_drift, row.drift);
    rep.rows.push_back(row);
  }

  if (cfg.diag_gauge) {
    std::vector<GridField> W;
    W.reserve(path.size());
    for (const MetricField& g : path) W.push_back(deturck_vectorfield(g, cfg.fd_order));
    const DeturckGauge gauge = integrate_deturck_ode(W, mesh);
    std::vector<MetricField> pulled;
    pulled.reserve(path.size());
    for (std::size_t k = 0; k < path.size(); ++k)
      pulled.push_back(pullback_metric(gauge.psi[k], path[k], cfg.fd_order));
    const RicciResidualReport rr = ricci_residual(pulled, mesh, cfg.fd_order);
    for (std::size_t i = 0; i < rr.time.size(); ++i) {
      for (std::size_t k = 0; k < rep.rows.size(); ++k)
        if (rep.rows[k].t == rr.time[i]) rep.rows[k].ricci_residual = rr.value[i];
    }
  }

  namespace fs = std::filesystem;
  fs::create_directories(cfg.outdir);
  for (const auto& [level, k] : detail::dyadic_checkpoints(mesh)) {
    const std::string p =
        (fs::path(cfg.outdir) / ("checkpoint_" + std::to_string(level) + ".rfm")).string();
    write_metric_file(p, path[static_cast<std::size_t>(k)], FileFormat::binary,
                      "doubled");
    rep.checkpoints.push_back(p);
  }
  rep.csv_path = (fs::path(cfg.outdir) / "diagnostics.csv").string();
  write_run_csv(rep.csv_path, cfg, rep);
  return rep;
}

inline RunReport run_rotsym_scenario(const ScenarioConfig& cfg) {
  const GridSpec g = scenario_grid(cfg);
  const WarpedMetric wm0 = initial_warped(cfg, g);
  const TimeMesh mesh = cfg.time_mesh();
  const ReducedFlowResult res = reduced_flow(wm0, mesh);

  RunReport rep;
  rep.halted = res.halted;
  rep.halt_time = res.halt_time;
  GridField state0(g, 2);
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    state0.at(id, 0) = wm0.psi.at(id, 0) * wm0.psi.at(id, 0);
    state0.at(id, 1) = wm0.phi.at(id, 0) * wm0.phi.at(id, 0);
  }
  for (std::size_t k = 0; k < res.path.size(); ++k) {
    const WarpedMetric& wm = res.path[k];
    const ReducedDiagnostics& d = res.diag[k];
    RunRow row;
    row.t = d.t;
    const WarpedCurvature wc = warped_curvature(wm, cfg.fd_order);
    row.min_scal = d.scalar_min;
    row.min_curv_op_eig =
        cfg.n == 2 ? d.k0_min : std::min(d.k0_min, d.k1_min);
    if (cfg.diag_pic && cfg.n >= 4) {
      row.pic_margin = cone_check_rotsym(wc.k0, wc.k1, cfg.n, RotsymCone::pic);
      row.pic1_margin = cone_check_rotsym(wc.k0, wc.k1, cfg.n, RotsymCone::pic1);
      row.pic2_margin = cone_check_rotsym(wc.k0, wc.k1, cfg.n, RotsymCone::pic2);
    }
    if (cfg.diag_boundary && cfg.hemisphere()) {
      row.boundary_A_norm = std::abs(d.equator_a);
      row.H_min = d.equator_h;
    }
    if (cfg.hemisphere()) row.symmetry_residual = d.symmetry_residual;
    row.lambda_parabolicity = lambda_parabolicity(wm);
    GridField state(g, 2);
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      state.at(id, 0) = wm.psi.at(id, 0) * wm.psi.at(id, 0);
      state.at(id, 1) = wm.phi.at(id, 0) * wm.phi.at(id, 0);
    }
    row.max_grad_g = detail::max_abs(hat_gradient(state, cfg.fd_order));
    row.max_hess_g = detail::max_abs(hat_hessian(state, cfg.fd_order));
    row.drift = detail::max_abs_diff_fields(state, state0);
    rep.max_drift = std::max(rep.max_drift, row.drift);
    rep.rows.push_back(row);
  }

  namespace fs = std::filesystem;
  fs::create_directories(cfg.outdir);
  if (!res.halted) {
    for (const auto& [level, k] : detail::dyadic_checkpoints(mesh)) {
      const std::string p =
          (fs::path(cfg.outdir) / ("checkpoint_" + std::to_string(level) + ".rfm"))
              .string();
      write_metric_file(p, res.path[static_cast<std::size_t>(k)], FileFormat::binary);
      rep.checkpoints.push_back(p);
    }
  }
  rep.csv_path = (fs::path(cfg.outdir) / "diagnostics.csv").string();
  write_run_csv(rep.csv_path, cfg, rep);
  return rep;
}

inline RunReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  return cfg.rotsym() ? run_rotsym_scenario(cfg) : run_torus_scenario(cfg);
}

}  // namespace ricci
