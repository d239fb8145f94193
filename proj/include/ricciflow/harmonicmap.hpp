#pragma once

// Harmonic map heat flow of grid maps against the flat background metric, and
// the inverse-pullback that turns a Ricci flow trajectory back into its
// DeTurck representative.  On torus charts the exponential map of the target
// is p + V, so the general vector-field form of the flow collapses to the
// coordinate Laplacian with a Christoffel transport term; the curved-target
// correction tensors vanish identically and are not represented.

#include <cmath>
#include <sstream>
#include <vector>

#include "ricciflow/curvature.hpp"
#include "ricciflow/deturck.hpp"
#include "ricciflow/errors.hpp"
#include "ricciflow/gauge.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/parabolic.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

// Maps share the displacement representation of gauge diffeomorphisms.
using MapField = DiffeoField;

// (Lap_{g,ghat} phi)^a = g^{ij} (d_i d_j phi^a - Gamma(g)^k_{ij} d_k phi^a),
// evaluated nodewise; for phi = id this is exactly -W(g).
inline GridField hmhf_rhs(const MapField& phi, const MetricField& g,
                          const Background& bg = {}, int order = 2) {
  bg.require_flat("hmhf_rhs");
  const GridSpec& gr = phi.grid();
  if (&g.components().grid() != &gr)
    throw ConfigError("hmhf_rhs: map and metric live on different grids");
  const int n = gr.dim();
  const GridField du = hat_gradient(phi.u, order);   // (i*n + a)
  const GridField ddu = hat_hessian(phi.u, order);   // ((i*n + j)*n + a)
  const GridField gam = christoffel(g, order);       // (k*n + i)*n + j
  const GridField& inv = g.inverse();
  GridField out(gr, n);
  out.set_tensor_parity(1);
  for (std::size_t id = 0; id < gr.node_count(); ++id)
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double t = ddu.at(id, (i * n + j) * n + a);
          for (int k = 0; k < n; ++k) {
            const double dphi = du.at(id, k * n + a) + (k == a ? 1.0 : 0.0);
            t -= gam.at(id, (k * n + i) * n + j) * dphi;
          }
          s += inv.at(id, i * n + j) * t;
        }
      out.at(id, a) = s;
    }
  return out;
}

struct HmhfParams {
  SolverParams solver;
  int fd_order = 2;
  bool check_det = true;
};

// IMEX advance of d phi / dt = Lap_{g(t),ghat} phi: the principal part
// g^{ij} d_i d_j is implicit, the Christoffel transport term explicit.
inline std::vector<MapField> hmhf_flow(const MapField& phi0,
                                       const std::vector<MetricField>& gpath,
                                       const TimeMesh& mesh,
                                       const HmhfParams& hp = {},
                                       const Background& bg = {}) {
  bg.require_flat("hmhf_flow");
  const int steps = mesh.steps();
  if ((int)gpath.size() != steps + 1)
    throw ConfigError("hmhf_flow: need one metric per mesh time");
  const GridSpec& gr = phi0.grid();
  const int n = gr.dim();
  SolverParams sp = hp.solver;
  sp.theta = 1.0;
  sp.fd_order = hp.fd_order;

  std::vector<MapField> path;
  path.reserve((std::size_t)steps + 1);
  path.push_back(phi0);
  path.front().time = mesh.t[0];

  for (int k = 0; k < steps; ++k) {
    const MetricField& gk = gpath[(std::size_t)k + 1];
    const MapField& cur = path.back();
    GridField w = deturck_vectorfield(gk, hp.fd_order);
    GridField du = hat_gradient(cur.u, hp.fd_order);
    GridField src(gr, n);
    src.copy_parity_from(cur.u);
    for (std::size_t id = 0; id < gr.node_count(); ++id)
      for (int a = 0; a < n; ++a) {
        double s = -w.at(id, a);
        for (int c = 0; c < n; ++c) s -= w.at(id, c) * du.at(id, c * n + a);
        src.at(id, a) = s;
      }
    MapField nxt(gr, mesh.t[(std::size_t)k + 1]);
    nxt.u = step_linear(gk, cur.u, mesh.dt(k), &src, sp);
    if (hp.check_det) {
      const double dmin = nxt.min_jacobian_det(hp.fd_order);
      if (!(dmin > 0.0)) {
        std::ostringstream os;
        os << "harmonic map degeneration: det(D phi) = " << dmin
           << " at t = " << nxt.time;
        throw NumericsError(os.str());
      }
    }
    path.push_back(std::move(nxt));
  }
  return path;
}

// Max-norm residual of d/dt g = trace hessian + Q along a sampled trajectory,
// measured at interior mesh times with the three-point time difference.
struct DefectReport {
  std::vector<double> time;
  std::vector<double> value;
  double max = 0.0;
};

inline DefectReport deturck_defect(const std::vector<MetricField>& path,
                                   const TimeMesh& mesh, int order = 2) {
  if (path.size() != mesh.t.size())
    throw ConfigError("deturck_defect: trajectory and mesh sizes differ");
  if (path.size() < 3)
    throw ConfigError("deturck_defect: need at least 3 snapshots");
  DefectReport rep;
  for (std::size_t k = 1; k + 1 < path.size(); ++k) {
    const double hm = mesh.t[k] - mesh.t[k - 1];
    const double hp = mesh.t[k + 1] - mesh.t[k];
    const double ca = hm / (hp * (hp + hm));
    const double cb = (hp - hm) / (hp * hm);
    const double cc = -hp / (hm * (hp + hm));
    GridField rhs = deturck_rhs(path[k], order);
    double worst = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      const double dg = ca * path[k + 1].components().data()[i] +
                        cb * path[k].components().data()[i] +
                        cc * path[k - 1].components().data()[i];
      worst = std::max(worst, std::abs(dg - rhs.data()[i]));
    }
    rep.time.push_back(mesh.t[k]);
    rep.value.push_back(worst);
    rep.max = std::max(rep.max, worst);
  }
  return rep;
}

struct DeturckPullback {
  std::vector<MetricField> path;  // (phi_k^{-1})^* g_k
  DefectReport defect;
};

// Pull a metric trajectory back along the inverses of a map trajectory and
// report how well the result satisfies the DeTurck equation.
inline DeturckPullback pullback_to_deturck(const std::vector<MapField>& phis,
                                           const std::vector<MetricField>& gpath,
                                           const TimeMesh& mesh, int order = 2,
                                           double inv_tol = 1e-10) {
  if (phis.size() != gpath.size())
    throw ConfigError("pullback_to_deturck: map and metric paths differ in length");
  DeturckPullback out;
  out.path.reserve(gpath.size());
  for (std::size_t k = 0; k < gpath.size(); ++k) {
    DiffeoField inv = invert_diffeo(phis[k], inv_tol);
    out.path.push_back(pullback_metric(inv, gpath[k], order));
  }
  out.defect = deturck_defect(out.path, mesh, order);
  return out;
}

}  // namespace ricci
