#pragma once

// Rotationally symmetric reduction: warped-product metrics
//
//   g = psi(x)^2 dx^2 + phi(x)^2 h_{S^{n-1}},   x in [0, pi],
//
// evolved by Ricci-DeTurck flow with the round sphere dx^2 + sin^2 x h as
// background, so the whole flow lives on two scalar profiles on a 1-D polar
// grid.  A periodic-chart variant (n = 2, flat background, phi^2 dtheta^2
// fiber) exists so the reduction can be cross-checked against the full
// tensor code on a torus.
//
// The flow does not evolve (psi^2, phi^2) directly: phi^2 vanishes like
// sin^2 x at the poles and finite differences of it lose an order there.
// Instead the state is (P, q) = (psi^2, phi^2 / sin^2 x), both even and
// bounded across the poles, with the RHS grouped so every term stays O(1)
// for pole-regular data.  On a scaled round sphere the grouped RHS is
// exactly -2(n-1) at every node, so homotheties are reproduced to solver
// tolerance in time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ricciflow/curvature.hpp"
#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/parabolic.hpp"
#include "ricciflow/rng.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

// ---------------------------------------------------------------------------
// Warped metric container

struct WarpedMetric {
  int n = 3;                // dimension of the manifold x-interval times S^{n-1}
  bool hemisphere = false;  // even about the equator node (doubled half-sphere)
  GridField psi, phi;       // profiles on a 1-D grid (grid owned by the caller)

  WarpedMetric() = default;
  WarpedMetric(const GridSpec& g, int dim, bool hemi = false)
      : n(dim), hemisphere(hemi), psi(g, 1, 1.0), phi(g, 1, 0.0) {
    if (g.dim() != 1) throw ConfigError("warped metric: grid must be one-dimensional");
    if (n < 2) throw ConfigError("warped metric: dimension must be >= 2");
    const AxisSpec& ax = g.axis(0);
    if (ax.is_periodic()) {
      // periodic chart twin: psi^2 dx^2 + phi^2 dtheta^2 on a torus, used to
      // cross-check the reduction against the full tensor code
      if (n != 2) throw ConfigError("warped metric: periodic chart requires n = 2");
    } else {
      if (ax.topo != Topology::polar)
        throw ConfigError("warped metric: interval axis must be polar");
      if (std::abs(ax.extent - std::acos(-1.0)) > 1e-12)
        throw ConfigError("warped metric: polar axis extent must be pi");
      phi.set_parity(0, 0, -1);  // phi vanishes on the rotation axes
      if (hemisphere && ax.nodes % 2 == 0)
        throw ConfigError("warped metric: hemisphere mode needs an odd node count");
    }
  }

  const GridSpec& grid() const { return psi.grid(); }
  bool polar() const { return !grid().axis(0).is_periodic(); }
};

// ---------------------------------------------------------------------------
// Curvature of a warped product

struct WarpedCurvature {
  GridField k0;       // sectional curvature of planes containing dx
  GridField k1;       // sectional curvature of spherical planes (zero for n = 2)
  GridField ric_xx;   // Ric_xx = (n-1) K0 psi^2
  GridField ric_sph;  // coefficient of h_ab in Ric: (K0 + (n-2) K1) phi^2
  GridField scalar;   // 2(n-1) K0 + (n-1)(n-2) K1
};

namespace detail {

// Even-quadratic extrapolation onto the axis nodes of a polar interval:
// f(0) <- (4 f(h) - f(2h)) / 3, matching a smooth even profile to O(h^4).
inline void fill_axis_nodes(GridField& f) {
  const int N = f.grid().axis(0).nodes;
  for (int c = 0; c < f.ncomp(); ++c) {
    f.at(0, c) = (4.0 * f.at(1, c) - f.at(2, c)) / 3.0;
    f.at(static_cast<std::size_t>(N - 1), c) =
        (4.0 * f.at(static_cast<std::size_t>(N - 2), c) -
         f.at(static_cast<std::size_t>(N - 3), c)) / 3.0;
  }
}

struct RotsymState {
  GridField P;  // psi^2
  GridField q;  // phi^2 / sin^2 x   (polar)   or   phi^2   (periodic chart)
};

inline RotsymState rotsym_state(const WarpedMetric& wm) {
  const GridSpec& g = wm.grid();
  RotsymState st{GridField(g, 1), GridField(g, 1)};
  const int N = g.axis(0).nodes;
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    const double psi = wm.psi.at(id, 0), phi = wm.phi.at(id, 0);
    st.P.at(id, 0) = psi * psi;
    st.q.at(id, 0) = phi * phi;
  }
  if (wm.polar()) {
    for (int i = 1; i < N - 1; ++i) {
      const double s = std::sin(wm.grid().x(0, i));
      st.q.at(static_cast<std::size_t>(i), 0) /= s * s;
    }
    fill_axis_nodes(st.q);
  }
  return st;
}

// K0 and K1 on a polar grid from the regularized state.  The naive stencils
// on (phi, psi) lose an order of accuracy near the axes (1 - (phi'_s)^2
// cancels to O(h^2) against phi^2 ~ h^2); the grouped forms below keep every
// term O(1) with bounded truncation error, and are exact on round spheres.
inline void rotsym_k0k1(const GridField& P, const GridField& q, int order,
                        GridField& k0, GridField& k1) {
  const GridSpec& g = P.grid();
  const int N = g.axis(0).nodes;
  GridField Pp = hat_gradient(P, order);
  GridField qp = hat_gradient(q, order);
  GridField qpp = hat_hessian(q, order);
  for (int i = 1; i < N - 1; ++i) {
    const std::size_t id = static_cast<std::size_t>(i);
    const double x = g.x(0, i), s = std::sin(x), c = std::cos(x);
    const double Pv = P.at(id, 0), qv = q.at(id, 0);
    const double qpv = qp.at(id, 0);
    k0.at(id, 0) = -(qpp.at(id, 0) / (2.0 * qv) + qpv * c / (qv * s) - 1.0 -
                     qpv * qpv / (4.0 * qv * qv)) / Pv +
                   (qpv / qv + 2.0 * c / s) * Pp.at(id, 0) / (4.0 * Pv * Pv);
    const double k1q = ((Pv - qv) / (s * s) + qv) / Pv - qpv * c / (Pv * s) -
                       qpv * qpv / (4.0 * qv * Pv);
    k1.at(id, 0) = k1q / qv;
  }
  fill_axis_nodes(k0);
  fill_axis_nodes(k1);
}

}  // namespace detail

inline WarpedCurvature warped_curvature(const WarpedMetric& wm, int order = 2) {
  const GridSpec& g = wm.grid();
  const int N = g.axis(0).nodes;
  const bool polar = wm.polar();
  for (int i = 0; i < N; ++i) {
    if (!(wm.psi.at(static_cast<std::size_t>(i), 0) > 0.0))
      throw NumericsError("warped curvature: psi must be positive");
    const bool interior = !polar || (i > 0 && i < N - 1);
    if (interior && !(wm.phi.at(static_cast<std::size_t>(i), 0) > 0.0))
      throw NumericsError("warped curvature: phi must be positive away from the axes");
  }

  WarpedCurvature wc{GridField(g, 1), GridField(g, 1), GridField(g, 1),
                     GridField(g, 1), GridField(g, 1)};
  if (polar) {
    detail::RotsymState st = detail::rotsym_state(wm);
    detail::rotsym_k0k1(st.P, st.q, order, wc.k0, wc.k1);
    if (wm.n == 2)
      for (std::size_t id = 0; id < g.node_count(); ++id) wc.k1.at(id, 0) = 0.0;
  } else {
    GridField dphi = hat_gradient(wm.phi, order);
    GridField phis(g, 1);  // phi' / psi
    for (std::size_t id = 0; id < g.node_count(); ++id)
      phis.at(id, 0) = dphi.at(id, 0) / wm.psi.at(id, 0);
    GridField dphis = hat_gradient(phis, order);
    for (std::size_t id = 0; id < g.node_count(); ++id)
      wc.k0.at(id, 0) = -dphis.at(id, 0) / (wm.psi.at(id, 0) * wm.phi.at(id, 0));
  }
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    const double k0 = wc.k0.at(id, 0), k1 = wc.k1.at(id, 0);
    const double phi = wm.phi.at(id, 0), psi = wm.psi.at(id, 0);
    wc.ric_xx.at(id, 0) = (wm.n - 1) * k0 * psi * psi;
    wc.ric_sph.at(id, 0) = (k0 + (wm.n - 2) * k1) * phi * phi;
    wc.scalar.at(id, 0) = 2.0 * (wm.n - 1) * k0 + (wm.n - 1) * (wm.n - 2) * k1;
  }
  return wc;
}

// ---------------------------------------------------------------------------
// Reduced Ricci-DeTurck right-hand side

struct ReducedRhs {
  GridField dpsi2;  // d/dt psi^2
  GridField dphi2;  // d/dt phi^2
  GridField u;      // DeTurck vector W = u dx
};

namespace detail {

struct RotsymRhs {
  GridField dP, dq, u;
};

// Grouped RHS in the regularized variables on the polar grid.  Every term is
// O(1) for pole-regular data; the two axis nodes are filled by even-quadratic
// extrapolation of the interior values.
inline RotsymRhs rotsym_rhs_pq(const GridField& P, const GridField& q, int n, int order) {
  const GridSpec& g = P.grid();
  const int N = g.axis(0).nodes;
  GridField Pp = hat_gradient(P, order);
  GridField qp = hat_gradient(q, order);
  GridField qpp = hat_hessian(q, order);

  GridField u(g, 1);
  u.set_parity(0, 0, -1);
  for (int i = 1; i < N - 1; ++i) {
    const std::size_t id = static_cast<std::size_t>(i);
    const double x = g.x(0, i), s = std::sin(x), c = std::cos(x);
    const double Pv = P.at(id, 0), qv = q.at(id, 0);
    u.at(id, 0) = Pp.at(id, 0) / (2.0 * Pv * Pv) +
                  (n - 1) * (c * (Pv - qv) / (Pv * qv * s) -
                             qp.at(id, 0) / (2.0 * Pv * qv));
  }
  GridField up = hat_gradient(u, order);

  RotsymRhs out{GridField(g, 1), GridField(g, 1), std::move(u)};
  for (int i = 1; i < N - 1; ++i) {
    const std::size_t id = static_cast<std::size_t>(i);
    const double x = g.x(0, i), s = std::sin(x), c = std::cos(x);
    const double Pv = P.at(id, 0), qv = q.at(id, 0);
    const double Ppv = Pp.at(id, 0), qpv = qp.at(id, 0);
    const double k0 = -(qpp.at(id, 0) / (2.0 * qv) + qpv * c / (qv * s) - 1.0 -
                        qpv * qpv / (4.0 * qv * qv)) / Pv +
                      (qpv / qv + 2.0 * c / s) * Ppv / (4.0 * Pv * Pv);
    const double k1q = ((Pv - qv) / (s * s) + qv) / Pv - qpv * c / (Pv * s) -
                       qpv * qpv / (4.0 * qv * Pv);
    const double ucot = Ppv * c / (2.0 * Pv * Pv * s) +
                        (n - 1) * (c * c * (Pv - qv) / (Pv * qv * s * s) -
                                   qpv * c / (2.0 * Pv * qv * s));
    out.dP.at(id, 0) = -2.0 * (n - 1) * k0 * Pv + out.u.at(id, 0) * Ppv +
                       2.0 * Pv * up.at(id, 0);
    out.dq.at(id, 0) = -2.0 * k0 * qv - 2.0 * (n - 2) * k1q +
                       out.u.at(id, 0) * qpv + 2.0 * qv * ucot;
  }
  fill_axis_nodes(out.dP);
  fill_axis_nodes(out.dq);
  return out;
}

// Periodic chart twin (n = 2, flat background): state (P, Phi).
inline RotsymRhs rotsym_rhs_torus(const GridField& P, const GridField& Phi, int order) {
  const GridSpec& g = P.grid();
  GridField Pp = hat_gradient(P, order);
  GridField Fp = hat_gradient(Phi, order);
  GridField Fpp = hat_hessian(Phi, order);

  GridField u(g, 1);
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    const double Pv = P.at(id, 0), Fv = Phi.at(id, 0);
    u.at(id, 0) = Pp.at(id, 0) / (2.0 * Pv * Pv) - Fp.at(id, 0) / (2.0 * Fv * Pv);
  }
  GridField up = hat_gradient(u, order);

  RotsymRhs out{GridField(g, 1), GridField(g, 1), std::move(u)};
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    const double Pv = P.at(id, 0), Fv = Phi.at(id, 0);
    const double Ppv = Pp.at(id, 0), Fpv = Fp.at(id, 0);
    const double k0 = -(Fpp.at(id, 0) / (2.0 * Fv) - Fpv * Fpv / (4.0 * Fv * Fv)) / Pv +
                      Fpv * Ppv / (4.0 * Fv * Pv * Pv);
    out.dP.at(id, 0) = -2.0 * k0 * Pv + out.u.at(id, 0) * Ppv + 2.0 * Pv * up.at(id, 0);
    out.dq.at(id, 0) = -2.0 * k0 * Fv + out.u.at(id, 0) * Fpv;
  }
  return out;
}

// Cross-check of the grouped (P, q) assembly against an independent build of
// -2 Ric + L_W g straight from warped_curvature and finite-differenced W, on
// a battery of random warps and two resolutions.  Runs once per process the
// first time the reduction is used; disagreement means the reduction was
// mis-derived and is a hard error.
inline void reduced_rhs_selfcheck() {
  static bool done = false;
  if (done) return;
  const double pi = std::acos(-1.0);
  Rng rng(424242);
  for (int w = 0; w < 20; ++w) {
    const int n = 3 + w % 3;
    double a[3], b[3], b0 = rng.uniform(0.7, 1.3);
    for (double& v : a) v = rng.uniform(-0.15, 0.15);
    for (double& v : b) v = rng.uniform(-0.15, 0.15);
    double err[2] = {0.0, 0.0};
    for (int r = 0; r < 2; ++r) {
      const int N = r == 0 ? 129 : 257;
      GridSpec g({AxisSpec{Topology::polar, pi, N}});
      WarpedMetric wm(g, n);
      for (int i = 0; i < N; ++i) {
        const double x = g.x(0, i);
        double eta = 1.0, zeta = 1.0;
        for (int m = 0; m < 3; ++m) {
          eta += a[m] * std::cos((m + 1) * x);
          zeta += b[m] * std::cos((m + 1) * x);
        }
        wm.phi.at(static_cast<std::size_t>(i), 0) = std::sin(x) * eta;
        wm.psi.at(static_cast<std::size_t>(i), 0) = b0 * zeta;
      }
      // production path
      RotsymState st = rotsym_state(wm);
      RotsymRhs rhs = rotsym_rhs_pq(st.P, st.q, n, 2);
      // oracle path: raw (phi, psi)-level curvature stencils (only reliable
      // away from the axes, which the comparison window respects) and a
      // finite-differenced Lie derivative of the textbook DeTurck vector
      GridField dpsi = hat_gradient(wm.psi, 2), dphi = hat_gradient(wm.phi, 2);
      GridField phis(g, 1);
      for (std::size_t id = 0; id < g.node_count(); ++id)
        phis.at(id, 0) = dphi.at(id, 0) / wm.psi.at(id, 0);
      GridField dphis = hat_gradient(phis, 2);
      GridField ric_xx(g, 1), ric_sph(g, 1), uo(g, 1);
      uo.set_parity(0, 0, -1);
      for (int i = 1; i < N - 1; ++i) {
        const std::size_t id = static_cast<std::size_t>(i);
        const double x = g.x(0, i);
        const double psi = wm.psi.at(id, 0), phi = wm.phi.at(id, 0);
        const double k0 = -dphis.at(id, 0) / (psi * phi);
        const double k1 = (1.0 - phis.at(id, 0) * phis.at(id, 0)) / (phi * phi);
        ric_xx.at(id, 0) = (n - 1) * k0 * psi * psi;
        ric_sph.at(id, 0) = (k0 + (n - 2) * k1) * phi * phi;
        uo.at(id, 0) = dpsi.at(id, 0) / (psi * psi * psi) -
                       (n - 1) * dphi.at(id, 0) / (phi * psi * psi) +
                       (n - 1) * std::sin(x) * std::cos(x) / (phi * phi);
      }
      GridField P = st.P, Phi(g, 1);
      for (std::size_t id = 0; id < g.node_count(); ++id) {
        const double phi = wm.phi.at(id, 0);
        Phi.at(id, 0) = phi * phi;
      }
      GridField Pp = hat_gradient(P, 2), Fp = hat_gradient(Phi, 2), uop = hat_gradient(uo, 2);
      double scale = 1.0, e = 0.0;
      for (int i = 0; i < N; ++i) {
        const double x = g.x(0, i);
        if (x < 0.2 * pi || x > 0.8 * pi) continue;
        const std::size_t id = static_cast<std::size_t>(i);
        const double dP_o = -2.0 * ric_xx.at(id, 0) + uo.at(id, 0) * Pp.at(id, 0) +
                            2.0 * P.at(id, 0) * uop.at(id, 0);
        const double dF_o = -2.0 * ric_sph.at(id, 0) + uo.at(id, 0) * Fp.at(id, 0);
        const double s = std::sin(x);
        e = std::max(e, std::abs(rhs.dP.at(id, 0) - dP_o));
        e = std::max(e, std::abs(s * s * rhs.dq.at(id, 0) - dF_o));
        scale = std::max({scale, std::abs(dP_o), std::abs(dF_o)});
      }
      err[r] = e / scale;
    }
    if (!(err[0] < 0.05))
      throw NumericsError("reduced rhs self-check: coarse-grid disagreement " +
                          std::to_string(err[0]));
    if (err[0] > 1e-12 && !(err[1] < err[0] / 2.2))
      throw NumericsError("reduced rhs self-check: discrepancy does not shrink at O(h^2), " +
                          std::to_string(err[0]) + " -> " + std::to_string(err[1]));
  }
  done = true;
}

}  // namespace detail

inline ReducedRhs reduced_rhs(const WarpedMetric& wm, int order = 2) {
  const GridSpec& g = wm.grid();
  if (wm.polar()) {
    detail::reduced_rhs_selfcheck();
    detail::RotsymState st = detail::rotsym_state(wm);
    detail::RotsymRhs rhs = detail::rotsym_rhs_pq(st.P, st.q, wm.n, order);
    ReducedRhs out{std::move(rhs.dP), GridField(g, 1), std::move(rhs.u)};
    const int N = g.axis(0).nodes;
    for (int i = 0; i < N; ++i) {
      const double s = std::sin(g.x(0, i));
      out.dphi2.at(static_cast<std::size_t>(i), 0) =
          s * s * rhs.dq.at(static_cast<std::size_t>(i), 0);
    }
    return out;
  }
  detail::RotsymState st = detail::rotsym_state(wm);
  detail::RotsymRhs rhs = detail::rotsym_rhs_torus(st.P, st.q, order);
  return ReducedRhs{std::move(rhs.dP), std::move(rhs.dq), std::move(rhs.u)};
}

// ---------------------------------------------------------------------------
// Reduced flow

struct ReducedFlowParams {
  SolverParams solver;  // theta is forced to 1 for the nonlinear step
};

struct ReducedDiagnostics {
  double t = 0.0;
  double k0_min = 0.0, k1_min = 0.0, scalar_min = 0.0;
  double phi2_min = 0.0;  // min of phi^2 over interior nodes
  double u_max = 0.0;     // max |W| coordinate component
  double symmetry_residual = std::numeric_limits<double>::quiet_NaN();
  double equator_a = std::numeric_limits<double>::quiet_NaN();
  double equator_h = std::numeric_limits<double>::quiet_NaN();
};

struct ReducedFlowResult {
  std::vector<WarpedMetric> path;
  std::vector<ReducedDiagnostics> diag;
  bool halted = false;  // phi^2 hit zero in the interior (neckpinch-like)
  double halt_time = std::numeric_limits<double>::quiet_NaN();
};

// Second fundamental form of the equator slice seen from the half-manifold
// [0, pi/2]: A(e,e) = phi'_s / phi with a one-sided stencil from the left.
// Positive means the cap is convex; H = (n-1) A.
inline double equator_second_form(const WarpedMetric& wm) {
  if (!wm.polar() || !wm.hemisphere)
    throw ConfigError("equator form: hemisphere-mode warped metric required");
  const GridSpec& g = wm.grid();
  const int M = (g.axis(0).nodes - 1) / 2;
  const double h = g.spacing(0);
  const std::size_t m = static_cast<std::size_t>(M);
  const double dphi = (3.0 * wm.phi.at(m, 0) - 4.0 * wm.phi.at(m - 1, 0) +
                       wm.phi.at(m - 2, 0)) / (2.0 * h);
  return dphi / (wm.psi.at(m, 0) * wm.phi.at(m, 0));
}

namespace detail {

inline void symmetrize_about_middle(GridField& f) {
  const int N = f.grid().axis(0).nodes;
  for (int c = 0; c < f.ncomp(); ++c)
    for (int i = 0; i < N / 2; ++i) {
      const std::size_t a = static_cast<std::size_t>(i);
      const std::size_t b = static_cast<std::size_t>(N - 1 - i);
      const double v = 0.5 * (f.at(a, c) + f.at(b, c));
      f.at(a, c) = v;
      f.at(b, c) = v;
    }
}

inline double asymmetry(const GridField& f) {
  const int N = f.grid().axis(0).nodes;
  double worst = 0.0;
  for (int c = 0; c < f.ncomp(); ++c)
    for (int i = 0; i < N / 2; ++i)
      worst = std::max(worst, std::abs(f.at(static_cast<std::size_t>(i), c) -
                                       f.at(static_cast<std::size_t>(N - 1 - i), c)));
  return worst;
}

inline WarpedMetric state_to_warped(const WarpedMetric& proto, const GridField& P,
                                    const GridField& q) {
  WarpedMetric wm(proto.grid(), proto.n, proto.hemisphere);
  const GridSpec& g = proto.grid();
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    wm.psi.at(id, 0) = std::sqrt(P.at(id, 0));
    double f = q.at(id, 0);
    if (proto.polar()) {
      const double s = std::sin(g.x(0, static_cast<int>(id)));
      f *= s * s;
    }
    wm.phi.at(id, 0) = std::sqrt(std::max(f, 0.0));
  }
  return wm;
}

inline ReducedDiagnostics reduced_diag(const WarpedMetric& wm, const GridField& P,
                                       const GridField& q, double t, double asym) {
  const GridSpec& g = wm.grid();
  const int N = g.axis(0).nodes;
  ReducedDiagnostics d;
  d.t = t;
  d.symmetry_residual = asym;
  d.k0_min = d.k1_min = d.scalar_min = std::numeric_limits<double>::infinity();
  d.phi2_min = std::numeric_limits<double>::infinity();
  if (wm.polar()) {
    RotsymRhs rhs = rotsym_rhs_pq(P, q, wm.n, 2);  // reuse u for diagnostics
    GridField k0f(g, 1), k1f(g, 1);
    rotsym_k0k1(P, q, 2, k0f, k1f);
    for (int i = 1; i < N - 1; ++i) {
      const std::size_t id = static_cast<std::size_t>(i);
      const double s = std::sin(g.x(0, i));
      d.phi2_min = std::min(d.phi2_min, q.at(id, 0) * s * s);
      d.u_max = std::max(d.u_max, std::abs(rhs.u.at(id, 0)));
    }
    for (int i = 0; i < N; ++i) {
      const std::size_t id = static_cast<std::size_t>(i);
      d.k0_min = std::min(d.k0_min, k0f.at(id, 0));
      d.k1_min = std::min(d.k1_min, k1f.at(id, 0));
      d.scalar_min = std::min(d.scalar_min, 2.0 * (wm.n - 1) * k0f.at(id, 0) +
                                                (wm.n - 1) * (wm.n - 2) * k1f.at(id, 0));
    }
    if (wm.hemisphere) {
      d.equator_a = equator_second_form(wm);
      d.equator_h = (wm.n - 1) * d.equator_a;
    }
  } else {
    WarpedCurvature wc = warped_curvature(wm, 2);
    RotsymRhs rhs = rotsym_rhs_torus(P, q, 2);
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      d.k0_min = std::min(d.k0_min, wc.k0.at(id, 0));
      d.scalar_min = std::min(d.scalar_min, wc.scalar.at(id, 0));
      d.phi2_min = std::min(d.phi2_min, q.at(id, 0));
      d.u_max = std::max(d.u_max, std::abs(rhs.u.at(id, 0)));
    }
    d.k1_min = std::numeric_limits<double>::quiet_NaN();
  }
  return d;
}

}  // namespace detail

// Linearly implicit reduced flow: the principal part (1/P) d_xx of both state
// components goes implicit through the scalar heat stepper, the grouped
// remainder is frozen at the current state.  If phi^2 touches zero away from
// the axes the flow halts and returns the trajectory up to the last good
// state together with the time at which the breakdown was detected.
inline ReducedFlowResult reduced_flow(const WarpedMetric& wm0, const TimeMesh& mesh,
                                      const ReducedFlowParams& rp = ReducedFlowParams{}) {
  detail::reduced_rhs_selfcheck();
  const GridSpec& g = wm0.grid();
  const int N = g.axis(0).nodes;
  const bool polar = wm0.polar();
  SolverParams sp = rp.solver;
  sp.theta = 1.0;

  detail::RotsymState st = detail::rotsym_state(wm0);
  GridField Y(g, 2);
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    Y.at(id, 0) = st.P.at(id, 0);
    Y.at(id, 1) = st.q.at(id, 0);
  }
  if (wm0.hemisphere) detail::symmetrize_about_middle(Y);

  auto split = [&](const GridField& y, GridField& P, GridField& q) {
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      P.at(id, 0) = y.at(id, 0);
      q.at(id, 0) = y.at(id, 1);
    }
  };

  ReducedFlowResult res;
  GridField P(g, 1), q(g, 1);
  split(Y, P, q);
  res.path.push_back(detail::state_to_warped(wm0, P, q));
  res.path.back().psi = wm0.psi;  // keep the caller's exact profiles at t = 0
  res.path.back().phi = wm0.phi;
  res.diag.push_back(detail::reduced_diag(res.path.back(), P, q, 0.0,
                                          wm0.hemisphere ? detail::asymmetry(Y) : 0.0));

  for (int k = 0; k < mesh.steps(); ++k) {
    const double dt = mesh.dt(k);
    split(Y, P, q);
    detail::RotsymRhs rhs = polar ? detail::rotsym_rhs_pq(P, q, wm0.n, sp.fd_order)
                                  : detail::rotsym_rhs_torus(P, q, sp.fd_order);
    // source = F(Y) - L Y with L = (1/P) d_xx, the implicitly treated part
    GridField lap = hat_hessian(Y, sp.fd_order);
    GridField src(g, 2);
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      src.at(id, 0) = rhs.dP.at(id, 0) - lap.at(id, 0) / P.at(id, 0);
      src.at(id, 1) = rhs.dq.at(id, 0) - lap.at(id, 1) / P.at(id, 0);
    }
    MetricField w(g);
    for (std::size_t id = 0; id < g.node_count(); ++id) w.set(id, 0, 0, P.at(id, 0));
    GridField Yn = step_linear(w, Y, dt, &src, sp);
    const double asym = wm0.hemisphere ? detail::asymmetry(Yn) : 0.0;
    if (wm0.hemisphere) detail::symmetrize_about_middle(Yn);

    bool broke = false;
    for (int i = 0; i < N && !broke; ++i) {
      const bool interior = !polar || (i > 0 && i < N - 1);
      const std::size_t id = static_cast<std::size_t>(i);
      if (!(Yn.at(id, 0) > 0.0) || (interior && !(Yn.at(id, 1) > 0.0))) broke = true;
    }
    if (broke) {
      res.halted = true;
      res.halt_time = mesh.t[k + 1];
      return res;
    }
    Y = std::move(Yn);
    split(Y, P, q);
    res.path.push_back(detail::state_to_warped(wm0, P, q));
    res.diag.push_back(detail::reduced_diag(res.path.back(), P, q, mesh.t[k + 1], asym));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Cone margins for two-eigenvalue curvature tensors
//
// A warped product has curvature operator diag(K0 x (n-1), K1 x rest) on
// wedges, so every cone margin reduces to a closed form in (K0, K1).  The
// PIC-family formulas are cross-checked once per process against the generic
// frame-descent checker on assembled algebraic tensors; a disagreement means
// the closed form was mis-derived and is a hard error.

enum class RotsymCone { curvature_operator, scalar, pic, pic1, pic2 };

namespace detail {

// R_{ijkl} for operator diag(K0 on nu-planes, K1 elsewhere), nu = e0,
// orthonormal components.
inline std::vector<double> two_eig_tensor(double k0, double k1, int n) {
  std::vector<double> R(static_cast<std::size_t>(n) * n * n * n, 0.0);
  auto idx = [n](int i, int j, int k, int l) {
    return static_cast<std::size_t>(((i * n + j) * n + k) * n + l);
  };
  const double d = k0 - k1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = k1 * ((i == k ? 1.0 : 0.0) * (j == l ? 1.0 : 0.0) -
                           (i == l ? 1.0 : 0.0) * (j == k ? 1.0 : 0.0));
          v += d * ((i == k && j == 0 && l == 0 ? 1.0 : 0.0) +
                    (j == l && i == 0 && k == 0 ? 1.0 : 0.0) -
                    (i == l && j == 0 && k == 0 ? 1.0 : 0.0) -
                    (j == k && i == 0 && l == 0 ? 1.0 : 0.0));
          R[idx(i, j, k, l)] = v;
        }
  return R;
}

inline double two_eig_margin(double k0, double k1, int n, RotsymCone v) {
  switch (v) {
    case RotsymCone::curvature_operator:
      return n == 2 ? k0 : std::min(k0, k1);
    case RotsymCone::scalar:
      return 2.0 * (n - 1) * k0 + static_cast<double>(n - 1) * (n - 2) * k1;
    case RotsymCone::pic:
      if (n == 4) return 2.0 * (k0 + k1);
      return std::min(4.0 * k1, 2.0 * (k0 + k1));
    case RotsymCone::pic1:
      if (n == 4) return 2.0 * std::min(k0, k1) + 2.0 * std::min(0.0, std::max(k0, k1));
      return k0 >= k1 ? 2.0 * k1 + 2.0 * std::min(0.0, k1)
                      : 2.0 * k0 + 2.0 * std::min(0.0, k1);
    case RotsymCone::pic2: {
      if (n == 4) {
        const double a = std::min(k0, k1), b = std::max(k0, k1);
        if (a >= 0.0) return a;
        if (b >= 0.0) return 2.0 * a;
        return std::min(a, 2.0 * (a + b));
      }
      if (k0 >= k1) return k1 >= 0.0 ? k1 : 4.0 * k1;
      if (k1 >= 0.0) return k0 >= 0.0 ? k0 : 2.0 * k0;
      return std::min(k0, 2.0 * (k0 + k1));
    }
  }
  return 0.0;
}

inline void rotsym_cone_selfcheck() {
  static bool done = false;
  if (done) return;
  const double pts[] = {-1.2, -0.1, 0.0, 0.3, 1.0, 2.0};
  for (int n : {4, 5}) {
    for (double k0 : pts)
      for (double k1 : pts) {
        const std::vector<double> R = two_eig_tensor(k0, k1, n);
        // operator margin against a direct wedge-basis eigensolve
        const int NW = n * (n - 1) / 2;
        Eigen::MatrixXd M(NW, NW);
        {
          std::vector<std::pair<int, int>> pr;
          for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) pr.emplace_back(i, j);
          auto at = [&](int i, int j, int k, int l) {
            return R[static_cast<std::size_t>(((i * n + j) * n + k) * n + l)];
          };
          for (int p = 0; p < NW; ++p)
            for (int s = 0; s < NW; ++s)
              M(p, s) = at(pr[p].first, pr[p].second, pr[s].first, pr[s].second);
        }
        const double op_ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M)
                                  .eigenvalues().minCoeff();
        double scal_ref = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            scal_ref += R[static_cast<std::size_t>(((i * n + j) * n + i) * n + j)];
        auto close = [](double x, double y, double tol) {
          return std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)));
        };
        if (!close(two_eig_margin(k0, k1, n, RotsymCone::curvature_operator), op_ref, 1e-10) ||
            !close(two_eig_margin(k0, k1, n, RotsymCone::scalar), scal_ref, 1e-10))
          throw NumericsError("rotsym cone self-check: operator/scalar closed form is wrong");
        for (RotsymCone v : {RotsymCone::pic, RotsymCone::pic1, RotsymCone::pic2}) {
          const ConeVariant cv = v == RotsymCone::pic    ? ConeVariant::pic
                                 : v == RotsymCone::pic1 ? ConeVariant::pic1
                                                         : ConeVariant::pic2;
          PicParams pp;
          pp.starts = 12;  // highly symmetric tensors, descent converges fast
          const double generic = pic_margin_tensor(R, n, cv, pp).margin;
          if (!close(two_eig_margin(k0, k1, n, v), generic, 1e-5))
            throw NumericsError(
                "rotsym cone self-check: closed form disagrees with the generic checker (" +
                std::to_string(k0) + ", " + std::to_string(k1) + ", n=" + std::to_string(n) +
                "): " + std::to_string(two_eig_margin(k0, k1, n, v)) + " vs " +
                std::to_string(generic));
        }
      }
  }
  done = true;
}

}  // namespace detail

inline double cone_check_rotsym(double k0, double k1, int n, RotsymCone variant) {
  if (n < 2) throw ConfigError("cone check: dimension must be >= 2");
  const bool pic_family = variant == RotsymCone::pic || variant == RotsymCone::pic1 ||
                          variant == RotsymCone::pic2;
  if (pic_family) {
    if (n < 4) throw ConfigError("cone check: pic margins need dimension >= 4");
    detail::rotsym_cone_selfcheck();
  }
  return detail::two_eig_margin(k0, k1, n, variant);
}

inline double cone_check_rotsym(const GridField& k0, const GridField& k1, int n,
                                RotsymCone variant) {
  if (k0.grid().node_count() != k1.grid().node_count() || k0.ncomp() != 1 || k1.ncomp() != 1)
    throw ConfigError("cone check: K0, K1 must be matching scalar fields");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < k0.grid().node_count(); ++id)
    m = std::min(m, cone_check_rotsym(k0.at(id, 0), k1.at(id, 0), n, variant));
  return m;
}

}  // namespace ricci
