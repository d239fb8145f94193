#pragma once

// DeTurck gauge transport: solve the flow of diffeomorphisms generated by the
// (negated) DeTurck vector field backward from the identity at the final time,
// pull metrics back along the result, and measure how close the transported
// trajectory is to a genuine Ricci flow.

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ricciflow/curvature.hpp"
#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/parabolic.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

// A diffeomorphism of the grid domain, stored as a displacement field:
// psi(x) = x + u(x), with u interpolated between nodes and folded across
// periodic / mirror axes the same way any rank-1 field is.
struct DiffeoField {
  double time = 0.0;
  GridField u;

  DiffeoField(const GridSpec& g, double t) : time(t), u(g, g.dim()) {
    u.set_tensor_parity(1);
  }

  const GridSpec& grid() const { return u.grid(); }

  // y = psi(x) = x + u(x); x need not be a node.
  void apply(const double* x, double* y) const {
    const int n = u.grid().dim();
    double uv[kMaxDim];
    interpolate(u, x, uv);
    for (int a = 0; a < n; ++a) y[a] = x[a] + uv[a];
  }

  // D psi at every node, component (i*n + k) = d_i psi^k = delta_ik + d_i u^k.
  GridField jacobian(int order = 2) const {
    const GridSpec& gr = u.grid();
    const int n = gr.dim();
    GridField jac = hat_gradient(u, order);
    for (std::size_t id = 0; id < gr.node_count(); ++id)
      for (int a = 0; a < n; ++a) jac.at(id, a * n + a) += 1.0;
    return jac;
  }

  double min_jacobian_det(int order = 2) const {
    const GridSpec& gr = u.grid();
    const int n = gr.dim();
    GridField jac = jacobian(order);
    Eigen::MatrixXd J(n, n);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < gr.node_count(); ++id) {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) J(i, k) = jac.at(id, i * n + k);
      dmin = std::min(dmin, J.determinant());
    }
    return dmin;
  }

  // Worst singular values of D psi over the grid: (sigma_min, sigma_max).
  // The bi-Lipschitz constant of the map is max(sigma_max, 1/sigma_min).
  std::pair<double, double> singular_range(int order = 2) const {
    const GridSpec& gr = u.grid();
    const int n = gr.dim();
    GridField jac = jacobian(order);
    Eigen::MatrixXd J(n, n);
    double smin = std::numeric_limits<double>::infinity();
    double smax = 0.0;
    for (std::size_t id = 0; id < gr.node_count(); ++id) {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) J(i, k) = jac.at(id, i * n + k);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
      smin = std::min(smin, svd.singularValues().minCoeff());
      smax = std::max(smax, svd.singularValues().maxCoeff());
    }
    return {smin, smax};
  }

  double bilipschitz(int order = 2) const {
    auto [smin, smax] = singular_range(order);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(smax, 1.0 / smin);
  }
};

struct GaugeParams {
  int fd_order = 2;       // order of the Jacobian stencils
  bool check_det = true;  // abort when D psi degenerates
};

struct DeturckGauge {
  std::vector<DiffeoField> psi;  // psi[k] at mesh time t_k; psi.back() = id
  // Exponent p fitted to |u(t) - u(0)| ~ t^p near t = 0, used to extrapolate
  // the displacement to t = 0 from the first graded times.
  double initial_fit_order = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void check_jacobian(const DiffeoField& psi, int order) {
  const double dmin = psi.min_jacobian_det(order);
  if (!(dmin > 0.0)) {
    std::ostringstream os;
    os << "gauge degeneration: det(D psi) = " << dmin << " at t = " << psi.time;
    throw NumericsError(os.str());
  }
}

}  // namespace detail

// Integrate d psi_t / dt = -W(psi_t, t) backward from psi_T = identity down to
// t_1 with one explicit midpoint step per mesh interval; W is sampled by cubic
// interpolation in space and linear interpolation in time.  The value at t_0
// is not produced by stepping into the origin: it is extrapolated from the
// first graded times assuming u(t) = u0 + C t^p with a globally fitted p.
inline DeturckGauge integrate_deturck_ode(const std::vector<GridField>& W,
                                          const TimeMesh& mesh,
                                          const GaugeParams& gp = {}) {
  const int steps = mesh.steps();
  if ((int)W.size() != steps + 1)
    throw ConfigError("integrate_deturck_ode: need one vector field per mesh time");
  if (steps < 3)
    throw ConfigError("integrate_deturck_ode: need at least 3 steps to extrapolate to t = 0");
  const GridSpec& gr = W[0].grid();
  const int n = gr.dim();

  DeturckGauge out;
  out.psi.assign((std::size_t)steps + 1, DiffeoField(gr, 0.0));
  for (int k = 0; k <= steps; ++k) out.psi[(std::size_t)k].time = mesh.t[(std::size_t)k];

  int idx[kMaxDim];
  double x[kMaxDim], y[kMaxDim], ymid[kMaxDim];
  double w1[kMaxDim], wa[kMaxDim], wb[kMaxDim];

  for (int k = steps - 1; k >= 1; --k) {
    const double h = mesh.dt(k);
    const GridField& un = out.psi[(std::size_t)k + 1].u;
    GridField& uk = out.psi[(std::size_t)k].u;
    std::size_t id = 0;
    for (int a = 0; a < n; ++a) idx[a] = 0;
    do {
      for (int a = 0; a < n; ++a) x[a] = gr.x(a, idx[a]);
      for (int a = 0; a < n; ++a) y[a] = x[a] + un.at(id, a);
      // Backward in t is forward in s = T - t: dy/ds = +W(y, t(s)).
      interpolate(W[(std::size_t)k + 1], y, w1);
      for (int a = 0; a < n; ++a) ymid[a] = y[a] + 0.5 * h * w1[a];
      interpolate(W[(std::size_t)k], ymid, wa);
      interpolate(W[(std::size_t)k + 1], ymid, wb);
      for (int a = 0; a < n; ++a) uk.at(id, a) = y[a] + 0.5 * h * (wa[a] + wb[a]) - x[a];
      ++id;
    } while (gr.next(idx));
    if (gp.check_det) detail::check_jacobian(out.psi[(std::size_t)k], gp.fd_order);
  }

  // Fit |u(t2)-u(t1)| / |u(t3)-u(t2)| to the t^p model and extrapolate to 0.
  const GridField& u1 = out.psi[1].u;
  const GridField& u2 = out.psi[2].u;
  const GridField& u3 = out.psi[3].u;
  const double t1 = mesh.t[1], t2 = mesh.t[2], t3 = mesh.t[3];
  const double d21 = max_abs_diff(u2, u1);
  const double d32 = max_abs_diff(u3, u2);
  double p = 1.0;
  if (d21 > 0.0 && d32 > 0.0) {
    const double target = d32 / d21;
    double lo = 0.05, hi = 4.0;
    auto ratio = [&](double q) {
      return (std::pow(t3, q) - std::pow(t2, q)) / (std::pow(t2, q) - std::pow(t1, q));
    };
    // ratio(q) grows monotonically in q for graded t1 < t2 < t3.
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (ratio(mid) < target) lo = mid; else hi = mid;
    }
    p = 0.5 * (lo + hi);
  }
  out.initial_fit_order = p;
  const double s1 = std::pow(t1, p), s2 = std::pow(t2, p);
  GridField& u0 = out.psi[0].u;
  for (std::size_t id = 0; id < gr.node_count(); ++id)
    for (int a = 0; a < n; ++a) {
      const double c = (u2.at(id, a) - u1.at(id, a)) / (s2 - s1);
      u0.at(id, a) = u1.at(id, a) - c * s1;
    }
  if (gp.check_det) detail::check_jacobian(out.psi[0], gp.fd_order);
  return out;
}

// (psi^* g)_ij(x) = g_kl(psi(x)) d_i psi^k d_j psi^l, with g interpolated at
// the mapped points and the Jacobian from finite differences of u.  The
// result is certified positive definite.
inline MetricField pullback_metric(const DiffeoField& psi, const MetricField& g,
                                   int order = 2) {
  const GridSpec& gr = psi.grid();
  if (&g.components().grid() != &gr)
    throw ConfigError("pullback_metric: map and metric live on different grids");
  const int n = gr.dim();
  GridField jac = psi.jacobian(order);
  MetricField out(gr);
  int idx[kMaxDim];
  double x[kMaxDim], y[kMaxDim];
  double gv[kMaxDim * kMaxDim];
  std::size_t id = 0;
  for (int a = 0; a < n; ++a) idx[a] = 0;
  do {
    for (int a = 0; a < n; ++a) x[a] = gr.x(a, idx[a]);
    psi.apply(x, y);
    interpolate(g.components(), y, gv);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            s += jac.at(id, i * n + k) * jac.at(id, j * n + l) * gv[k * n + l];
        out.set(id, i, j, s);
      }
    ++id;
  } while (gr.next(idx));
  out.inverse();  // factorization certifies positive definiteness
  return out;
}

// Composition (a o b)(x) = a(b(x)); the displacement of the composite is
// u_b(x) + u_a(b(x)).  The time label of `a` is kept.
inline DiffeoField compose(const DiffeoField& a, const DiffeoField& b) {
  const GridSpec& gr = b.grid();
  const int n = gr.dim();
  DiffeoField out(gr, a.time);
  int idx[kMaxDim];
  double x[kMaxDim], y[kMaxDim], ua[kMaxDim];
  std::size_t id = 0;
  for (int aix = 0; aix < n; ++aix) idx[aix] = 0;
  do {
    for (int c = 0; c < n; ++c) x[c] = gr.x(c, idx[c]);
    for (int c = 0; c < n; ++c) y[c] = x[c] + b.u.at(id, c);
    interpolate(a.u, y, ua);
    for (int c = 0; c < n; ++c) out.u.at(id, c) = b.u.at(id, c) + ua[c];
    ++id;
  } while (gr.next(idx));
  return out;
}

// Numerical inverse of psi by the damped fixed point x <- x - 0.8 (psi(x) - y),
// seeded at x = y; the result stores x - y as the displacement of psi^{-1}.
inline DiffeoField invert_diffeo(const DiffeoField& psi, double tol = 1e-10,
                                 int max_iter = 200) {
  const GridSpec& gr = psi.grid();
  const int n = gr.dim();
  DiffeoField inv(gr, psi.time);
  int idx[kMaxDim];
  double y[kMaxDim], x[kMaxDim], fx[kMaxDim];
  std::size_t id = 0;
  for (int a = 0; a < n; ++a) idx[a] = 0;
  do {
    for (int a = 0; a < n; ++a) y[a] = gr.x(a, idx[a]);
    for (int a = 0; a < n; ++a) x[a] = y[a];
    double res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter && res > tol; ++it) {
      psi.apply(x, fx);
      res = 0.0;
      for (int a = 0; a < n; ++a) {
        const double r = fx[a] - y[a];
        res = std::max(res, std::abs(r));
        x[a] -= 0.8 * r;
      }
    }
    if (!(res <= tol)) {
      std::ostringstream os;
      os << "invert_diffeo: fixed point stalled, residual " << res;
      throw NumericsError(os.str());
    }
    for (int a = 0; a < n; ++a) inv.u.at(id, a) = x[a] - y[a];
    ++id;
  } while (gr.next(idx));
  return inv;
}

// Max-norm of d/dt g + 2 Ric(g) at one interior time, from the three-point
// nonuniform centered difference of the neighbors.  On a bounded axis the
// curvature next to the ends sees the reflected ghost kink, so nodes within
// `margin` of either end can be excluded from the report.
inline double ricci_residual_at(const MetricField& gm, const MetricField& g0,
                                const MetricField& gp, double tm, double t0,
                                double tp, int margin = 0, int order = 2) {
  const GridSpec& gr = g0.components().grid();
  const int n = gr.dim();
  const double hm = t0 - tm, hp = tp - t0;
  const double ca = hm / (hp * (hp + hm));        // weight of g(t+)
  const double cb = (hp - hm) / (hp * hm);        // weight of g(t0)
  const double cc = -hp / (hm * (hp + hm));       // weight of g(t-)
  GridField ric = ricci_tensor(g0, order);
  const bool bounded = gr.axis(0).topo != Topology::periodic;
  const int n0 = gr.axis(0).nodes;
  double worst = 0.0;
  int idx[kMaxDim];
  std::size_t id = 0;
  for (int a = 0; a < n; ++a) idx[a] = 0;
  do {
    if (!bounded || (idx[0] >= margin && idx[0] < n0 - margin)) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double dg = ca * gp.val(id, i, j) + cb * g0.val(id, i, j) +
                            cc * gm.val(id, i, j);
          worst = std::max(worst, std::abs(dg + 2.0 * ric.at(id, i * n + j)));
        }
    }
    ++id;
  } while (gr.next(idx));
  return worst;
}

struct RicciResidualReport {
  std::vector<double> time;   // interior mesh times
  std::vector<double> value;  // residual max-norm at each of them
  double max = 0.0;
};

// Residual of the Ricci flow equation along a whole trajectory sampled on a
// time mesh; needs at least three snapshots.
inline RicciResidualReport ricci_residual(const std::vector<MetricField>& path,
                                          const TimeMesh& mesh, int margin = 0,
                                          int order = 2) {
  if (path.size() != mesh.t.size())
    throw ConfigError("ricci_residual: trajectory and mesh sizes differ");
  if (path.size() < 3)
    throw ConfigError("ricci_residual: need at least 3 snapshots");
  RicciResidualReport rep;
  for (std::size_t k = 1; k + 1 < path.size(); ++k) {
    const double r = ricci_residual_at(path[k - 1], path[k], path[k + 1],
                                       mesh.t[k - 1], mesh.t[k], mesh.t[k + 1],
                                       margin, order);
    rep.time.push_back(mesh.t[k]);
    rep.value.push_back(r);
    rep.max = std::max(rep.max, r);
  }
  return rep;
}

}  // namespace ricci
