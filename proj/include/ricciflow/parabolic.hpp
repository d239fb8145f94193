#pragma once

// Implicit time stepping for linear parabolic systems
//
//   d_t eta = w^{kl} d_k d_l eta + F
//
// with a spatially varying SPD coefficient w^{kl} acting componentwise.  The
// theta-scheme step is solved with Jacobi-preconditioned BiCGStab; graded
// time meshes t_k = T (k/N)^rho resolve the rough initial layer.

#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

struct TimeMesh {
  std::vector<double> t;  // t[0] = 0, strictly increasing, t.back() = T

  static TimeMesh graded(double T, int nsteps, double rho = 2.0) {
    if (!(T > 0.0)) throw ConfigError("time mesh: horizon must be positive");
    if (nsteps < 2) throw ConfigError("time mesh: need at least 2 steps");
    if (!(rho >= 1.0)) throw ConfigError("time mesh: grading exponent must be >= 1");
    TimeMesh m;
    m.t.resize(nsteps + 1);
    for (int k = 0; k <= nsteps; ++k)
      m.t[k] = T * std::pow(static_cast<double>(k) / nsteps, rho);
    m.t[0] = 0.0;
    m.t[nsteps] = T;
    return m;
  }

  static TimeMesh uniform(double T, int nsteps) { return graded(T, nsteps, 1.0); }

  int steps() const { return static_cast<int>(t.size()) - 1; }
  double horizon() const { return t.back(); }
  double dt(int k) const { return t[k + 1] - t[k]; }
  double dt_min() const {
    double m = t[1] - t[0];
    for (int k = 1; k < steps(); ++k) m = std::min(m, dt(k));
    return m;
  }
};

// sup over nodes of max(largest eigenvalue of w^{-1}, largest of w), i.e. the
// ellipticity/boundedness constant of the coefficient relative to the flat
// background; diverges as w degenerates in any direction.
inline double parabolicity_lambda(const MetricField& w) {
  const int n = w.dim();
  const GridField& inv = w.inverse();
  double lam = 0.0;
  Eigen::MatrixXd a(n, n);
  for (std::size_t id = 0; id < w.grid().node_count(); ++id) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = inv.at(id, i * n + j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    lam = std::max(lam, es.eigenvalues().maxCoeff());
    lam = std::max(lam, 1.0 / es.eigenvalues().minCoeff());
  }
  return lam;
}

struct SolverParams {
  double theta = 1.0;   // 1 = backward Euler, 0.5 = Crank-Nicolson
  double tol = 1e-11;   // relative residual target
  int max_iter = 10000;
  int fd_order = 2;
};

namespace detail {

inline double dot(const GridField& a, const GridField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double nrm2(const GridField& a) { return std::sqrt(dot(a, a)); }

// y = x - coef * w^{kl} d_k d_l x
struct TraceHessianOp {
  const GridField* winv;
  double coef;
  int order;
  void apply(const GridField& x, GridField& y) const {
    trace_hessian_into(*winv, x, y, order);
    for (std::size_t i = 0; i < x.size(); ++i)
      y.data()[i] = x.data()[i] - coef * y.data()[i];
  }
};

// Inverse diagonal of (I - coef * trace hessian) for Jacobi preconditioning.
inline GridField jacobi_inverse_diag(const GridSpec& gr, const GridField& winv, int ncomp,
                                     double coef, int order) {
  const int n = gr.dim();
  GridField d(gr, ncomp);
  for (std::size_t id = 0; id < gr.node_count(); ++id) {
    double s = 1.0;
    for (int k = 0; k < n; ++k) {
      const double h = gr.spacing(k);
      const double c0 = (order == 4) ? 5.0 / (2.0 * h * h) : 2.0 / (h * h);
      s += coef * winv.at(id, k * n + k) * c0;
    }
    for (int c = 0; c < ncomp; ++c) d.at(id, c) = 1.0 / s;
  }
  return d;
}

// Preconditioned BiCGStab; x holds the initial guess on entry.  Throws
// NumericsError with the parabolicity certificate if it fails to converge.
inline int bicgstab(const TraceHessianOp& op, const GridField& b, GridField& x,
                    const GridField& idiag, double tol, int max_iter,
                    const MetricField& w_for_report) {
  const double bn = nrm2(b);
  if (bn == 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = 0.0;
    return 0;
  }
  GridField r = x.like(), v = x.like(), p = x.like(), s = x.like(), t = x.like();
  GridField phat = x.like(), shat = x.like(), rhat = x.like();
  op.apply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] = b.data()[i] - r.data()[i];
  if (nrm2(r) <= tol * bn) return 0;
  rhat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  auto fail = [&](const char* why) {
    std::ostringstream os;
    os << "parabolic solve " << why << " (relative residual " << nrm2(r) / bn
       << ", parabolicity lambda = " << parabolicity_lambda(w_for_report) << ")";
    throw NumericsError(os.str());
  };
  for (int it = 1; it <= max_iter; ++it) {
    const double rho1 = dot(rhat, r);
    if (rho1 == 0.0) fail("broke down");
    if (it == 1) {
      p = r;
    } else {
      const double beta = (rho1 / rho) * (alpha / omega);
      for (std::size_t i = 0; i < p.size(); ++i)
        p.data()[i] = r.data()[i] + beta * (p.data()[i] - omega * v.data()[i]);
    }
    for (std::size_t i = 0; i < p.size(); ++i) phat.data()[i] = idiag.data()[i] * p.data()[i];
    op.apply(phat, v);
    const double rv = dot(rhat, v);
    if (rv == 0.0) fail("broke down");
    alpha = rho1 / rv;
    for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = r.data()[i] - alpha * v.data()[i];
    if (nrm2(s) <= tol * bn) {
      for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += alpha * phat.data()[i];
      return it;
    }
    for (std::size_t i = 0; i < s.size(); ++i) shat.data()[i] = idiag.data()[i] * s.data()[i];
    op.apply(shat, t);
    const double tt = dot(t, t);
    if (tt == 0.0) fail("broke down");
    omega = dot(t, s) / tt;
    for (std::size_t i = 0; i < x.size(); ++i)
      x.data()[i] += alpha * phat.data()[i] + omega * shat.data()[i];
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] = s.data()[i] - omega * t.data()[i];
    if (nrm2(r) <= tol * bn) return it;
    if (omega == 0.0) fail("broke down");
    rho = rho1;
  }
  fail("did not converge");
  return -1;  // unreachable
}

}  // namespace detail

// One theta-scheme step of size dt with coefficient w frozen at the implicit
// level: (I - theta dt L) out = eta + (1-theta) dt L eta + dt * source.
// `source` (optional) is the combined theta-level forcing chosen by the
// caller.  The previous state seeds the Krylov iteration, so an exact steady
// state is reproduced bitwise.
inline GridField step_linear(const MetricField& w, const GridField& eta, double dt,
                             const GridField* source = nullptr,
                             const SolverParams& sp = SolverParams{}) {
  if (!(dt > 0.0)) throw ConfigError("step_linear: dt must be positive");
  const GridField& winv = w.inverse();
  GridField b = eta;
  if (sp.theta != 1.0) {
    GridField lap = eta.like();
    trace_hessian_into(winv, eta, lap, sp.fd_order);
    const double c = (1.0 - sp.theta) * dt;
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += c * lap.data()[i];
  }
  if (source) {
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] += dt * source->data()[i];
  }
  detail::TraceHessianOp op{&winv, sp.theta * dt, sp.fd_order};
  GridField idiag =
      detail::jacobi_inverse_diag(eta.grid(), winv, eta.ncomp(), sp.theta * dt, sp.fd_order);
  GridField x = eta;  // warm start
  detail::bicgstab(op, b, x, idiag, sp.tol, sp.max_iter, w);
  return x;
}

// Integrate along a time mesh with step-dependent coefficient and source.
// `w_at(k)` and `source_at(k)` describe step k (from t_k to t_{k+1});
// source_at may return nullptr.  Returns the trajectory including eta0.
template <class WAt, class SourceAt>
std::vector<GridField> solve_path(const TimeMesh& mesh, WAt&& w_at, SourceAt&& source_at,
                                  const GridField& eta0,
                                  const SolverParams& sp = SolverParams{}) {
  std::vector<GridField> out;
  out.reserve(mesh.steps() + 1);
  out.push_back(eta0);
  for (int k = 0; k < mesh.steps(); ++k)
    out.push_back(step_linear(w_at(k), out.back(), mesh.dt(k), source_at(k), sp));
  return out;
}

}  // namespace ricci
