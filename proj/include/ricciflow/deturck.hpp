#pragma once

// Ricci-DeTurck flow relative to a flat background chart:
//
//   d_t g = -2 Ric(g) + L_W g = g^{kl} d_k d_l g + Q(g, dg),
//
// with W^k = g^{ij} Gamma^k_ij.  The reaction term Q makes the flow strictly
// parabolic; the identity between the two right-hand sides is checked by the
// test suite on random metrics.  Time stepping is linearly implicit: the
// Laplacian coefficient is frozen at the current metric and Q is explicit.
// The same building blocks expose the Picard map whose fixed point is the
// discrete flow path, used to measure contraction in the parabolic norms.

#include <cstddef>
#include <functional>
#include <vector>

#include "ricciflow/curvature.hpp"
#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/norms.hpp"
#include "ricciflow/parabolic.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

// Q_ij = 1/2 g^{kl} g^{pq} [ d_i g_pk d_j g_ql + 2 d_k g_jp d_q g_il
//          - 2 d_k g_jp d_l g_iq - 2 d_j g_pk d_l g_iq - 2 d_i g_pk d_l g_jq ]
inline GridField q_term(const MetricField& g, int order = 2) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField dg = hat_gradient(g.components(), order);  // dg[a](ij)
  const GridField& inv = g.inverse();
  GridField out(gr, n * n);
  out.set_tensor_parity(2);
  auto D = [&](std::size_t id, int a, int i, int j) {
    return dg.at(id, (a * n + i) * n + j);
  };
  for (std::size_t id = 0; id < gr.node_count(); ++id)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int p = 0; p < n; ++p)
              for (int q = 0; q < n; ++q) {
                const double w = inv.at(id, k * n + l) * inv.at(id, p * n + q);
                double t = D(id, i, p, k) * D(id, j, q, l);
                t += 2.0 * D(id, k, j, p) * D(id, q, i, l);
                t -= 2.0 * D(id, k, j, p) * D(id, l, i, q);
                t -= 2.0 * D(id, j, p, k) * D(id, l, i, q);
                t -= 2.0 * D(id, i, p, k) * D(id, l, j, q);
                s += w * t;
              }
        out.at(id, i * n + j) = 0.5 * s;
        out.at(id, j * n + i) = 0.5 * s;
      }
  return out;
}

// W^k = g^{ij} Gamma^k_ij (the background christoffels vanish in a flat chart)
inline GridField deturck_vectorfield(const MetricField& g, int order = 2) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField gam = christoffel(g, order);
  const GridField& inv = g.inverse();
  GridField out(gr, n);
  out.set_tensor_parity(1);
  for (std::size_t id = 0; id < gr.node_count(); ++id)
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          s += inv.at(id, i * n + j) * gam.at(id, (k * n + i) * n + j);
      out.at(id, k) = s;
    }
  return out;
}

// (L_W g)_ij = W^k d_k g_ij + g_kj d_i W^k + g_ik d_j W^k
inline GridField lie_derivative_metric(const GridField& w, const MetricField& g, int order = 2) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField dg = hat_gradient(g.components(), order);
  const GridField dw = hat_gradient(w, order);  // dw[a](k) = d_a W^k
  GridField out(gr, n * n);
  out.set_tensor_parity(2);
  for (std::size_t id = 0; id < gr.node_count(); ++id)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
          s += w.at(id, k) * dg.at(id, (k * n + i) * n + j);
          s += g.val(id, k, j) * dw.at(id, i * n + k);
          s += g.val(id, i, k) * dw.at(id, j * n + k);
        }
        out.at(id, i * n + j) = s;
        out.at(id, j * n + i) = s;
      }
  return out;
}

// right-hand side assembled from curvature: -2 Ric(g) + L_W g
inline GridField assembled_rhs(const MetricField& g, int order = 2) {
  GridField ric = ricci_tensor(g, order);
  GridField out = lie_derivative_metric(deturck_vectorfield(g, order), g, order);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= 2.0 * ric.data()[i];
  return out;
}

// right-hand side in flow form: g^{kl} d_k d_l g + Q(g, dg)
inline GridField deturck_rhs(const MetricField& g, int order = 2) {
  GridField out = q_term(g, order);
  GridField lap = out.like();
  trace_hessian_into(g.inverse(), g.components(), lap, order);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += lap.data()[i];
  return out;
}

struct FlowParams {
  SolverParams solver;     // theta is forced to 1 for the nonlinear step
  int fd_order = 2;
  bool store_path = true;  // keep the whole trajectory (memory permitting)
};

// Linearly implicit Ricci-DeTurck flow: (I - dt tr_{g_k} dd) g_{k+1} = g_k + dt Q(g_k).
// `observer`, if set, sees every mesh point including the initial one.
// Returns the full path, or just the final metric when store_path is off.
inline std::vector<MetricField> deturck_flow(
    const MetricField& g0, const TimeMesh& mesh, const FlowParams& fp = FlowParams{},
    const std::function<void(int, double, const MetricField&)>& observer = {}) {
  SolverParams sp = fp.solver;
  sp.theta = 1.0;
  sp.fd_order = fp.fd_order;
  std::vector<MetricField> path;
  path.reserve(fp.store_path ? mesh.steps() + 1 : 1);
  path.push_back(g0);
  if (observer) observer(0, 0.0, path.back());
  for (int k = 0; k < mesh.steps(); ++k) {
    const MetricField& cur = path.back();
    GridField q = q_term(cur, fp.fd_order);
    GridField next = step_linear(cur, cur.components(), mesh.dt(k), &q, sp);
    MetricField gn(cur.grid());
    gn.mutable_components() = next;
    if (fp.store_path) {
      path.push_back(std::move(gn));
    } else {
      path.back() = std::move(gn);
    }
    if (observer) observer(k + 1, mesh.t[k + 1], path.back());
  }
  return path;
}

// One application of the Picard map around the frozen base metric g0: the
// input path w (size steps+1) is mapped to eta with eta_0 = g0 and
//
//   (I - dt tr_{g0} dd) eta_{k+1}
//       = eta_k + dt [ (tr_{w_k} - tr_{g0}) dd w_{k+1} + Q(w_k) ].
//
// The discrete flow path solves exactly this system with eta = w, so it is a
// fixed point up to solver tolerance.
inline std::vector<GridField> picard_map(const MetricField& g0, const TimeMesh& mesh,
                                         const std::vector<MetricField>& w,
                                         const FlowParams& fp = FlowParams{}) {
  if (w.size() != static_cast<std::size_t>(mesh.steps()) + 1)
    throw ConfigError("picard_map: path length must match the time mesh");
  SolverParams sp = fp.solver;
  sp.theta = 1.0;
  sp.fd_order = fp.fd_order;
  const GridField& inv0 = g0.inverse();
  std::vector<GridField> eta;
  eta.reserve(w.size());
  eta.push_back(g0.components());
  GridField s1 = g0.components().like(), s2 = g0.components().like();
  for (int k = 0; k < mesh.steps(); ++k) {
    trace_hessian_into(w[k].inverse(), w[k + 1].components(), s1, fp.fd_order);
    trace_hessian_into(inv0, w[k + 1].components(), s2, fp.fd_order);
    GridField src = q_term(w[k], fp.fd_order);
    for (std::size_t i = 0; i < src.size(); ++i)
      src.data()[i] += s1.data()[i] - s2.data()[i];
    eta.push_back(step_linear(g0, eta.back(), mesh.dt(k), &src, sp));
  }
  return eta;
}

// || R(w1) - R(w2) ||_X / || w1 - w2 ||_X for two admissible paths.
inline double contraction_ratio(const MetricField& g0, const TimeMesh& mesh,
                                const std::vector<MetricField>& w1,
                                const std::vector<MetricField>& w2,
                                const XNormSpec& xs = XNormSpec{},
                                const FlowParams& fp = FlowParams{}) {
  const std::vector<GridField> r1 = picard_map(g0, mesh, w1, fp);
  const std::vector<GridField> r2 = picard_map(g0, mesh, w2, fp);
  std::vector<GridField> dr, dw;
  dr.reserve(w1.size());
  dw.reserve(w1.size());
  for (std::size_t k = 0; k < w1.size(); ++k) {
    GridField a = r1[k];
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] -= r2[k].data()[i];
    dr.push_back(std::move(a));
    GridField b = w1[k].components();
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] -= w2[k].components().data()[i];
    dw.push_back(std::move(b));
  }
  auto ptrs = [](const std::vector<GridField>& v) {
    std::vector<const GridField*> p;
    p.reserve(v.size());
    for (const auto& f : v) p.push_back(&f);
    return p;
  };
  const double num = x_norm(mesh.t, ptrs(dr), xs);
  const double den = x_norm(mesh.t, ptrs(dw), xs);
  return num / den;
}

}  // namespace ricci
