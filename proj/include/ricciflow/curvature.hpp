#pragma once

// Curvature of metric fields on flat charts: Christoffel symbols, the (0,4)
// Riemann tensor, Ricci/scalar curvature, the curvature operator on the
// unnormalized wedge basis, and the boundary second fundamental form.
//
// Sign convention: R_{ijkl} = <R(d_i,d_j)d_l, d_k>, so constant curvature
// kappa gives R_{ijkl} = kappa (g_ik g_jl - g_il g_jk), sectional curvature
// of an orthonormal pair is R_{ijij}, and Ric_{jl} = g^{ik} R_{ijkl}.
//
// Component layouts: Gamma^k_{ij} -> (k*n+i)*n+j,  R_{ijkl} ->
// ((i*n+j)*n+k)*n+l, Ric_{ij} -> i*n+j.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/rng.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

inline GridField christoffel(const MetricField& g, int order = 2) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField dg = hat_gradient(g.components(), order);  // dg[k](ij)
  const GridField& inv = g.inverse();
  GridField out(gr, n * n * n);
  out.set_tensor_parity(3);
  for (std::size_t id = 0; id < gr.node_count(); ++id) {
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) {
            const double t = dg.at(id, i * n * n + j * n + l) + dg.at(id, j * n * n + i * n + l) -
                             dg.at(id, l * n * n + i * n + j);
            s += inv.at(id, k * n + l) * t;
          }
          out.at(id, (k * n + i) * n + j) = 0.5 * s;
          out.at(id, (k * n + j) * n + i) = 0.5 * s;
        }
  }
  return out;
}

inline GridField riemann(const MetricField& g, int order = 2) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField gam = christoffel(g, order);
  const GridField dgam = hat_gradient(gam, order);  // dgam[a](kij)
  GridField out(gr, n * n * n * n);
  out.set_tensor_parity(4);
  auto G = [&](std::size_t id, int k, int i, int j) { return gam.at(id, (k * n + i) * n + j); };
  auto dG = [&](std::size_t id, int a, int k, int i, int j) {
    return dgam.at(id, a * n * n * n + (k * n + i) * n + j);
  };
  for (std::size_t id = 0; id < gr.node_count(); ++id) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)  // antisymmetric in (i,j); fill both signs
        for (int l = 0; l < n; ++l)
          for (int k = 0; k < n; ++k) {
            double s = 0.0;
            for (int m = 0; m < n; ++m)
              s += g.val(id, k, m) * (dG(id, i, m, j, l) - dG(id, j, m, i, l));
            double q = 0.0;
            for (int m = 0; m < n; ++m)
              for (int p = 0; p < n; ++p)
                q += g.val(id, k, m) *
                     (G(id, m, i, p) * G(id, p, j, l) - G(id, m, j, p) * G(id, p, i, l));
            const double v = s + q;
            out.at(id, ((i * n + j) * n + k) * n + l) = v;
            out.at(id, ((j * n + i) * n + k) * n + l) = -v;
          }
  }
  return out;
}

inline GridField ricci_tensor(const MetricField& g, const GridField& riem) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField& inv = g.inverse();
  GridField out(gr, n * n);
  out.set_tensor_parity(2);
  for (std::size_t id = 0; id < gr.node_count(); ++id)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l <= j; ++l) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k)
            s += inv.at(id, i * n + k) * riem.at(id, ((i * n + j) * n + k) * n + l);
        out.at(id, j * n + l) = s;
        out.at(id, l * n + j) = s;
      }
  return out;
}

inline GridField ricci_tensor(const MetricField& g, int order = 2) { return ricci_tensor(g, riemann(g, order)); }

inline GridField scalar_curvature(const MetricField& g, const GridField& ric) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  const GridField& inv = g.inverse();
  GridField out(gr, 1);
  for (std::size_t id = 0; id < gr.node_count(); ++id) {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) s += inv.at(id, j * n + l) * ric.at(id, j * n + l);
    out.at(id, 0) = s;
  }
  return out;
}

// Riemann components in the g-orthonormal Cholesky frame at one node.
inline std::vector<double> riemann_in_frame(const MetricField& g, const GridField& riem,
                                            std::size_t id) {
  const int n = g.dim();
  double F[kMaxDim * kMaxDim];
  g.frame(id, F);
  // contract one slot at a time
  std::vector<double> cur(riem.data() + id * n * n * n * n,
                          riem.data() + (id + 1) * n * n * n * n);
  std::vector<double> nxt(cur.size(), 0.0);
  for (int slot = 0; slot < 4; ++slot) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    // rotate the leading index into the frame, then cycle it to the back
    for (int a = 0; a < n; ++a) {
      const int rest = n * n * n;
      for (int r = 0; r < rest; ++r) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += F[i * n + a] * cur[i * rest + r];
        nxt[r * n + a] = s;  // append the new index at the back
      }
    }
    std::swap(cur, nxt);
  }
  return cur;  // after 4 cycles the layout is back to (abcd)
}

// Curvature operator on the wedge basis {e_i ^ e_j : i<j} without the
// 1/sqrt(2) normalization: constant curvature kappa -> M = kappa I.
inline Eigen::MatrixXd curvature_operator(const MetricField& g, const GridField& riem,
                                          std::size_t id) {
  const int n = g.dim();
  const std::vector<double> rf = riemann_in_frame(g, riem, id);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  const int N = static_cast<int>(pairs.size());
  Eigen::MatrixXd M(N, N);
  auto R = [&](int i, int j, int k, int l) { return rf[((i * n + j) * n + k) * n + l]; };
  for (int p = 0; p < N; ++p)
    for (int q = 0; q < N; ++q)
      M(p, q) = R(pairs[p].first, pairs[p].second, pairs[q].first, pairs[q].second);
  M = 0.5 * (M + M.transpose()).eval();  // symmetrize truncation round-off
  return M;
}

inline double min_curvature_operator_eig(const MetricField& g, const GridField& riem) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < g.grid().node_count(); ++id) {
    Eigen::MatrixXd M = curvature_operator(g, riem, id);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  return worst;
}

inline double min_scalar_curvature(const MetricField& g, const GridField& riem) {
  GridField sc = scalar_curvature(g, ricci_tensor(g, riem));
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < g.grid().node_count(); ++id) worst = std::min(worst, sc.at(id, 0));
  return worst;
}

// ---- isotropic curvature margins ----------------------------------------------
//
// For an orthonormal 4-frame (e1..e4) and weights lam, mu the functional
//   F = R(e1,e3,e1,e3) + lam^2 R(e1,e4,e1,e4) + mu^2 R(e2,e3,e2,e3)
//       + lam^2 mu^2 R(e2,e4,e2,e4) - 2 lam mu R(e1,e2,e3,e4)
// equals the complex sectional curvature R(z,w,zbar,wbar) of the plane
// spanned by z = e1 + i mu e2, w = e3 + i lam e4.  The cones differ only in
// the weight box: PIC pins lam = mu = 1 (isotropic planes), PIC1 frees lam in
// [0,1], PIC2 frees both.  The margin is the minimum over frames and weights.

enum class ConeVariant { pic, pic1, pic2 };

struct PicParams {
  int starts = 32;
  int max_iter = 500;
  double grad_tol = 1e-9;
  std::uint64_t seed = 2026;
};

struct PicResult {
  double margin = 0.0;
  Eigen::MatrixXd frame;  // n x 4 minimizing frame, columns e1..e4
  double lambda = 1.0;
  double mu = 1.0;
  std::size_t node = 0;
};

// Contract three slots of R (orthonormal components) with a,b,c in slot order,
// leaving `free_slot` open.
inline void riemann_contract3(const double* R, int n, int free_slot, const double* a,
                              const double* b, const double* c, double* out) {
  const double* v[4];
  {
    const double* src[3] = {a, b, c};
    int t = 0;
    for (int s = 0; s < 4; ++s) v[s] = (s == free_slot) ? nullptr : src[t++];
  }
  std::fill(out, out + n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const int id[4] = {i, j, k, l};
          double prod = R[((i * n + j) * n + k) * n + l];
          for (int s = 0; s < 4; ++s)
            if (s != free_slot) prod *= v[s][id[s]];
          out[id[free_slot]] += prod;
        }
}

struct PicEntries {
  double a13, a14, a23, a24, c;
};

inline PicEntries pic_entries(const double* R, int n, const Eigen::MatrixXd& E) {
  auto quad = [&](int p, int q, int r, int s) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            acc += R[((i * n + j) * n + k) * n + l] * E(i, p) * E(j, q) * E(k, r) * E(l, s);
    return acc;
  };
  return {quad(0, 2, 0, 2), quad(0, 3, 0, 3), quad(1, 2, 1, 2), quad(1, 3, 1, 3),
          quad(0, 1, 2, 3)};
}

inline double pic_value(const PicEntries& e, double lam, double mu) {
  return e.a13 + lam * lam * e.a14 + mu * mu * e.a23 + lam * lam * mu * mu * e.a24 -
         2.0 * lam * mu * e.c;
}

// Global minimization of the weights over their box for a fixed frame.  Each
// coordinate sees a one-dimensional quadratic, minimized exactly; PIC2 seeds
// the alternating sweeps from a dense grid because pure coordinate descent
// can stall on a coordinatewise-stationary saddle of the coupled quartic.
inline void pic_weight_step(const PicEntries& en, ConeVariant v, double& lam, double& mu) {
  if (v == ConeVariant::pic) {
    lam = mu = 1.0;
    return;
  }
  auto min_box = [](double alpha, double beta) {
    // argmin over t in [0,1] of alpha t^2 - 2 beta t
    if (alpha > 0.0) return std::clamp(beta / alpha, 0.0, 1.0);
    return (alpha - 2.0 * beta < 0.0) ? 1.0 : 0.0;
  };
  if (v == ConeVariant::pic1) {
    mu = 1.0;
    lam = min_box(en.a14 + en.a24, en.c);
    return;
  }
  double best = pic_value(en, lam, mu);
  for (int a = 0; a <= 20; ++a)
    for (int b = 0; b <= 20; ++b) {
      const double val = pic_value(en, a / 20.0, b / 20.0);
      if (val < best) {
        best = val;
        lam = a / 20.0;
        mu = b / 20.0;
      }
    }
  for (int s = 0; s < 8; ++s) {
    lam = min_box(en.a14 + mu * mu * en.a24, mu * en.c);
    mu = min_box(en.a23 + lam * lam * en.a24, lam * en.c);
  }
  if (pic_value(en, lam, mu) > best) {  // polish must not climb back up
    // re-derive the grid argmin if alternation diverged from it
    double gl = lam, gm = mu;
    for (int a = 0; a <= 20; ++a)
      for (int b = 0; b <= 20; ++b)
        if (pic_value(en, a / 20.0, b / 20.0) <= best) {
          gl = a / 20.0;
          gm = b / 20.0;
        }
    lam = gl;
    mu = gm;
  }
}

inline Eigen::MatrixXd pic_gradient(const double* R, int n, const Eigen::MatrixXd& E,
                                    double lam, double mu) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, 4);
  std::vector<double> buf(n);
  const double* e1 = E.col(0).data();
  const double* e2 = E.col(1).data();
  const double* e3 = E.col(2).data();
  const double* e4 = E.col(3).data();
  auto add = [&](int col, double w, int free_slot, const double* a, const double* b,
                 const double* c) {
    riemann_contract3(R, n, free_slot, a, b, c, buf.data());
    for (int i = 0; i < n; ++i) G(i, col) += w * buf[i];
  };
  // d/du R(u,v,u,v) = 2 R(.,v,u,v) by pair symmetry, d/dv = 2 R(u,.,u,v)
  add(0, 2.0, 0, e3, e1, e3);
  add(2, 2.0, 1, e1, e1, e3);
  add(0, 2.0 * lam * lam, 0, e4, e1, e4);
  add(3, 2.0 * lam * lam, 1, e1, e1, e4);
  add(1, 2.0 * mu * mu, 0, e3, e2, e3);
  add(2, 2.0 * mu * mu, 1, e2, e2, e3);
  add(1, 2.0 * lam * lam * mu * mu, 0, e4, e2, e4);
  add(3, 2.0 * lam * lam * mu * mu, 1, e2, e2, e4);
  add(0, -2.0 * lam * mu, 0, e2, e3, e4);
  add(1, -2.0 * lam * mu, 1, e1, e3, e4);
  add(2, -2.0 * lam * mu, 2, e1, e2, e4);
  add(3, -2.0 * lam * mu, 3, e1, e2, e3);
  return G;
}

// One descent run: Cayley rotation steps on the Stiefel manifold
// (E <- (I + eta/2 W)^{-1} (I - eta/2 W) E with W = G E^T - E G^T, which
// preserves orthonormality exactly), weights re-minimized after every move.
inline PicResult pic_descent_run(const double* R, int n, ConeVariant variant,
                                 Eigen::MatrixXd E, double lam, double mu,
                                 const PicParams& pp) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < pp.max_iter; ++it) {
    PicEntries en = pic_entries(R, n, E);
    pic_weight_step(en, variant, lam, mu);
    const double f0 = pic_value(en, lam, mu);
    const Eigen::MatrixXd G = pic_gradient(R, n, E, lam, mu);
    const Eigen::MatrixXd W = G * E.transpose() - E * G.transpose();
    const Eigen::MatrixXd M = G.transpose() * E;
    const double slope = G.squaredNorm() - (M * M).trace();  // <G, W E> >= 0
    if (std::sqrt(std::max(slope, 0.0)) < pp.grad_tol) break;
    double eta = 1.0 / (1.0 + W.norm());
    bool moved = false;
    for (int bt = 0; bt < 40 && !moved; ++bt) {
      const Eigen::MatrixXd Et =
          (I + 0.5 * eta * W).partialPivLu().solve((I - 0.5 * eta * W) * E);
      PicEntries ent = pic_entries(R, n, Et);
      double lt = lam, mt = mu;
      pic_weight_step(ent, variant, lt, mt);
      if (pic_value(ent, lt, mt) <= f0 - 1e-4 * eta * slope) {
        E = Et;
        lam = lt;
        mu = mt;
        moved = true;
      }
      eta *= 0.5;
    }
    if (!moved) break;
  }
  PicEntries en = pic_entries(R, n, E);
  pic_weight_step(en, variant, lam, mu);
  PicResult r;
  r.margin = pic_value(en, lam, mu);
  r.frame = std::move(E);
  r.lambda = lam;
  r.mu = mu;
  return r;
}

// Minimize F over orthonormal 4-frames (and the variant's weight box) for one
// algebraic tensor given in orthonormal components.  Multi-start descent; on
// top of the random and coordinate-frame starts, each relaxed variant is
// seeded with the minimizer of the previous cone in the nesting.  When a
// weight sits at zero the frame gradient carries no information about the
// corresponding column, so greedy weight descent alone can stall in a corner
// basin; the continuation starts remove that failure mode and make the
// computed margins nested by construction.
inline PicResult pic_margin_tensor(const std::vector<double>& R, int n, ConeVariant variant,
                                   const PicParams& pp = {}) {
  if (n < 4) throw ConfigError("pic_margin: dimension must be >= 4");
  if (static_cast<int>(R.size()) != n * n * n * n)
    throw ConfigError("pic_margin: tensor component count does not match dimension");
  Rng rng(pp.seed);
  PicResult best;
  best.margin = std::numeric_limits<double>::infinity();
  // coordinate-frame starts re-pairing the wedge roles, then random frames
  static const int kPerms[6][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                                   {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
  for (int s = 0; s < pp.starts; ++s) {
    Eigen::MatrixXd E(n, 4);
    if (s < 6) {
      E.setZero();
      for (int c = 0; c < 4; ++c) E(kPerms[s][c], c) = 1.0;
    } else {
      Eigen::MatrixXd A(n, 4);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c) A(i, c) = rng.normal();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
      E = qr.householderQ() * Eigen::MatrixXd::Identity(n, 4);
    }
    PicResult r = pic_descent_run(R.data(), n, variant, std::move(E), 1.0, 1.0, pp);
    if (r.margin < best.margin) best = r;
  }
  if (variant != ConeVariant::pic) {
    const ConeVariant prev =
        (variant == ConeVariant::pic2) ? ConeVariant::pic1 : ConeVariant::pic;
    PicResult warm = pic_margin_tensor(R, n, prev, pp);
    PicResult r = pic_descent_run(R.data(), n, variant, std::move(warm.frame), warm.lambda,
                                  warm.mu, pp);
    if (r.margin < best.margin) best = r;
  }
  return best;
}

inline PicResult pic_margin(const MetricField& g, const GridField& riem, ConeVariant variant,
                            const PicParams& pp = {}) {
  const int n = g.dim();
  if (n < 4) throw ConfigError("pic_margin: dimension must be >= 4");
  PicResult best;
  best.margin = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < g.grid().node_count(); ++id) {
    PicParams node_pp = pp;
    node_pp.seed = pp.seed ^ (0x9e3779b97f4a7c15ULL * (id + 1));
    PicResult r = pic_margin_tensor(riemann_in_frame(g, riem, id), n, variant, node_pp);
    if (r.margin < best.margin) {
      best = r;
      best.node = id;
    }
  }
  return best;
}

// ---- boundary second fundamental form ----------------------------------------

// A(u,v) = <nabla_u v, nu> with nu the unit normal pointing INTO the half
// manifold; with this sign a round cap with increasing warp is convex.  On an
// adapted slice (g_{0a} = 0) this reduces to -+ (2 sqrt(g_00))^{-1} d_0 g_ab,
// evaluated one-sided from inside the domain.
struct BoundaryForm {
  std::vector<std::array<double, (kMaxDim - 1) * (kMaxDim - 1)>> A;  // per slice node
  std::vector<double> H;                                             // mean curvature
  double sup_A = 0.0;    // max operator norm of A over the slice
  double H_min = 0.0;
  double lambda_min = 0.0;  // smallest principal curvature over the slice
  double two_min = 0.0;     // smallest sum of two principal curvatures
  bool convex = false, two_convex = false, mean_convex = false;
};

// `end` = 0 (slice x=0, inward +x) or 1 (slice x=extent, inward -x).
inline BoundaryForm boundary_form(const MetricField& g, int end, double class_tol = 1e-8) {
  const GridSpec& gr = g.grid();
  const int n = gr.dim();
  if (gr.axis(0).is_periodic())
    throw ConfigError("boundary_form: axis 0 must be an interval axis");
  if (n < 2) throw ConfigError("boundary_form: needs tangential directions");
  const int N0 = gr.axis(0).nodes;
  const double h = gr.spacing(0);
  const int i0 = (end == 0) ? 0 : N0 - 1;
  const int dir = (end == 0) ? 1 : -1;       // into the domain
  const double orient = (end == 0) ? -1.0 : 1.0;  // sign of -+ d_0 g_ab

  BoundaryForm bf;
  bf.H_min = std::numeric_limits<double>::infinity();
  bf.lambda_min = std::numeric_limits<double>::infinity();
  bf.two_min = std::numeric_limits<double>::infinity();

  // iterate over the slice (axes 1..n-1)
  int idx[kMaxDim] = {0};
  idx[0] = i0;
  const std::size_t slice_count = gr.node_count() / static_cast<std::size_t>(N0);
  std::vector<int> tail(n - 1, 0);
  for (std::size_t s = 0; s < slice_count; ++s) {
    for (int a = 1; a < n; ++a) idx[a] = tail[a - 1];
    const std::size_t id = gr.node_id(idx);
    const std::size_t id1 = (end == 0) ? id + gr.stride(0) : id - gr.stride(0);
    const std::size_t id2 = (end == 0) ? id + 2 * gr.stride(0) : id - 2 * gr.stride(0);

    const double g00 = g.val(id, 0, 0);
    Eigen::MatrixXd A(n - 1, n - 1), Gi(n - 1, n - 1);
    for (int a = 1; a < n; ++a)
      for (int b = 1; b < n; ++b) {
        // one-sided second-order derivative from inside the half domain
        const double f0 = g.val(id, a, b);
        const double f1 = g.val(id1, a, b);
        const double f2 = g.val(id2, a, b);
        const double d0 = dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
        A(a - 1, b - 1) = orient * d0 / (2.0 * std::sqrt(g00));
        Gi(a - 1, b - 1) = g.val(id, a, b);
      }
    A = 0.5 * (A + A.transpose()).eval();

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Gi);
    const auto& ev = es.eigenvalues();
    double Hval = 0.0;
    for (int k = 0; k < n - 1; ++k) Hval += ev[k];
    bf.H.push_back(Hval);
    bf.H_min = std::min(bf.H_min, Hval);
    bf.lambda_min = std::min(bf.lambda_min, ev.minCoeff());
    if (n - 1 >= 2) bf.two_min = std::min(bf.two_min, ev[0] + ev[1]);
    double opn = 0.0;
    for (int k = 0; k < n - 1; ++k) opn = std::max(opn, std::abs(ev[k]));
    bf.sup_A = std::max(bf.sup_A, opn);

    std::array<double, (kMaxDim - 1) * (kMaxDim - 1)> Arow{};
    for (int a = 0; a < n - 1; ++a)
      for (int b = 0; b < n - 1; ++b) Arow[a * (kMaxDim - 1) + b] = A(a, b);
    bf.A.push_back(Arow);

    for (int a = n - 2; a >= 0; --a) {
      if (++tail[a] < gr.axis(a + 1).nodes) break;
      tail[a] = 0;
    }
  }
  bf.convex = bf.lambda_min >= -class_tol;
  bf.two_convex = (n - 1 >= 2) ? bf.two_min >= -class_tol : bf.convex;
  bf.mean_convex = bf.H_min >= -class_tol;
  return bf;
}

}  // namespace ricci
