#pragma once

// Tensor fields over a GridSpec: metric fields with cached inverse/Cholesky,
// orthonormal frames, flat-background covariant derivatives, and a
// parity-respecting mollifier.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"

namespace ricci {

// ---- tiny dense symmetric kernels (n <= 4), row-major ----------------------

inline bool sym_cholesky(int n, const double* g, double* L) {
  for (int i = 0; i < n * n; ++i) L[i] = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = g[j * n + j];
    for (int k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
    if (!(d > 0.0)) return false;
    const double lj = std::sqrt(d);
    L[j * n + j] = lj;
    for (int i = j + 1; i < n; ++i) {
      double s = g[i * n + j];
      for (int k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      L[i * n + j] = s / lj;
    }
  }
  return true;
}

// inverse of g = L L^T given its Cholesky factor
inline void sym_inverse_from_chol(int n, const double* L, double* inv) {
  double col[kMaxDim];
  for (int rhs = 0; rhs < n; ++rhs) {
    for (int i = 0; i < n; ++i) {
      double s = (i == rhs) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) s -= L[i * n + k] * col[k];
      col[i] = s / L[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = col[i];
      for (int k = i + 1; k < n; ++k) s -= L[k * n + i] * col[k];
      col[i] = s / L[i * n + i];
    }
    for (int i = 0; i < n; ++i) inv[i * n + rhs] = col[i];
  }
  // symmetrize round-off
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
      inv[i * n + j] = inv[j * n + i] = v;
    }
}

// F = L^{-T}: columns form a g-orthonormal frame, F^T g F = I.
inline void frame_from_chol(int n, const double* L, double* F) {
  for (int i = 0; i < n * n; ++i) F[i] = 0.0;
  for (int rhs = 0; rhs < n; ++rhs) {
    for (int i = n - 1; i >= 0; --i) {
      double s = (i == rhs) ? 1.0 : 0.0;
      for (int k = i + 1; k < n; ++k) s -= L[k * n + i] * F[k * n + rhs];
      F[i * n + rhs] = s / L[i * n + i];
    }
  }
}

// ---- metric field -----------------------------------------------------------

// Symmetric (0,2) field with lazily rebuilt per-node inverse and Cholesky
// caches.  Any mutable access invalidates the caches wholesale.
class MetricField {
 public:
  MetricField() = default;
  explicit MetricField(const GridSpec& g)
      : comp_(g, g.dim() * g.dim()), inv_(g, g.dim() * g.dim()), chol_(g, g.dim() * g.dim()) {
    comp_.set_tensor_parity(2);
    inv_.set_tensor_parity(2);
    chol_.set_tensor_parity(2);
  }

  const GridSpec& grid() const { return comp_.grid(); }
  int dim() const { return grid().dim(); }

  const GridField& components() const { return comp_; }
  GridField& mutable_components() {
    caches_valid_ = false;
    return comp_;
  }

  double val(std::size_t node, int i, int j) const { return comp_.at(node, i * dim() + j); }
  void set(std::size_t node, int i, int j, double v) {
    caches_valid_ = false;
    comp_.at(node, i * dim() + j) = v;
    comp_.at(node, j * dim() + i) = v;
  }

  void invalidate() { caches_valid_ = false; }

  const GridField& inverse() const {
    ensure_caches();
    return inv_;
  }
  const GridField& cholesky() const {
    ensure_caches();
    return chol_;
  }
  // g-orthonormal frame at a node; F row-major, columns are frame vectors.
  void frame(std::size_t node, double* F) const {
    ensure_caches();
    frame_from_chol(dim(), chol_.data() + node * static_cast<std::size_t>(dim() * dim()), F);
  }

  // max |g g^{-1} - I| over all nodes (identity check used by tests)
  double inverse_residual() const {
    ensure_caches();
    const int n = dim();
    double worst = 0.0;
    for (std::size_t id = 0; id < grid().node_count(); ++id) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += val(id, i, k) * inv_.at(id, k * n + j);
          worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    }
    return worst;
  }

 private:
  void ensure_caches() const {
    if (caches_valid_) return;
    const int n = dim();
    double L[kMaxDim * kMaxDim];
    for (std::size_t id = 0; id < grid().node_count(); ++id) {
      const double* g = comp_.data() + id * n * n;
      if (!sym_cholesky(n, g, L)) {
        int idx[kMaxDim];
        grid().coords(id, idx);
        std::ostringstream os;
        os << "metric not positive definite at node (";
        for (int a = 0; a < n; ++a) os << (a ? "," : "") << idx[a];
        os << ")";
        throw NumericsError(os.str());
      }
      std::copy(L, L + n * n, chol_.data() + id * n * n);
      sym_inverse_from_chol(n, L, inv_.data() + id * n * n);
    }
    caches_valid_ = true;
  }

  GridField comp_;
  mutable GridField inv_, chol_;
  mutable bool caches_valid_ = false;
};

inline MetricField make_flat_metric(const GridSpec& g) {
  MetricField m(g);
  const int n = g.dim();
  for (std::size_t id = 0; id < g.node_count(); ++id)
    for (int i = 0; i < n; ++i) m.set(id, i, i, 1.0);
  return m;
}

// ---- background -------------------------------------------------------------

// The evolution machinery runs on flat torus charts where the reference
// connection vanishes; the rotational reduction carries the round-sphere
// background through its own closed forms (rotsym.hpp).
struct Background {
  enum class Mode { flat_torus, round_sphere } mode = Mode::flat_torus;
  bool is_flat() const { return mode == Mode::flat_torus; }
  void require_flat(const char* where) const {
    if (!is_flat())
      throw ConfigError(std::string(where) + ": round background is only available "
                                             "through the rotational reduction");
  }
};

// ---- covariant derivatives on flat background --------------------------------

// del eta: output component layout c_out = k*ncomp + c  (k = derivative axis)
inline GridField hat_gradient(const GridField& eta, int order = 2) {
  const GridSpec& g = eta.grid();
  const int n = g.dim(), nc = eta.ncomp();
  GridField out(g, n * nc);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < nc; ++c)
      for (int a = 0; a < n; ++a) {
        int8_t p = eta.parity(c, a);
        if (!g.axis(a).is_periodic() && a == k) p = -p;
        out.set_parity(k * nc + c, a, p);
      }
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < nc; ++c) out.at(id, k * nc + c) = diff1_at(eta, id, idx, k, c, order);
    ++id;
  } while (g.next(idx));
  return out;
}

// del^2 eta: c_out = (k*n + l)*ncomp + c
inline GridField hat_hessian(const GridField& eta, int order = 2) {
  const GridSpec& g = eta.grid();
  const int n = g.dim(), nc = eta.ncomp();
  GridField out(g, n * n * nc);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int c = 0; c < nc; ++c)
        for (int a = 0; a < n; ++a) {
          int8_t p = eta.parity(c, a);
          if (!g.axis(a).is_periodic()) {
            if (k == a) p = -p;
            if (l == a) p = -p;
          }
          out.set_parity((k * n + l) * nc + c, a, p);
        }
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int k = 0; k < n; ++k)
      for (int l = 0; l <= k; ++l)
        for (int c = 0; c < nc; ++c) {
          const double v = (k == l) ? diff2_at(eta, id, idx, k, c, order)
                                    : diff_mixed_at(eta, id, idx, k, l, c, order);
          out.at(id, (k * n + l) * nc + c) = v;
          out.at(id, (l * n + k) * nc + c) = v;
        }
    ++id;
  } while (g.next(idx));
  return out;
}

// tr_w del^2 eta with w^{kl} given as an (n*n)-component field; allocation
// free, callable inside iterative solvers.
inline void trace_hessian_into(const GridField& winv, const GridField& eta, GridField& out,
                               int order = 2) {
  const GridSpec& g = eta.grid();
  const int n = g.dim(), nc = eta.ncomp();
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int c = 0; c < nc; ++c) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += winv.at(id, k * n + k) * diff2_at(eta, id, idx, k, c, order);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < k; ++l)
          s += 2.0 * winv.at(id, k * n + l) * diff_mixed_at(eta, id, idx, k, l, c, order);
      out.at(id, c) = s;
    }
    ++id;
  } while (g.next(idx));
}

inline double max_abs_gradient(const GridField& eta, int order = 2) {
  const GridSpec& g = eta.grid();
  double m = 0.0;
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int k = 0; k < g.dim(); ++k)
      for (int c = 0; c < eta.ncomp(); ++c)
        m = std::max(m, std::abs(diff1_at(eta, id, idx, k, c, order)));
    ++id;
  } while (g.next(idx));
  return m;
}

inline double max_abs_hessian(const GridField& eta, int order = 2) {
  const GridSpec& g = eta.grid();
  const int n = g.dim();
  double m = 0.0;
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int k = 0; k < n; ++k)
      for (int l = 0; l <= k; ++l)
        for (int c = 0; c < eta.ncomp(); ++c) {
          const double v = (k == l) ? diff2_at(eta, id, idx, k, c, order)
                                    : diff_mixed_at(eta, id, idx, k, l, c, order);
          m = std::max(m, std::abs(v));
        }
    ++id;
  } while (g.next(idx));
  return m;
}

// ---- mollifier ---------------------------------------------------------------

// Discrete heat smoothing to "time" eps^2/2 (Gaussian of width eps) by
// explicit sweeps.  Parity-aware ghosts make the kernel commute with the
// mirror reflections; constants are preserved exactly.
inline GridField mollify(const GridField& f, double eps) {
  const GridSpec& g = f.grid();
  const int n = g.dim(), nc = f.ncomp();
  if (!(eps >= 0.0)) throw ConfigError("mollify: smoothing scale must be >= 0");
  GridField cur = f;
  if (eps == 0.0) return cur;
  const double tau = 0.5 * eps * eps;
  double hmin = g.spacing(0);
  for (int a = 1; a < n; ++a) hmin = std::min(hmin, g.spacing(a));
  const double dt_stable = 0.2 * hmin * hmin / n;
  const int sweeps = std::max(1, static_cast<int>(std::ceil(tau / dt_stable)));
  const double dt = tau / sweeps;
  GridField nxt = cur;
  for (int s = 0; s < sweeps; ++s) {
    int idx[kMaxDim] = {0};
    std::size_t id = 0;
    do {
      for (int c = 0; c < nc; ++c) {
        double lap = 0.0;
        for (int a = 0; a < n; ++a) lap += diff2_at(cur, id, idx, a, c, 2);
        nxt.at(id, c) = cur.at(id, c) + dt * lap;
      }
      ++id;
    } while (g.next(idx));
    std::swap(cur, nxt);
  }
  return cur;
}

// Mollify a metric and certify the result is still a metric.
inline MetricField mollify_metric(const MetricField& m, double eps) {
  MetricField out(m.grid());
  out.mutable_components() = mollify(m.components(), eps);
  out.inverse();  // forces the SPD check; throws with node position otherwise
  return out;
}

}  // namespace ricci
