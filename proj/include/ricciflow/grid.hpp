#pragma once

// Structured uniform grids on coordinate boxes: periodic (torus) axes and
// mirror/polar interval axes with parity-aware ghost values, centered finite
// differences (2nd order, optional 4th), and cubic Lagrange interpolation.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ricciflow/errors.hpp"

namespace ricci {

constexpr int kMaxDim = 4;

enum class Topology {
  periodic,             // wraps around, nodes x_i = i*h, h = extent/nodes
  reflect_even,         // mirror interval, every component even at both ends
  reflect_odd_capable,  // mirror interval, per-component parity allowed
  polar,                // interval ending on rotation axes (rotsym charts)
};

inline const char* topology_name(Topology t) {
  switch (t) {
    case Topology::periodic: return "periodic";
    case Topology::reflect_even: return "reflect_even";
    case Topology::reflect_odd_capable: return "reflect_odd_capable";
    case Topology::polar: return "polar";
  }
  return "?";
}

inline Topology topology_from_name(const std::string& s) {
  if (s == "periodic") return Topology::periodic;
  if (s == "reflect_even") return Topology::reflect_even;
  if (s == "reflect_odd_capable") return Topology::reflect_odd_capable;
  if (s == "polar") return Topology::polar;
  throw ConfigError("unknown axis topology '" + s + "'");
}

struct AxisSpec {
  Topology topo = Topology::periodic;
  double extent = 0.0;
  int nodes = 0;

  bool is_periodic() const { return topo == Topology::periodic; }
  // Interval axes carry nodes on both ends, periodic axes drop the duplicate.
  double spacing() const {
    return is_periodic() ? extent / nodes : extent / (nodes - 1);
  }
};

// Neighbor lookup result: target coordinate along the axis plus whether the
// path crossed a mirror (callers negate odd components in that case).
struct Nbr {
  int j;
  bool reflected;
};

class GridSpec {
 public:
  GridSpec() = default;
  explicit GridSpec(std::vector<AxisSpec> axes) : axes_(std::move(axes)) {
    validate();
    strides_.assign(dim(), 1);
    for (int a = dim() - 2; a >= 0; --a)
      strides_[a] = strides_[a + 1] * static_cast<std::size_t>(axes_[a + 1].nodes);
    nnodes_ = strides_[0] * static_cast<std::size_t>(axes_[0].nodes);
  }

  int dim() const { return static_cast<int>(axes_.size()); }
  const AxisSpec& axis(int a) const { return axes_[a]; }
  const std::vector<AxisSpec>& axes() const { return axes_; }
  std::size_t node_count() const { return nnodes_; }
  std::size_t stride(int a) const { return strides_[a]; }
  double spacing(int a) const { return axes_[a].spacing(); }
  double x(int a, int i) const { return axes_[a].spacing() * i; }

  bool all_periodic() const {
    for (const auto& ax : axes_)
      if (!ax.is_periodic()) return false;
    return true;
  }

  void coords(std::size_t id, int* idx) const {
    for (int a = 0; a < dim(); ++a) {
      idx[a] = static_cast<int>(id / strides_[a]);
      id -= static_cast<std::size_t>(idx[a]) * strides_[a];
    }
  }

  std::size_t node_id(const int* idx) const {
    std::size_t id = 0;
    for (int a = 0; a < dim(); ++a) id += static_cast<std::size_t>(idx[a]) * strides_[a];
    return id;
  }

  // Advance a coordinate tuple in node-id order; returns false after the last.
  bool next(int* idx) const {
    for (int a = dim() - 1; a >= 0; --a) {
      if (++idx[a] < axes_[a].nodes) return true;
      idx[a] = 0;
    }
    return false;
  }

  // Resolve i+off along an axis.  |off| must stay below nodes-1, which the
  // >=8 node floor guarantees for the stencils used here.
  Nbr nbr(int a, int i, int off) const {
    const int n = axes_[a].nodes;
    int j = i + off;
    if (axes_[a].is_periodic()) {
      if (j < 0) j += n;
      else if (j >= n) j -= n;
      return {j, false};
    }
    if (j < 0) return {-j, true};
    if (j > n - 1) return {2 * (n - 1) - j, true};
    return {j, false};
  }

  bool same_shape(const GridSpec& o) const {
    if (dim() != o.dim()) return false;
    for (int a = 0; a < dim(); ++a)
      if (axes_[a].topo != o.axes_[a].topo || axes_[a].nodes != o.axes_[a].nodes ||
          axes_[a].extent != o.axes_[a].extent)
        return false;
    return true;
  }

 private:
  void validate() const {
    if (axes_.empty() || dim() > kMaxDim)
      throw ConfigError("grid dimension must be between 1 and 4");
    for (int a = 0; a < dim(); ++a) {
      if (axes_[a].nodes < 8)
        throw ConfigError("axis " + std::to_string(a) + " needs at least 8 nodes");
      if (!(axes_[a].extent > 0.0))
        throw ConfigError("axis " + std::to_string(a) + " extent must be positive");
      if (a > 0 && !axes_[a].is_periodic())
        throw ConfigError("only axis 0 may be non-periodic");
    }
  }

  std::vector<AxisSpec> axes_;
  std::vector<std::size_t> strides_;
  std::size_t nnodes_ = 0;
};

inline GridSpec make_torus(int dim, double extent, int nodes) {
  std::vector<AxisSpec> ax(dim, AxisSpec{Topology::periodic, extent, nodes});
  return GridSpec(ax);
}

// Values on grid nodes, `ncomp` components per node, component index fastest.
// Each (component, axis) pair carries a reflection parity used to build ghost
// values across mirror/polar ends; periodic axes ignore it.
// Fields hold a pointer to their grid: the GridSpec must outlive the field.
class GridField {
 public:
  GridField() = default;
  GridField(const GridSpec& g, int ncomp, double fill = 0.0)
      : grid_(&g),
        ncomp_(ncomp),
        data_(g.node_count() * static_cast<std::size_t>(ncomp), fill),
        parity_(static_cast<std::size_t>(ncomp) * g.dim(), 1) {}

  const GridSpec& grid() const { return *grid_; }
  int ncomp() const { return ncomp_; }
  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at(std::size_t node, int c) { return data_[node * ncomp_ + c]; }
  double at(std::size_t node, int c) const { return data_[node * ncomp_ + c]; }

  int8_t parity(int c, int a) const { return parity_[static_cast<std::size_t>(c) * grid_->dim() + a]; }
  // Note: reflect_even axes restrict the *data* fields users attach (checked
  // where metrics are built/doubled); derived fields such as derivatives of
  // even profiles are odd and legal.
  void set_parity(int c, int a, int8_t p) {
    parity_[static_cast<std::size_t>(c) * grid_->dim() + a] = p;
  }
  const std::vector<int8_t>& parity_table() const { return parity_; }
  void copy_parity_from(const GridField& o) { parity_ = o.parity_; }

  // Parity of a rank-`rank` tensor component under reflection of `axis`:
  // every slot whose index equals the reflected axis flips the sign.
  void set_tensor_parity(int rank) {
    const int n = grid_->dim();
    for (int c = 0; c < ncomp_; ++c) {
      int digits[8] = {0};
      int v = c;
      for (int s = rank - 1; s >= 0; --s) {
        digits[s] = v % n;
        v /= n;
      }
      for (int a = 0; a < n; ++a) {
        if (grid_->axis(a).is_periodic()) continue;
        int cnt = 0;
        for (int s = 0; s < rank; ++s) cnt += (digits[s] == a);
        set_parity(c, a, (cnt % 2 == 0) ? 1 : -1);
      }
    }
  }

  // Neighbor value along `a` at coordinate offset `off` from node `id`
  // (whose coordinate along `a` is `ia`), with the parity sign applied.
  double nbval(std::size_t id, int ia, int a, int off, int c) const {
    const Nbr nb = grid_->nbr(a, ia, off);
    const std::ptrdiff_t shift =
        static_cast<std::ptrdiff_t>(nb.j - ia) * static_cast<std::ptrdiff_t>(grid_->stride(a));
    const double v = data_[(static_cast<std::ptrdiff_t>(id) + shift) * ncomp_ + c];
    return (nb.reflected && parity(c, a) < 0) ? -v : v;
  }

  GridField like(int ncomp) const {
    GridField f(*grid_, ncomp);
    return f;
  }

  // same shape, component count, and parity, zero-filled
  GridField like() const {
    GridField f(*grid_, ncomp_);
    f.parity_ = parity_;
    return f;
  }

 private:
  const GridSpec* grid_ = nullptr;
  int ncomp_ = 0;
  std::vector<double> data_;
  std::vector<int8_t> parity_;
};

// ---- centered finite differences ------------------------------------------
// All stencils accumulate mirror-image taps as (f_+ op f_-) so that exactly
// symmetric fields stay exactly symmetric in floating point.

inline double diff1_at(const GridField& f, std::size_t id, const int* idx, int a, int c,
                       int order = 2) {
  const double h = f.grid().spacing(a);
  const double fp = f.nbval(id, idx[a], a, +1, c);
  const double fm = f.nbval(id, idx[a], a, -1, c);
  if (order == 2) return (fp - fm) / (2.0 * h);
  const double fp2 = f.nbval(id, idx[a], a, +2, c);
  const double fm2 = f.nbval(id, idx[a], a, -2, c);
  return (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * h);
}

inline double diff2_at(const GridField& f, std::size_t id, const int* idx, int a, int c,
                       int order = 2) {
  const double h = f.grid().spacing(a);
  const double f0 = f.at(id, c);
  const double fp = f.nbval(id, idx[a], a, +1, c);
  const double fm = f.nbval(id, idx[a], a, -1, c);
  if (order == 2) return ((fp + fm) - 2.0 * f0) / (h * h);
  const double fp2 = f.nbval(id, idx[a], a, +2, c);
  const double fm2 = f.nbval(id, idx[a], a, -2, c);
  return (16.0 * (fp + fm) - (fp2 + fm2) - 30.0 * f0) / (12.0 * h * h);
}

// Mixed second derivative, a != b.
inline double diff_mixed_at(const GridField& f, std::size_t id, const int* idx, int a, int b,
                            int c, int order = 2) {
  const GridSpec& g = f.grid();
  const double ha = g.spacing(a), hb = g.spacing(b);
  auto corner = [&](int oa, int ob) {
    const Nbr na = g.nbr(a, idx[a], oa);
    const Nbr nb = g.nbr(b, idx[b], ob);
    std::ptrdiff_t nid = static_cast<std::ptrdiff_t>(id);
    nid += static_cast<std::ptrdiff_t>(na.j - idx[a]) * static_cast<std::ptrdiff_t>(g.stride(a));
    nid += static_cast<std::ptrdiff_t>(nb.j - idx[b]) * static_cast<std::ptrdiff_t>(g.stride(b));
    double v = f.at(static_cast<std::size_t>(nid), c);
    if (na.reflected && f.parity(c, a) < 0) v = -v;
    if (nb.reflected && f.parity(c, b) < 0) v = -v;
    return v;
  };
  if (order == 2) {
    return ((corner(1, 1) + corner(-1, -1)) - (corner(1, -1) + corner(-1, 1))) /
           (4.0 * ha * hb);
  }
  // tensor product of two 4th-order first-derivative stencils
  const double w[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
  const int off[4] = {-2, -1, 1, 2};
  double s = 0.0;
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) s += w[p] * w[q] * corner(off[p], off[q]);
  return s / (ha * hb);
}

// Field-level wrappers.  Differentiating along a mirror axis flips the parity
// of every component on that axis (d/dx of an even profile is odd).

inline GridField diff1(const GridField& f, int a, int order = 2) {
  GridField out(f.grid(), f.ncomp());
  out.copy_parity_from(f);
  if (!f.grid().axis(a).is_periodic())
    for (int c = 0; c < f.ncomp(); ++c) out.set_parity(c, a, -f.parity(c, a));
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int c = 0; c < f.ncomp(); ++c) out.at(id, c) = diff1_at(f, id, idx, a, c, order);
    ++id;
  } while (f.grid().next(idx));
  return out;
}

inline GridField diff2(const GridField& f, int a, int order = 2) {
  GridField out(f.grid(), f.ncomp());
  out.copy_parity_from(f);
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    for (int c = 0; c < f.ncomp(); ++c) out.at(id, c) = diff2_at(f, id, idx, a, c, order);
    ++id;
  } while (f.grid().next(idx));
  return out;
}

// ---- cubic Lagrange interpolation ------------------------------------------

namespace detail {
inline void cubic_weights(double s, double* w) {
  w[0] = -s * (s - 1.0) * (s - 2.0) / 6.0;
  w[1] = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
  w[2] = -(s + 1.0) * s * (s - 2.0) / 2.0;
  w[3] = (s + 1.0) * s * (s - 1.0) / 6.0;
}
}  // namespace detail

// Evaluate all components of `f` at an arbitrary point (folded into the
// fundamental domain; odd components pick up the mirror sign).
inline void interpolate(const GridField& f, const double* x, double* out) {
  const GridSpec& g = f.grid();
  const int dim = g.dim();
  int base[kMaxDim];
  double wts[kMaxDim][4];
  bool folded[kMaxDim];
  for (int a = 0; a < dim; ++a) {
    const AxisSpec& ax = g.axis(a);
    const double L = ax.extent;
    double u = x[a];
    folded[a] = false;
    if (ax.is_periodic()) {
      u -= L * std::floor(u / L);
      if (u >= L) u = 0.0;  // guard against floor round-off at the seam
    } else {
      u = std::fmod(u, 2.0 * L);
      if (u < 0.0) u += 2.0 * L;
      if (u > L) {
        u = 2.0 * L - u;
        folded[a] = true;
      }
    }
    const double t = u / ax.spacing();
    int i0 = static_cast<int>(std::floor(t));
    if (i0 > ax.nodes - 1) i0 = ax.nodes - 1;
    base[a] = i0;
    detail::cubic_weights(t - i0, wts[a]);
  }

  const int ntap = 1 << (2 * dim);  // 4^dim
  for (int c = 0; c < f.ncomp(); ++c) {
    double acc = 0.0;
    for (int tap = 0; tap < ntap; ++tap) {
      double w = 1.0;
      double sgn = 1.0;
      std::ptrdiff_t id = 0;
      int tt = tap;
      for (int a = 0; a < dim; ++a) {
        const int k = tt & 3;
        tt >>= 2;
        w *= wts[a][k];
        const Nbr nb = g.nbr(a, base[a], k - 1);
        if ((nb.reflected != folded[a]) && f.parity(c, a) < 0) sgn = -sgn;
        id += static_cast<std::ptrdiff_t>(nb.j) * static_cast<std::ptrdiff_t>(g.stride(a));
      }
      acc += w * sgn * f.at(static_cast<std::size_t>(id), c);
    }
    out[c] = acc;
  }
}

inline double max_abs(const GridField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f.data()[i]));
  return m;
}

inline double max_abs_diff(const GridField& f, const GridField& g) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f.data()[i] - g.data()[i]));
  return m;
}

}  // namespace ricci
