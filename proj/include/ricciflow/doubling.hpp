#pragma once

// Doubling a metric across the two ends of its interval axis.  A half grid
// has axis 0 = [0, L] with mirror ends; the double is a torus of extent 2L
// whose Z2 reflection x -> -x fixes the two interface slices.  Metrics double
// by even reflection of the tangential/normal blocks and odd reflection of
// the mixed g_{0a} components, which must therefore vanish on the interfaces.
//
// All stencils in this library group mirror-image operands symmetrically, so
// a flow started from an exactly symmetric doubled metric stays exactly
// symmetric in floating point; symmetry_residual measures this.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>

#include "ricciflow/curvature.hpp"
#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

inline GridSpec doubled_grid(const GridSpec& half) {
  if (half.axis(0).is_periodic())
    throw ConfigError("doubling: axis 0 of the half grid must be an interval");
  std::vector<AxisSpec> axes;
  for (int a = 0; a < half.dim(); ++a) axes.push_back(half.axis(a));
  axes[0] = AxisSpec{Topology::periodic, 2.0 * half.axis(0).extent,
                     2 * (half.axis(0).nodes - 1)};
  return GridSpec(axes);
}

inline GridSpec restricted_grid(const GridSpec& full) {
  if (!full.axis(0).is_periodic() || full.axis(0).nodes % 2 != 0)
    throw ConfigError("restriction: axis 0 must be periodic with an even node count");
  std::vector<AxisSpec> axes;
  for (int a = 0; a < full.dim(); ++a) axes.push_back(full.axis(a));
  axes[0] = AxisSpec{Topology::reflect_even, 0.5 * full.axis(0).extent,
                     full.axis(0).nodes / 2 + 1};
  return GridSpec(axes);
}

// Mirror-extend `half` onto the doubled torus `full` (which the caller owns
// and which must equal doubled_grid(half.grid())).  The mixed components
// g_{0a} are odd under the reflection and must vanish on both interface
// slices to `interface_tol`; they are then zeroed there so the double is
// exactly symmetric.
inline MetricField double_metric(const MetricField& half, const GridSpec& full,
                                 double interface_tol = 1e-10) {
  const GridSpec& hg = half.grid();
  {
    const GridSpec want = doubled_grid(hg);
    bool ok = want.dim() == full.dim();
    for (int a = 0; ok && a < want.dim(); ++a)
      ok = want.axis(a).topo == full.axis(a).topo &&
           want.axis(a).nodes == full.axis(a).nodes &&
           std::abs(want.axis(a).extent - full.axis(a).extent) < 1e-14;
    if (!ok) throw ConfigError("double_metric: full grid does not match doubled half grid");
  }
  const int n = hg.dim();
  const int N = hg.axis(0).nodes;

  // interface check on the odd components
  double worst = 0.0;
  int idx[kMaxDim] = {0};
  do {
    if (idx[0] != 0 && idx[0] != N - 1) continue;
    const std::size_t id = hg.node_id(idx);
    for (int a = 1; a < n; ++a) worst = std::max(worst, std::abs(half.val(id, 0, a)));
  } while (hg.next(idx));
  if (worst > interface_tol) {
    std::ostringstream os;
    os << "double_metric: mixed components g_{0a} reach " << worst
       << " on the interface slices; the metric does not double smoothly";
    throw NumericsError(os.str());
  }

  MetricField out(full);
  const std::size_t tail = hg.node_count() / static_cast<std::size_t>(N);
  const int M = full.axis(0).nodes;  // = 2 (N - 1)
  for (int j = 0; j < M; ++j) {
    const int src = (j < N) ? j : 2 * (N - 1) - j;
    const bool mirrored = j >= N;
    for (std::size_t s = 0; s < tail; ++s) {
      const std::size_t idh = static_cast<std::size_t>(src) * hg.stride(0) + s;
      const std::size_t idf = static_cast<std::size_t>(j) * full.stride(0) + s;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k <= i; ++k) {
          double v = half.val(idh, i, k);
          const bool odd = (i == 0) != (k == 0);
          if (odd && (src == 0 || src == N - 1)) v = 0.0;
          if (odd && mirrored) v = -v;
          out.set(idf, i, k, v);
        }
    }
  }
  return out;
}

// Copy the fundamental domain [0, L] back onto the half grid.
inline MetricField restrict_metric(const MetricField& full, const GridSpec& half) {
  const GridSpec& fg = full.grid();
  {
    const GridSpec want = restricted_grid(fg);
    bool ok = want.dim() == half.dim();
    for (int a = 0; ok && a < want.dim(); ++a)
      ok = want.axis(a).nodes == half.axis(a).nodes &&
           std::abs(want.axis(a).extent - half.axis(a).extent) < 1e-14;
    if (!ok) throw ConfigError("restrict_metric: half grid does not match restricted full grid");
  }
  const int n = fg.dim();
  const int N = half.axis(0).nodes;
  MetricField out(half);
  const std::size_t tail = fg.node_count() / static_cast<std::size_t>(fg.axis(0).nodes);
  for (int j = 0; j < N; ++j)
    for (std::size_t s = 0; s < tail; ++s) {
      const std::size_t idf = static_cast<std::size_t>(j) * fg.stride(0) + s;
      const std::size_t idh = static_cast<std::size_t>(j) * half.stride(0) + s;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k <= i; ++k) out.set(idh, i, k, full.val(idf, i, k));
    }
  return out;
}

// Sup over nodes and components of | g - (reflection pullback of g) | on a
// doubled torus; exactly zero for a metric that is symmetric bit for bit.
inline double symmetry_residual(const MetricField& full) {
  const GridSpec& fg = full.grid();
  const int n = fg.dim();
  const int M = fg.axis(0).nodes;
  if (!fg.axis(0).is_periodic() || M % 2 != 0)
    throw ConfigError("symmetry_residual: expects a doubled torus");
  const std::size_t tail = fg.node_count() / static_cast<std::size_t>(M);
  double worst = 0.0;
  for (int j = 0; j < M; ++j) {
    const int jm = (M - j) % M;
    for (std::size_t s = 0; s < tail; ++s) {
      const std::size_t id = static_cast<std::size_t>(j) * fg.stride(0) + s;
      const std::size_t idm = static_cast<std::size_t>(jm) * fg.stride(0) + s;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k <= i; ++k) {
          const double sign = ((i == 0) != (k == 0)) ? -1.0 : 1.0;
          worst = std::max(worst, std::abs(full.val(id, i, k) - sign * full.val(idm, i, k)));
        }
    }
  }
  return worst;
}

// Second fundamental forms of the two interface slices, measured on the
// restricted half metric with inward-pointing normals.
inline std::pair<BoundaryForm, BoundaryForm> boundary_monitor(const MetricField& full,
                                                              const GridSpec& half) {
  MetricField h = restrict_metric(full, half);
  return {boundary_form(h, 0), boundary_form(h, 1)};
}

}  // namespace ricci
