#pragma once

// Discrete proxies for the time-weighted parabolic Hoelder framework:
// space-time Hoelder seminorm estimation on trajectories, dyadic-scale
// weighted norm reports, and the X-norm used by the contraction experiment.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ricciflow/errors.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/tensorfield.hpp"

namespace ricci {

// Deterministic subsampling of trajectory points for pair loops.  Strides are
// derived from the caps, so a given trajectory always produces the same pairs.
struct SamplePlan {
  int max_space_points = 512;
  int max_time_points = 17;
};

namespace detail {

// coordinate distance with wrap on periodic axes
inline double chart_distance(const GridSpec& g, const int* ia, const int* ib) {
  double s = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    double d = std::abs(g.x(a, ia[a]) - g.x(a, ib[a]));
    if (g.axis(a).is_periodic()) d = std::min(d, g.axis(a).extent - d);
    s += d * d;
  }
  return std::sqrt(s);
}

inline std::vector<std::size_t> space_samples(const GridSpec& g, int cap) {
  const std::size_t nn = g.node_count();
  const std::size_t stride = std::max<std::size_t>(1, (nn + cap - 1) / cap);
  std::vector<std::size_t> out;
  for (std::size_t id = 0; id < nn; id += stride) out.push_back(id);
  return out;
}

inline std::vector<int> time_samples(int nsteps, int cap) {
  const int stride = std::max(1, (nsteps + cap - 1) / cap);
  std::vector<int> out;
  for (int k = 0; k < nsteps; k += stride) out.push_back(k);
  if (out.empty() || out.back() != nsteps - 1) out.push_back(nsteps - 1);
  return out;
}

}  // namespace detail

// [eta]_{alpha, alpha/2}: max over sampled space-time pairs of
// |eta(x,t)-eta(y,s)| / (d(x,y)^alpha + |t-s|^{alpha/2}).  Pairs closer than
// two grid spacings are excluded (they would only measure stencil noise);
// same-node pairs at different times are kept.
inline double holder_seminorm(const std::vector<double>& times,
                              const std::vector<const GridField*>& fields, double alpha,
                              const SamplePlan& plan = {}) {
  if (fields.empty()) return 0.0;
  const GridSpec& g = fields[0]->grid();
  const int nc = fields[0]->ncomp();
  const auto sp = detail::space_samples(g, plan.max_space_points);
  const auto ts = detail::time_samples(static_cast<int>(fields.size()), plan.max_time_points);
  double hmax = 0.0;
  for (int a = 0; a < g.dim(); ++a) hmax = std::max(hmax, g.spacing(a));
  const double min_sep = 2.0 * hmax;

  std::vector<std::array<int, kMaxDim>> coords(sp.size());
  for (std::size_t p = 0; p < sp.size(); ++p) g.coords(sp[p], coords[p].data());

  double best = 0.0;
  for (std::size_t p = 0; p < sp.size(); ++p) {
    for (std::size_t q = p; q < sp.size(); ++q) {
      const double dx = detail::chart_distance(g, coords[p].data(), coords[q].data());
      if (p != q && dx < min_sep) continue;
      const double dxa = std::pow(dx, alpha);
      for (std::size_t ti = 0; ti < ts.size(); ++ti) {
        for (std::size_t si = ti; si < ts.size(); ++si) {
          if (p == q && ti == si) continue;
          const double den = dxa + std::pow(std::abs(times[ts[si]] - times[ts[ti]]), 0.5 * alpha);
          const GridField& fa = *fields[ts[ti]];
          const GridField& fb = *fields[ts[si]];
          double num = 0.0;
          for (int c = 0; c < nc; ++c)
            num = std::max(num, std::abs(fa.at(sp[p], c) - fb.at(sp[q], c)));
          // also the mirrored pairing (x,t)-(y,s) vs (y,t)-(x,s)
          double num2 = 0.0;
          for (int c = 0; c < nc; ++c)
            num2 = std::max(num2, std::abs(fa.at(sp[q], c) - fb.at(sp[p], c)));
          best = std::max(best, std::max(num, num2) / den);
        }
      }
    }
  }
  return best;
}

inline double holder_seminorm_static(const GridField& f, double alpha,
                                     const SamplePlan& plan = {}) {
  std::vector<double> t{0.0, 1.0};  // two copies, pure spatial pairs dominate
  std::vector<const GridField*> fs{&f, &f};
  return holder_seminorm(t, fs, alpha, plan);
}

// ---- weighted norm report ----------------------------------------------------

struct WeightedNormParams {
  int k = 1;            // derivative orders 0..k (k <= 2)
  double alpha = 0.5;   // Hoelder exponent
  double weight = 0.5;  // time weight gamma~
};

struct WeightedNormReport {
  double T = 0.0;
  double dt_min = 0.0;
  WeightedNormParams params;
  struct Entry {
    int deriv;         // derivative order i
    int level;         // dyadic level j
    double sigma;      // scale T 2^{-j}
    double sup_part;   // sigma^{w + i/2} |del^i eta|_0 over the slab
    double sem_part;   // sigma^{w + a/2 + i/2} [del^i eta]_{a,a/2} over the slab
  };
  std::vector<Entry> entries;
  double total = 0.0;  // max over all listed entries
};

// Weighted norm of a trajectory (fields at `times`, first entry may be t=0).
// Scales are sigma_j = T 2^{-j} down to the finest level with sigma/2 >= 4
// dt_min; each slab [sigma/2, sigma] contributes sup and seminorm entries.
inline WeightedNormReport weighted_norm(const std::vector<double>& times,
                                        const std::vector<const GridField*>& fields,
                                        const WeightedNormParams& params,
                                        const SamplePlan& plan = {}) {
  if (times.size() != fields.size() || times.size() < 3)
    throw ConfigError("weighted_norm: need a trajectory with at least 3 samples");
  if (params.k < 0 || params.k > 2) throw ConfigError("weighted_norm: k must be 0..2");
  const double T = times.back();
  double dt_min = T;
  for (std::size_t i = 1; i < times.size(); ++i) dt_min = std::min(dt_min, times[i] - times[i - 1]);
  if (!(dt_min > 0.0)) throw ConfigError("weighted_norm: times must strictly increase");
  // Dyadic depth: capped by the finest step, truncated at the first scale
  // whose slab holds fewer than two mesh points (graded meshes thin out
  // before the dt_min cap).
  const int level_cap = static_cast<int>(std::floor(std::log2(T / (8.0 * dt_min)))) + 1;

  // derivative stacks per step: i=0 the field itself, then repeated gradients
  std::vector<std::vector<GridField>> stack(params.k + 1);
  const std::size_t nsteps = fields.size();
  for (std::size_t s = 0; s < nsteps; ++s) {
    GridField base = *fields[s];
    for (int i = 1; i <= params.k; ++i) {
      base = hat_gradient(base);
      stack[i].push_back(base);
    }
  }

  WeightedNormReport rep;
  rep.T = T;
  rep.dt_min = dt_min;
  rep.params = params;
  int resolved = 0;
  for (int j = 0; j < level_cap; ++j) {
    const double sigma = T * std::pow(2.0, -j);
    std::vector<double> slab_t;
    std::vector<int> slab_idx;
    for (std::size_t s = 0; s < nsteps; ++s)
      if (times[s] >= 0.5 * sigma * (1.0 - 1e-12) && times[s] <= sigma * (1.0 + 1e-12)) {
        slab_t.push_back(times[s]);
        slab_idx.push_back(static_cast<int>(s));
      }
    if (slab_idx.size() < 2) break;
    ++resolved;
    for (int i = 0; i <= params.k; ++i) {
      std::vector<const GridField*> slab_fields;
      for (int s : slab_idx)
        slab_fields.push_back(i == 0 ? fields[s] : &stack[i][static_cast<std::size_t>(s)]);
      double sup = 0.0;
      for (const GridField* f : slab_fields) sup = std::max(sup, max_abs(*f));
      const double sem = holder_seminorm(slab_t, slab_fields, params.alpha, plan);
      WeightedNormReport::Entry e;
      e.deriv = i;
      e.level = j;
      e.sigma = sigma;
      e.sup_part = std::pow(sigma, params.weight + 0.5 * i) * sup;
      e.sem_part = std::pow(sigma, params.weight + 0.5 * params.alpha + 0.5 * i) * sem;
      rep.entries.push_back(e);
      rep.total = std::max(rep.total, std::max(e.sup_part, e.sem_part));
    }
  }
  if (resolved < 2)
    throw ConfigError("weighted_norm: fewer than 2 dyadic levels resolvable; refine the "
                      "time mesh or shorten the window");
  return rep;
}

// ---- product and X-norm -------------------------------------------------------

// Natural bilinear pairing of two (0,2) fields through the flat reference
// metric: (eta * zeta)_{ij} = eta_{ik} delta^{kl} zeta_{lj}.
inline GridField star_product(const GridField& eta, const GridField& zeta) {
  const GridSpec& g = eta.grid();
  const int n = g.dim();
  if (eta.ncomp() != n * n || zeta.ncomp() != n * n)
    throw ConfigError("star_product expects (0,2) fields");
  GridField out(g, n * n);
  out.set_tensor_parity(2);
  for (std::size_t id = 0; id < g.node_count(); ++id)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += eta.at(id, i * n + k) * zeta.at(id, k * n + j);
        out.at(id, i * n + j) = s;
      }
  return out;
}

// Frozen constant for the discrete product inequality
//   ||eta*zeta||_{gamma+delta} <= K ||eta||_gamma ||zeta||_delta .
// Calibrated once over randomized trajectories (40 draws spanning k in {1,2},
// amplitudes to 3, weights to 0.6; worst observed ratio 0.61) and frozen with
// a ~5x margin; the test suite re-measures on fresh seeds against this value.
constexpr double kStarProductK = 3.0;

struct XNormSpec {
  int k = 2;
  double alpha = 0.75;  // Hoelder exponent of the unweighted part
  double gamma = 0.5;   // Hoelder exponent of the weighted gradient part
};

// || eta ||_{alpha,alpha/2; [0,T]} + || del eta ||_{C^{k-1,gamma}_{1/2-alpha/2}}
inline double x_norm(const std::vector<double>& times,
                     const std::vector<const GridField*>& fields, const XNormSpec& spec,
                     const SamplePlan& plan = {}) {
  double sup = 0.0;
  for (const GridField* f : fields) sup = std::max(sup, max_abs(*f));
  const double sem = holder_seminorm(times, fields, spec.alpha, plan);

  std::vector<GridField> grads;
  grads.reserve(fields.size());
  for (const GridField* f : fields) grads.push_back(hat_gradient(*f));
  std::vector<const GridField*> gptrs;
  for (auto& gf : grads) gptrs.push_back(&gf);
  WeightedNormParams wp;
  wp.k = spec.k - 1;
  wp.alpha = spec.gamma;
  wp.weight = 0.5 - 0.5 * spec.alpha;
  // the weighted part runs over (0,T]: a t=0 sample never lands in a dyadic
  // slab, so rough initial data only enters through the unweighted terms
  const WeightedNormReport rep = weighted_norm(times, gptrs, wp, plan);
  return sup + sem + rep.total;
}

}  // namespace ricci
