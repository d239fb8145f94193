#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ricciflow/curvature.hpp"
#include "ricciflow/deturck.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/rotsym.hpp"

using namespace ricci;

namespace {

const double kPi = std::acos(-1.0);

GridSpec polar_grid(int nodes) { return GridSpec({AxisSpec{Topology::polar, kPi, nodes}}); }

// warped metric from closed-form profiles
template <class Phi, class Psi>
WarpedMetric make_warped(const GridSpec& g, int n, Phi&& phi, Psi&& psi, bool hemi = false) {
  WarpedMetric wm(g, n, hemi);
  for (int i = 0; i < g.axis(0).nodes; ++i) {
    const double x = g.x(0, i);
    wm.phi.at(static_cast<std::size_t>(i), 0) = phi(x);
    wm.psi.at(static_cast<std::size_t>(i), 0) = psi(x);
  }
  return wm;
}

// spherical cap of curvature a^2 doubled about the equator: phi = sin(ax)/a
// on [0, pi/2] reflected, a < 1 so the profile has a corner at the equator.
WarpedMetric corner_cap(const GridSpec& g, int n, double a) {
  return make_warped(
      g, n,
      [a](double x) {
        const double y = x <= kPi / 2 ? x : kPi - x;
        return std::sin(a * y) / a;
      },
      [](double) { return 1.0; }, true);
}

}  // namespace

TEST_CASE("round and conical profiles reproduce the exact sectional curvatures") {
  GridSpec g = polar_grid(129);

  SECTION("unit sphere") {
    WarpedMetric wm = make_warped(g, 3, [](double x) { return std::sin(x); },
                                  [](double) { return 1.0; });
    WarpedCurvature wc = warped_curvature(wm);
    // the regularized assembly is exact on round data, axes included
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      CHECK(wc.k0.at(id, 0) == Catch::Approx(1.0).margin(1e-12));
      CHECK(wc.k1.at(id, 0) == Catch::Approx(1.0).margin(1e-12));
      CHECK(wc.scalar.at(id, 0) == Catch::Approx(6.0).margin(1e-11));
    }
  }

  SECTION("flat cone profile phi = x") {
    WarpedMetric wm = make_warped(g, 3, [](double x) { return x; },
                                  [](double) { return 1.0; });
    WarpedCurvature wc = warped_curvature(wm);
    // cone chart: valid near the x = 0 axis only (phi does not close up at
    // the far axis), so the check stays on [0, pi/2] with O(h^2) truncation
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      if (g.x(0, static_cast<int>(id)) > 0.5 * kPi) continue;
      CHECK(std::abs(wc.k0.at(id, 0)) < 6e-4);
      CHECK(std::abs(wc.k1.at(id, 0)) < 6e-4);
    }
  }

  SECTION("non-positive profiles are rejected") {
    WarpedMetric wm = make_warped(g, 3, [](double x) { return std::sin(x) - 0.5; },
                                  [](double) { return 1.0; });
    CHECK_THROWS_AS(warped_curvature(wm), NumericsError);
    WarpedMetric bad = make_warped(g, 3, [](double x) { return std::sin(x); },
                                   [](double) { return 0.0; });
    CHECK_THROWS_AS(warped_curvature(bad), NumericsError);
  }
}

TEST_CASE("warped curvature matches the tensor code on an embedded band") {
  // band chart x in [pi/4, 3pi/4] with flat T^2 fiber: diag(psi^2, phi^2, phi^2).
  // Sectional curvature of an (x, fiber) plane equals K0 of the warped metric;
  // a (fiber, fiber) plane sees -(phi'_s)^2/phi^2 = K1 - 1/phi^2 because the
  // flat fiber drops the unit-sphere contribution.
  auto phi = [](double x) { return std::sin(x) + 0.01 * std::sin(3.0 * x); };
  auto psi = [](double x) { return 1.0 + 0.05 * std::cos(2.0 * x); };

  double err_k0[2] = {0, 0}, err_k1[2] = {0, 0};
  for (int r = 0; r < 2; ++r) {
    const int N = r == 0 ? 129 : 257;  // grid spacing pi/(N-1)
    GridSpec g = polar_grid(N);
    WarpedMetric wm = make_warped(g, 3, phi, psi);
    WarpedCurvature wc = warped_curvature(wm);

    const int nb = (N - 1) / 2 + 1;  // band nodes coincide with warped nodes
    const int off = (N - 1) / 4;
    GridSpec band({AxisSpec{Topology::reflect_even, kPi / 2, nb},
                   AxisSpec{Topology::periodic, 2.0 * kPi, 8},
                   AxisSpec{Topology::periodic, 2.0 * kPi, 8}});
    MetricField gb(band);
    int idx[kMaxDim];
    for (std::size_t id = 0; id < band.node_count(); ++id) {
      band.coords(id, idx);
      const double x = kPi / 4 + band.x(0, idx[0]);
      gb.set(id, 0, 0, psi(x) * psi(x));
      gb.set(id, 1, 1, phi(x) * phi(x));
      gb.set(id, 2, 2, phi(x) * phi(x));
    }
    GridField riem = riemann(gb);
    auto R = [&](std::size_t id, int i, int j, int k, int l) {
      return riem.at(id, ((i * 3 + j) * 3 + k) * 3 + l);
    };
    for (int ib = 4; ib < nb - 4; ++ib) {
      idx[0] = ib;
      idx[1] = idx[2] = 3;
      const std::size_t id = band.node_id(idx);
      const double x = kPi / 4 + band.x(0, ib);
      const std::size_t iw = static_cast<std::size_t>(ib + off);
      const double p2 = phi(x) * phi(x), s2 = psi(x) * psi(x);
      const double k0_chart = R(id, 0, 1, 0, 1) / (s2 * p2);
      const double k1_chart = R(id, 1, 2, 1, 2) / (p2 * p2);
      err_k0[r] = std::max(err_k0[r], std::abs(k0_chart - wc.k0.at(iw, 0)));
      err_k1[r] = std::max(err_k1[r],
                           std::abs(k1_chart - (wc.k1.at(iw, 0) - 1.0 / p2)));
    }
  }
  // both discretizations are second order, so the gap shrinks at O(h^2)
  CHECK(err_k0[0] < 2e-3);
  CHECK(err_k1[0] < 2e-3);
  CHECK(err_k0[0] / err_k0[1] > 2.5);
  CHECK(err_k1[0] / err_k1[1] > 2.5);
}

TEST_CASE("reduced rhs is exact on scaled round spheres") {
  GridSpec g = polar_grid(129);
  for (int n : {3, 4, 5}) {
    const double r0 = 1.3;
    WarpedMetric wm = make_warped(g, n, [&](double x) { return r0 * std::sin(x); },
                                  [&](double) { return r0; });
    ReducedRhs rhs = reduced_rhs(wm);
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      const double s = std::sin(g.x(0, static_cast<int>(id)));
      CHECK(rhs.dpsi2.at(id, 0) == Catch::Approx(-2.0 * (n - 1)).margin(1e-11));
      CHECK(rhs.dphi2.at(id, 0) ==
            Catch::Approx(-2.0 * (n - 1) * s * s).margin(1e-11));
      CHECK(std::abs(rhs.u.at(id, 0)) < 1e-12);
    }
  }
}

TEST_CASE("round sphere flow is a homothety resolved exactly in time") {
  GridSpec g = polar_grid(129);
  for (int n : {3, 4}) {
    WarpedMetric wm = make_warped(g, n, [](double x) { return std::sin(x); },
                                  [](double) { return 1.0; });
    const double T = n == 3 ? 0.1 : 0.05;
    ReducedFlowResult res = reduced_flow(wm, TimeMesh::uniform(T, 20));
    REQUIRE(!res.halted);
    REQUIRE(res.path.size() == 21);
    const double c2 = 1.0 - 2.0 * (n - 1) * T;
    const WarpedMetric& fin = res.path.back();
    for (std::size_t id = 0; id < g.node_count(); ++id) {
      const double s = std::sin(g.x(0, static_cast<int>(id)));
      CHECK(fin.psi.at(id, 0) * fin.psi.at(id, 0) == Catch::Approx(c2).margin(1e-9));
      CHECK(fin.phi.at(id, 0) * fin.phi.at(id, 0) ==
            Catch::Approx(c2 * s * s).margin(1e-9));
    }
    // curvature diagnostics track the shrinking radius
    CHECK(res.diag.back().k0_min == Catch::Approx(1.0 / c2).margin(2e-3));
    CHECK(res.diag.back().k1_min == Catch::Approx(1.0 / c2).margin(2e-3));
  }
}

TEST_CASE("perturbed sphere flow converges at second order in space") {
  auto eta = [](double x) { return 1.0 + 0.08 * std::cos(x) + 0.05 * std::cos(2.0 * x); };
  const double T = 0.01;
  std::vector<GridSpec> grids;
  std::vector<std::vector<double>> fin;  // phi^2 at the coarse-grid nodes
  for (int N : {65, 129, 257}) {
    GridSpec g = polar_grid(N);
    WarpedMetric wm = make_warped(g, 3, [&](double x) { return std::sin(x) * eta(x); }, eta);
    ReducedFlowResult res = reduced_flow(wm, TimeMesh::uniform(T, 40));
    REQUIRE(!res.halted);
    const int stride = (N - 1) / 64;
    std::vector<double> v;
    for (int i = 0; i < 65; ++i) {
      const std::size_t id = static_cast<std::size_t>(i * stride);
      const double p = res.path.back().phi.at(id, 0);
      v.push_back(p * p);
    }
    fin.push_back(std::move(v));
  }
  double e1 = 0.0, e2 = 0.0;
  for (int i = 0; i < 65; ++i) {
    e1 = std::max(e1, std::abs(fin[0][i] - fin[1][i]));
    e2 = std::max(e2, std::abs(fin[1][i] - fin[2][i]));
  }
  const double order = std::log2(e1 / e2);
  INFO("self-convergence errors " << e1 << " " << e2 << " order " << order);
  CHECK(order > 1.7);
  CHECK(order < 2.3);
}

TEST_CASE("reduction agrees with the full tensor flow on a periodic chart") {
  // n = 2 chart: g = P(x) dx^2 + Phi(x) dtheta^2 on a torus, theta-independent.,
  auto P0 = [](double x) { return 1.1 + 0.2 * std::cos(x); };
  auto F0 = [](double x) { return 0.9 + 0.15 * std::sin(x) + 0.1 * std::cos(2.0 * x); };
  const double T = 0.02;

  double rhs_err[2] = {0, 0}, flow_err[2] = {0, 0};
  for (int r = 0; r < 2; ++r) {
    const int N = r == 0 ? 64 : 128;
    GridSpec g1({AxisSpec{Topology::periodic, 2.0 * kPi, N}});
    WarpedMetric wm(g1, 2);
    for (int i = 0; i < N; ++i) {
      const double x = g1.x(0, i);
      wm.psi.at(static_cast<std::size_t>(i), 0) = std::sqrt(P0(x));
      wm.phi.at(static_cast<std::size_t>(i), 0) = std::sqrt(F0(x));
    }

    GridSpec g2({AxisSpec{Topology::periodic, 2.0 * kPi, N},
                 AxisSpec{Topology::periodic, 2.0 * kPi, 8}});
    MetricField gm(g2);
    int idx[kMaxDim];
    for (std::size_t id = 0; id < g2.node_count(); ++id) {
      g2.coords(id, idx);
      const double x = g2.x(0, idx[0]);
      gm.set(id, 0, 0, P0(x));
      gm.set(id, 1, 1, F0(x));
    }

    // instantaneous right-hand sides
    ReducedRhs rr = reduced_rhs(wm);
    GridField full = deturck_rhs(gm);
    for (int i = 0; i < N; ++i) {
      idx[0] = i;
      idx[1] = 0;
      const std::size_t id2 = g2.node_id(idx);
      const std::size_t id1 = static_cast<std::size_t>(i);
      rhs_err[r] = std::max(rhs_err[r], std::abs(rr.dpsi2.at(id1, 0) - full.at(id2, 0)));
      rhs_err[r] = std::max(rhs_err[r], std::abs(rr.dphi2.at(id1, 0) - full.at(id2, 3)));
    }

    // short flows with matched time mesh
    TimeMesh mesh = TimeMesh::uniform(T, 20);
    ReducedFlowResult red = reduced_flow(wm, mesh);
    REQUIRE(!red.halted);
    std::vector<MetricField> path = deturck_flow(gm, mesh);
    const WarpedMetric& fr = red.path.back();
    const MetricField& ff = path.back();
    for (int i = 0; i < N; ++i) {
      idx[0] = i;
      idx[1] = 0;
      const std::size_t id2 = g2.node_id(idx);
      const std::size_t id1 = static_cast<std::size_t>(i);
      const double p2 = fr.psi.at(id1, 0) * fr.psi.at(id1, 0);
      const double f2 = fr.phi.at(id1, 0) * fr.phi.at(id1, 0);
      flow_err[r] = std::max(flow_err[r], std::abs(p2 - ff.val(id2, 0, 0)));
      flow_err[r] = std::max(flow_err[r], std::abs(f2 - ff.val(id2, 1, 1)));
      flow_err[r] = std::max(flow_err[r], std::abs(ff.val(id2, 0, 1)));
    }
  }
  INFO("rhs gaps " << rhs_err[0] << " -> " << rhs_err[1] << ", flow gaps "
                   << flow_err[0] << " -> " << flow_err[1]);
  CHECK(rhs_err[0] < 3e-2);
  CHECK(rhs_err[0] / rhs_err[1] > 2.5);
  CHECK(rhs_err[0] / rhs_err[1] < 6.0);
  CHECK(flow_err[0] < 5e-3);
  CHECK(flow_err[0] / flow_err[1] > 2.5);
  CHECK(flow_err[0] / flow_err[1] < 6.0);
}

TEST_CASE("hemisphere mode keeps the equator symmetric and measures the corner") {
  SECTION("smooth symmetric data stays symmetric, equator totally geodesic") {
    GridSpec g = polar_grid(129);
    WarpedMetric wm = make_warped(g, 3, [](double x) { return std::sin(x); },
                                  [](double) { return 1.0; }, true);
    ReducedFlowResult res = reduced_flow(wm, TimeMesh::uniform(0.02, 40));
    REQUIRE(!res.halted);
    for (const ReducedDiagnostics& d : res.diag) {
      CHECK(d.symmetry_residual < 1e-12);
      CHECK(std::abs(d.equator_a) < 5e-4);  // one-sided FD truncation of phi' = 0
      CHECK(std::abs(d.equator_h - 2.0 * d.equator_a) < 1e-15);
    }
  }

  SECTION("corner cap: second form is O(1) at t = 0 and decays under the flow") {
    GridSpec g = polar_grid(129);
    WarpedMetric wm = corner_cap(g, 3, 0.8);
    const double a0 = equator_second_form(wm);
    CHECK(a0 == Catch::Approx(0.8 * std::cos(0.4 * kPi) / std::sin(0.4 * kPi)).epsilon(0.02));
    ReducedFlowResult res = reduced_flow(wm, TimeMesh::graded(0.01, 80));
    REQUIRE(!res.halted);
    CHECK(res.diag.back().equator_a < 0.25 * a0);
  }

  SECTION("smoothed corner second form vanishes under refinement at fixed time") {
    double at[3];
    int k = 0;
    for (int N : {65, 129, 257}) {
      GridSpec g = polar_grid(N);
      ReducedFlowResult res = reduced_flow(corner_cap(g, 3, 0.8), TimeMesh::graded(0.01, 80));
      REQUIRE(!res.halted);
      at[k++] = std::abs(res.diag.back().equator_a);
    }
    INFO("equator A at t=0.01: " << at[0] << " " << at[1] << " " << at[2]);
    CHECK(at[1] < at[0]);
    CHECK(at[2] < at[1]);
  }

  SECTION("even node counts are rejected") {
    GridSpec g = polar_grid(128);
    CHECK_THROWS_AS(WarpedMetric(g, 3, true), ConfigError);
  }
}

TEST_CASE("positivity monitors hold along convex cap flows") {
  GridSpec g = polar_grid(129);
  for (int n : {3, 4}) {
    ReducedFlowResult res = reduced_flow(corner_cap(g, n, 0.8), TimeMesh::graded(0.02, 60));
    REQUIRE(!res.halted);
    for (const ReducedDiagnostics& d : res.diag) {
      CHECK(std::min(d.k0_min, d.k1_min) > -1e-8);  // curvature operator margin
      CHECK(d.scalar_min > -1e-8);
      CHECK(d.equator_a > -1e-8);  // boundary stays (mean-)convex
      if (n == 4)
        CHECK(cone_check_rotsym(d.k0_min, d.k1_min, 4, RotsymCone::pic) > -1e-8);
    }
  }
}

TEST_CASE("thin neck halts the flow and returns the partial trajectory") {
  GridSpec g = polar_grid(257);
  WarpedMetric wm = make_warped(
      g, 3,
      [](double x) {
        const double c = std::cos(x);
        return std::sin(x) * (0.05 + 0.95 * c * c);
      },
      [](double) { return 1.0; });
  ReducedFlowResult res = reduced_flow(wm, TimeMesh::uniform(0.01, 1000));
  CHECK(res.halted);
  CHECK(res.halt_time < 0.005);
  REQUIRE(!res.path.empty());
  CHECK(res.diag.back().phi2_min > 0.0);
  CHECK(res.path.size() == res.diag.size());
}

TEST_CASE("two-eigenvalue cone margins match the generic checker") {
  SECTION("closed values") {
    // round S^4
    CHECK(cone_check_rotsym(1.0, 1.0, 4, RotsymCone::curvature_operator) == 1.0);
    CHECK(cone_check_rotsym(1.0, 1.0, 4, RotsymCone::scalar) == Catch::Approx(12.0));
    CHECK(cone_check_rotsym(1.0, 1.0, 4, RotsymCone::pic) == Catch::Approx(4.0));
    CHECK(cone_check_rotsym(1.0, 1.0, 4, RotsymCone::pic1) == Catch::Approx(2.0));
    CHECK(cone_check_rotsym(1.0, 1.0, 4, RotsymCone::pic2) == Catch::Approx(1.0));
    // flat
    for (RotsymCone v : {RotsymCone::curvature_operator, RotsymCone::scalar,
                         RotsymCone::pic, RotsymCone::pic1, RotsymCone::pic2})
      CHECK(cone_check_rotsym(0.0, 0.0, 4, v) == 0.0);
    // operator fails but isotropic curvature stays positive
    CHECK(cone_check_rotsym(-0.1, 1.0, 4, RotsymCone::curvature_operator) ==
          Catch::Approx(-0.1));
    CHECK(cone_check_rotsym(-0.1, 1.0, 4, RotsymCone::pic) == Catch::Approx(1.8));
  }

  SECTION("spot checks against the frame-descent checker") {
    const double cases[][2] = {{0.7, -0.4}, {-0.3, 1.2}, {1.5, 0.2}, {-0.6, -0.9}};
    for (const auto& c : cases)
      for (int n : {4, 5})
        for (auto [rv, cv] : {std::pair{RotsymCone::pic, ConeVariant::pic},
                              std::pair{RotsymCone::pic1, ConeVariant::pic1},
                              std::pair{RotsymCone::pic2, ConeVariant::pic2}}) {
          const double closed = cone_check_rotsym(c[0], c[1], n, rv);
          const double generic =
              pic_margin_tensor(detail::two_eig_tensor(c[0], c[1], n), n, cv).margin;
          CHECK(closed == Catch::Approx(generic).margin(1e-6));
        }
  }

  SECTION("field overload and nesting along a flow") {
    GridSpec g = polar_grid(65);
    WarpedMetric wm = corner_cap(g, 4, 0.8);
    WarpedCurvature wc = warped_curvature(wm);
    const double mp = cone_check_rotsym(wc.k0, wc.k1, 4, RotsymCone::pic);
    const double m1 = cone_check_rotsym(wc.k0, wc.k1, 4, RotsymCone::pic1);
    const double m2 = cone_check_rotsym(wc.k0, wc.k1, 4, RotsymCone::pic2);
    CHECK(m2 <= m1 + 1e-12);
    CHECK(m1 <= mp + 1e-12);
    CHECK(m2 > 0.0);  // round cap has K0 = K1 = 0.64
  }

  SECTION("pic margins need dimension four") {
    CHECK_THROWS_AS(cone_check_rotsym(1.0, 1.0, 3, RotsymCone::pic), ConfigError);
    CHECK(cone_check_rotsym(1.0, 1.0, 3, RotsymCone::curvature_operator) == 1.0);
  }
}

TEST_CASE("warped metric construction guards its chart assumptions") {
  CHECK_THROWS_AS(WarpedMetric(GridSpec({AxisSpec{Topology::polar, kPi, 65}}), 1),
                  ConfigError);
  CHECK_THROWS_AS(WarpedMetric(GridSpec({AxisSpec{Topology::polar, 2.0, 65}}), 3),
                  ConfigError);
  CHECK_THROWS_AS(WarpedMetric(GridSpec({AxisSpec{Topology::reflect_even, kPi, 65}}), 3),
                  ConfigError);
  // periodic chart is the n = 2 cross-check twin only
  CHECK_THROWS_AS(WarpedMetric(GridSpec({AxisSpec{Topology::periodic, 2.0, 64}}), 3),
                  ConfigError);
  CHECK_NOTHROW(WarpedMetric(GridSpec({AxisSpec{Topology::periodic, 2.0, 64}}), 2));
}
