#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ricciflow/deturck.hpp"
#include "ricciflow/doubling.hpp"
#include "ricciflow/grid.hpp"
#include "ricciflow/tensorfield.hpp"

using namespace ricci;

namespace {

GridSpec half_grid(int n0, int n1, double L = M_PI) {
  return GridSpec({AxisSpec{Topology::reflect_even, L, n0},
                   AxisSpec{Topology::periodic, 2.0 * M_PI, n1}});
}

// a smooth metric on the half grid whose mixed component vanishes exactly at
// both ends (even/odd structure compatible with doubling); the interface
// factor t(1-t) is built from the node index so it is zero bit for bit there
MetricField smooth_half_metric(const GridSpec& hg, double mix = 0.08) {
  MetricField g(hg);
  const int N = hg.axis(0).nodes;
  int idx[kMaxDim];
  for (std::size_t id = 0; id < hg.node_count(); ++id) {
    hg.coords(id, idx);
    const double x = hg.x(0, idx[0]), y = hg.x(1, idx[1]);
    const double t = idx[0] / static_cast<double>(N - 1);
    g.set(id, 0, 0, 1.0 + 0.2 * std::cos(x) * std::cos(y));
    g.set(id, 1, 1, 1.3 + 0.25 * std::cos(2.0 * x) * std::sin(y));
    g.set(id, 0, 1, mix * t * (1.0 - t) * std::cos(y));
  }
  return g;
}

}  // namespace

TEST_CASE("grid doubling and restriction invert each other") {
  GridSpec hg = half_grid(17, 16);
  GridSpec fg = doubled_grid(hg);
  REQUIRE(fg.axis(0).is_periodic());
  REQUIRE(fg.axis(0).nodes == 32);
  REQUIRE(fg.axis(0).extent == Catch::Approx(2.0 * M_PI));
  REQUIRE(fg.spacing(0) == Catch::Approx(hg.spacing(0)));
  GridSpec rg = restricted_grid(fg);
  REQUIRE(rg.axis(0).nodes == 17);
  REQUIRE(rg.axis(0).extent == Catch::Approx(M_PI));
}

TEST_CASE("double then restrict is a bitwise round trip") {
  GridSpec hg = half_grid(17, 16);
  GridSpec fg = doubled_grid(hg);
  MetricField gh = smooth_half_metric(hg);
  MetricField gf = double_metric(gh, fg);
  REQUIRE(symmetry_residual(gf) == 0.0);
  MetricField back = restrict_metric(gf, hg);
  REQUIRE(max_abs_diff(back.components(), gh.components()) == 0.0);
}

TEST_CASE("doubling rejects metrics whose mixed part survives at the interface") {
  GridSpec hg = half_grid(17, 16);
  GridSpec fg = doubled_grid(hg);
  MetricField gh = smooth_half_metric(hg);
  // plant a non-vanishing g_{01} on the x = 0 slice
  int idx[kMaxDim] = {0, 3};
  gh.set(hg.node_id(idx), 0, 1, 1e-6);
  REQUIRE_THROWS_AS(double_metric(gh, fg), NumericsError);
}

TEST_CASE("the doubled flow stays symmetric bit for bit") {
  GridSpec hg = half_grid(17, 16);
  GridSpec fg = doubled_grid(hg);
  MetricField gh = smooth_half_metric(hg);
  MetricField g0 = double_metric(gh, fg);
  TimeMesh mesh = TimeMesh::graded(0.005, 30, 2.0);
  double worst = 0.0;
  deturck_flow(g0, mesh,
               FlowParams{SolverParams{}, 2, false},
               [&](int, double, const MetricField& g) {
                 worst = std::max(worst, symmetry_residual(g));
               });
  INFO("symmetry residual over the flow: " << worst);
  REQUIRE(worst == 0.0);
}

TEST_CASE("boundary monitor reports the interface second fundamental forms") {
  // warp g = dx^2 + phi(x)^2 dy^2 with phi even at both ends of [0, pi];
  // the doubled metric is smooth and the interfaces are minimal (A = 0) when
  // phi'(0) = phi'(L) = 0, convex when phi' > 0 at x = 0.
  GridSpec hg = half_grid(33, 16);
  GridSpec fg = doubled_grid(hg);

  SECTION("mirror-symmetric warp gives nearly minimal interfaces") {
    MetricField gh(hg);
    int idx[kMaxDim];
    for (std::size_t id = 0; id < hg.node_count(); ++id) {
      hg.coords(id, idx);
      const double x = hg.x(0, idx[0]);
      const double phi = 1.0 + 0.3 * std::cos(2.0 * x);  // phi' = 0 at 0 and pi
      gh.set(id, 0, 0, 1.0);
      gh.set(id, 1, 1, phi * phi);
      gh.set(id, 0, 1, 0.0);
    }
    MetricField gf = double_metric(gh, fg);
    auto [a0, a1] = boundary_monitor(gf, hg);
    // the analytic A vanishes; the one-sided stencil leaves O(h^3) residue
    // because the odd derivatives of the even profile are zero at the ends
    REQUIRE(a0.sup_A < 5e-3);
    REQUIRE(a1.sup_A < 5e-3);
  }

  SECTION("kinked warp gives an O(1) interface form") {
    MetricField gh(hg);
    int idx[kMaxDim];
    for (std::size_t id = 0; id < hg.node_count(); ++id) {
      hg.coords(id, idx);
      const double x = hg.x(0, idx[0]);
      const double phi = 1.0 + 0.4 * std::sin(x / 2.0);  // phi'(0) = 0.2 > 0
      gh.set(id, 0, 0, 1.0);
      gh.set(id, 1, 1, phi * phi);
      gh.set(id, 0, 1, 0.0);
    }
    MetricField gf = double_metric(gh, fg);
    auto [a0, a1] = boundary_monitor(gf, hg);
    // at x=0 the inward normal is +d_x and A/g = -phi'/phi = -0.2 (concave
    // side of the bulge); at x=pi, A/g = +phi'(pi)/phi(pi) = 0
    REQUIRE(a0.lambda_min == Catch::Approx(-0.2).epsilon(1e-3));
    REQUIRE_FALSE(a0.convex);
    REQUIRE_FALSE(a0.mean_convex);
    REQUIRE(a1.lambda_min == Catch::Approx(0.0).margin(5e-4));
  }
}
