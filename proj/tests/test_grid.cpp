#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ricciflow/grid.hpp"
#include "ricciflow/rng.hpp"

using namespace ricci;

namespace {
constexpr double kPi = 3.14159265358979323846;

GridField sin_field(const GridSpec& g) {
  GridField f(g, 1);
  for (int i = 0; i < g.axis(0).nodes; ++i) f.at(i, 0) = std::sin(g.x(0, i));
  return f;
}

double max_diff1_error(int nodes, int order) {
  GridSpec g = make_torus(1, 2.0 * kPi, nodes);
  GridField f = sin_field(g);
  GridField d = diff1(f, 0, order);
  double worst = 0.0;
  for (int i = 0; i < nodes; ++i) worst = std::max(worst, std::abs(d.at(i, 0) - std::cos(g.x(0, i))));
  return worst;
}
}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(make_torus(1, 1.0, 7), ConfigError);
  CHECK_NOTHROW(make_torus(1, 1.0, 8));
  CHECK_THROWS_AS(GridSpec({AxisSpec{Topology::periodic, 1.0, 16},
                            AxisSpec{Topology::reflect_even, 1.0, 16}}),
                  ConfigError);
  CHECK_NOTHROW(GridSpec({AxisSpec{Topology::reflect_even, 1.0, 16},
                          AxisSpec{Topology::periodic, 1.0, 16}}));
  CHECK_THROWS_AS(GridSpec({AxisSpec{Topology::periodic, -1.0, 16}}), ConfigError);
}

TEST_CASE("node indexing round trip") {
  GridSpec g({AxisSpec{Topology::reflect_odd_capable, 1.0, 9},
              AxisSpec{Topology::periodic, 2.0, 12}});
  REQUIRE(g.node_count() == 9u * 12u);
  int idx[kMaxDim] = {0};
  std::size_t id = 0;
  do {
    int back[kMaxDim];
    g.coords(id, back);
    CHECK(back[0] == idx[0]);
    CHECK(back[1] == idx[1]);
    CHECK(g.node_id(idx) == id);
    ++id;
  } while (g.next(idx));
  CHECK(id == g.node_count());
}

TEST_CASE("centered first derivative of sin") {
  const double e64 = max_diff1_error(64, 2);
  CHECK(e64 < 2e-3);  // h^2/6 * max|f'''|
  const double e128 = max_diff1_error(128, 2);
  const double ratio = e64 / e128;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
  // optional 4th-order variant behind the same interface
  CHECK(max_diff1_error(64, 4) < 5e-6);
  const double r4 = max_diff1_error(64, 4) / max_diff1_error(128, 4);
  CHECK(r4 > 12.0);
  CHECK(r4 < 20.0);
}

TEST_CASE("diff1 twice agrees with diff2 to second order") {
  auto defect = [](int nodes) {
    GridSpec g = make_torus(1, 2.0 * kPi, nodes);
    GridField f(g, 1);
    for (int i = 0; i < nodes; ++i) f.at(i, 0) = std::sin(2.0 * g.x(0, i)) + 0.3 * std::cos(g.x(0, i));
    GridField dd = diff1(diff1(f, 0), 0);
    GridField d2 = diff2(f, 0);
    return max_abs_diff(dd, d2);
  };
  const double d64 = defect(64), d128 = defect(128);
  CHECK(d64 / d128 > 3.0);
  CHECK(d64 / d128 < 5.0);
}

TEST_CASE("declared even parity forces zero derivative at the mirror") {
  // f(x) = x stored on a mirror axis but declared even: the ghost rule
  // reflects values, so the centered difference vanishes at the ends.
  GridSpec g({AxisSpec{Topology::reflect_even, 1.0, 16}});
  GridField f(g, 1);
  for (int i = 0; i < 16; ++i) f.at(i, 0) = g.x(0, i);
  GridField d = diff1(f, 0);
  CHECK(d.at(0, 0) == 0.0);
  const double interior = d.at(7, 0);
  CHECK(interior == Catch::Approx(1.0));
}

TEST_CASE("odd parity ghosts") {
  GridSpec g({AxisSpec{Topology::polar, kPi, 17}});
  GridField f(g, 1);
  f.set_parity(0, 0, -1);
  for (int i = 0; i < 17; ++i) f.at(i, 0) = std::sin(g.x(0, i));
  // sin is odd about x=0 and odd about x=pi, matching the declared parity,
  // so derivatives stay accurate through both poles.
  GridField d = diff1(f, 0);
  double worst = 0.0;
  for (int i = 0; i < 17; ++i) worst = std::max(worst, std::abs(d.at(i, 0) - std::cos(g.x(0, i))));
  CHECK(worst < 2e-2);
  // and diff2 at the pole sees f(-h) = -f(h): second derivative of odd is 0
  GridField d2 = diff2(f, 0);
  CHECK(d2.at(0, 0) == 0.0);
}

TEST_CASE("cubic interpolation of sin meets error bound") {
  GridSpec g = make_torus(1, 2.0 * kPi, 32);
  GridField f = sin_field(g);
  Rng rng(7);
  double worst = 0.0;
  for (int k = 0; k < 400; ++k) {
    const double x = rng.uniform(-10.0, 10.0);
    double v;
    interpolate(f, &x, &v);
    worst = std::max(worst, std::abs(v - std::sin(x)));
  }
  CHECK(worst < 1e-4);

  // order >= 3 under refinement
  GridSpec g2 = make_torus(1, 2.0 * kPi, 64);
  GridField f2 = sin_field(g2);
  double worst2 = 0.0;
  Rng rng2(7);
  for (int k = 0; k < 400; ++k) {
    const double x = rng2.uniform(-10.0, 10.0);
    double v;
    interpolate(f2, &x, &v);
    worst2 = std::max(worst2, std::abs(v - std::sin(x)));
  }
  CHECK(worst / worst2 > 8.0);  // 2^3
}

TEST_CASE("interpolation reproduces node values and fold signs") {
  GridSpec g({AxisSpec{Topology::polar, kPi, 33}});
  GridField f(g, 2);
  f.set_parity(0, 0, -1);  // odd component
  for (int i = 0; i < 33; ++i) {
    f.at(i, 0) = std::sin(g.x(0, i));
    f.at(i, 1) = std::cos(g.x(0, i));
  }
  double x = g.x(0, 5), v[2];
  interpolate(f, &x, v);
  CHECK(v[0] == Catch::Approx(f.at(5, 0)).margin(1e-14));
  CHECK(v[1] == Catch::Approx(f.at(5, 1)).margin(1e-14));
  // query outside the interval folds with the right signs
  x = -g.x(0, 5);
  interpolate(f, &x, v);
  CHECK(v[0] == Catch::Approx(-f.at(5, 0)).margin(1e-14));
  CHECK(v[1] == Catch::Approx(f.at(5, 1)).margin(1e-14));
}

TEST_CASE("2d interpolation convergence") {
  auto err = [](int nodes) {
    GridSpec g = make_torus(2, 2.0 * kPi, nodes);
    GridField f(g, 1);
    int idx[kMaxDim] = {0};
    std::size_t id = 0;
    do {
      f.at(id, 0) = std::sin(g.x(0, idx[0])) * std::cos(2.0 * g.x(1, idx[1]));
      ++id;
    } while (g.next(idx));
    Rng rng(11);
    double worst = 0.0;
    for (int k = 0; k < 300; ++k) {
      double x[2] = {rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.0, 2.0 * kPi)};
      double v;
      interpolate(f, x, &v);
      worst = std::max(worst, std::abs(v - std::sin(x[0]) * std::cos(2.0 * x[1])));
    }
    return worst;
  };
  CHECK(err(32) / err(64) > 8.0);
}

TEST_CASE("tensor parity table from index structure") {
  GridSpec g({AxisSpec{Topology::reflect_odd_capable, 1.0, 8},
              AxisSpec{Topology::periodic, 1.0, 8}});
  GridField t(g, 4);  // rank 2, n = 2
  t.set_tensor_parity(2);
  CHECK(t.parity(0 * 2 + 0, 0) == 1);   // g_00: two axis-0 slots -> even
  CHECK(t.parity(0 * 2 + 1, 0) == -1);  // g_01: one slot -> odd
  CHECK(t.parity(1 * 2 + 0, 0) == -1);
  CHECK(t.parity(1 * 2 + 1, 0) == 1);
}
