#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ricciflow/config.hpp"
#include "ricciflow/io.hpp"
#include "ricciflow/scenario.hpp"

namespace fs = std::filesystem;
using namespace ricci;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& stem) {
  static int counter = 0;
  fs::path p = fs::temp_directory_path() / (stem + "_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("parabolicity monitor matches closed forms") {
  GridSpec g({AxisSpec{Topology::periodic, 2.0 * kScenarioPi, 8},
              AxisSpec{Topology::periodic, 2.0 * kScenarioPi, 8}});
  MetricField m(g);
  for (std::size_t id = 0; id < g.node_count(); ++id) {
    m.set(id, 0, 0, 4.0);
    m.set(id, 1, 1, 0.5);
    m.set(id, 0, 1, 0.0);
  }
  REQUIRE(lambda_parabolicity(m) == Catch::Approx(0.25));

  GridSpec pg({AxisSpec{Topology::polar, kScenarioPi, 33}});
  WarpedMetric wm(pg, 3);
  for (std::size_t id = 0; id < pg.node_count(); ++id) {
    const double x = pg.x(0, static_cast<int>(id));
    wm.psi.at(id, 0) = 2.0;
    wm.phi.at(id, 0) = 2.0 * std::sin(x);
  }
  REQUIRE(lambda_parabolicity(wm) == Catch::Approx(0.25));
}

TEST_CASE("flat preset run is a fixed point with clean diagnostics") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 16;
  cfg.preset = "flat";
  cfg.horizon = 0.01;
  cfg.steps = 8;
  const fs::path out = temp_dir("flat_run");
  cfg.outdir = out.string();

  const RunReport rep = run_scenario(cfg);
  REQUIRE(rep.rows.size() == 9);
  REQUIRE_FALSE(rep.halted);
  for (const RunRow& r : rep.rows) {
    CHECK(std::abs(r.min_scal) < 1e-9);
    CHECK(std::abs(r.min_curv_op_eig) < 1e-9);
    CHECK(r.drift < 1e-10);
    CHECK(r.boundary_A_norm < 1e-10);
    CHECK(r.symmetry_residual < 1e-12);
    CHECK(r.lambda_parabolicity == Catch::Approx(1.0).margin(1e-10));
    CHECK(std::isnan(r.pic_margin));
    CHECK(std::isnan(r.ricci_residual));
  }
  REQUIRE(fs::exists(rep.csv_path));
  REQUIRE_FALSE(rep.checkpoints.empty());
  const MetricFile mf = read_metric_file(rep.checkpoints.front());
  CHECK(mf.kind == "metric");
  CHECK(mf.domain == "doubled");
  CHECK(mf.grid->axis(0).nodes == 16);

  const std::string body = slurp(rep.csv_path);
  CHECK(body.find("# ricciflow") != std::string::npos);
  CHECK(body.find("#   domain = torus_doubled") != std::string::npos);
  CHECK(body.find(run_csv_columns()) != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("identical config and seed give bit-identical diagnostics files") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 16;
  cfg.preset = "conformal_bump";
  cfg.preset_amplitude = 0.05;
  cfg.horizon = 0.005;
  cfg.steps = 6;
  const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");

  cfg.outdir = a.string();
  const RunReport ra = run_scenario(cfg);
  cfg.outdir = b.string();
  const RunReport rb = run_scenario(cfg);

  std::string ca = slurp(ra.csv_path), cb = slurp(rb.csv_path);
  const auto strip_outdir = [](std::string s) {
    std::string out;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line))
      if (line.rfind("#   outdir", 0) != 0) out += line + "\n";
    return out;
  };
  REQUIRE(strip_outdir(ca) == strip_outdir(cb));
  REQUIRE(slurp(ra.checkpoints.front()) == slurp(rb.checkpoints.front()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("round rotsym run tracks the exact homothety") {
  ScenarioConfig cfg;
  cfg.domain = "rotsym_sphere";
  cfg.n = 3;
  cfg.resolution = 129;
  cfg.preset = "round";
  cfg.radius = 1.0;
  cfg.background = "round";
  cfg.horizon = 0.02;
  cfg.dt = 1e-3;
  cfg.steps = 0;
  const fs::path out = temp_dir("round_run");
  cfg.outdir = out.string();

  const RunReport rep = run_scenario(cfg);
  REQUIRE_FALSE(rep.halted);
  REQUIRE(rep.rows.size() == 21);
  const double c2 = 1.0 - 2.0 * (cfg.n - 1) * 0.02;  // 0.92
  const RunRow& last = rep.rows.back();
  CHECK(last.min_scal == Catch::Approx(6.0 / c2).epsilon(1e-6));
  CHECK(last.min_curv_op_eig == Catch::Approx(1.0 / c2).epsilon(1e-6));
  CHECK(last.lambda_parabolicity == Catch::Approx(c2).epsilon(1e-9));
  CHECK(last.drift == Catch::Approx(1.0 - c2).epsilon(1e-6));
  CHECK(std::isnan(last.boundary_A_norm));
  CHECK(std::isnan(last.symmetry_residual));

  REQUIRE_FALSE(rep.checkpoints.empty());
  const MetricFile mf = read_metric_file(rep.checkpoints.front());
  CHECK(mf.kind == "warped");
  const WarpedMetric back = as_warped(mf);
  CHECK(back.psi.at(64, 0) * back.psi.at(64, 0) == Catch::Approx(c2).epsilon(1e-6));
  fs::remove_all(out);
}

TEST_CASE("kinked warp run reports an order-one interface form") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 32;
  cfg.preset = "kinked_warp";
  cfg.preset_amplitude = 0.4;
  cfg.horizon = 0.01;
  cfg.steps = 16;
  cfg.grading = 2.0;
  const fs::path out = temp_dir("kink_run");
  cfg.outdir = out.string();

  const RunReport rep = run_scenario(cfg);
  // the kink sits at the interface: O(1) second form at t=0, decaying along
  // the flow as the corner smooths out
  const double a0 = rep.rows.front().boundary_A_norm;
  const double aT = rep.rows.back().boundary_A_norm;
  INFO("A(0) = " << a0 << ", A(T) = " << aT);
  CHECK(a0 > 0.05);
  CHECK(aT < 0.8 * a0);
  for (const RunRow& r : rep.rows) CHECK(r.symmetry_residual < 1e-12);
  fs::remove_all(out);
}

TEST_CASE("hemisphere cap run keeps convexity monitors positive") {
  ScenarioConfig cfg;
  cfg.domain = "rotsym_hemisphere_doubled";
  cfg.n = 3;
  cfg.resolution = 65;
  cfg.preset = "cap_corner";
  cfg.preset_slope = 0.8;
  cfg.background = "round";
  cfg.horizon = 0.01;
  cfg.steps = 40;
  cfg.grading = 2.0;
  const fs::path out = temp_dir("cap_run");
  cfg.outdir = out.string();

  const RunReport rep = run_scenario(cfg);
  REQUIRE_FALSE(rep.halted);
  for (const RunRow& r : rep.rows) {
    CHECK(r.min_scal > -1e-8);
    CHECK(r.min_curv_op_eig > -1e-8);
    CHECK(r.H_min > -1e-8);
    CHECK(r.symmetry_residual < 1e-12);
  }
  CHECK(rep.rows.front().boundary_A_norm > 0.1);  // corner cap: O(1) form
  fs::remove_all(out);
}

TEST_CASE("gauge stage fills the ricci residual column at interior times") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 16;
  cfg.preset = "conformal_bump";
  cfg.preset_amplitude = 0.06;
  cfg.horizon = 0.004;
  cfg.steps = 8;
  cfg.diag_gauge = true;
  const fs::path out = temp_dir("gauge_run");
  cfg.outdir = out.string();

  const RunReport rep = run_scenario(cfg);
  REQUIRE(rep.rows.size() == 9);
  CHECK(std::isnan(rep.rows.front().ricci_residual));
  CHECK(std::isnan(rep.rows.back().ricci_residual));
  int filled = 0;
  for (std::size_t k = 1; k + 1 < rep.rows.size(); ++k)
    if (!std::isnan(rep.rows[k].ricci_residual)) ++filled;
  CHECK(filled == 7);
  fs::remove_all(out);
}
