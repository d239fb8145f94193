#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ricciflow/config.hpp"
#include "ricciflow/studies.hpp"

using namespace ricci;

TEST_CASE("contraction study: ratios shrink with the horizon") {
  // The fitted exponent only emerges once the rough base data is resolved,
  // so this runs at the production resolution.
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 64;
  cfg.preset = "flat";
  cfg.horizon = 0.01;
  cfg.steps = 24;
  cfg.seed = 0;

  const StudyReport rep = run_study("contraction", cfg);
  INFO(rep.text());
  REQUIRE(rep.members.size() == 3);
  for (const StudyMember& m : rep.members) REQUIRE(m.ok);
  double ratio = 1.0, expo = 10.0;
  for (const auto& [k, v] : rep.summary) {
    if (k == "ratio(T)") ratio = v;
    if (k == "exponent") expo = v;
  }
  CHECK(ratio < 0.9);
  CHECK(std::abs(expo - 0.25) <= 0.25);
  REQUIRE(rep.pass);
}

TEST_CASE("sphere benchmark study: exact shrink factor and second order") {
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

  const StudyReport rep = run_study("sphere_bench", cfg);
  INFO(rep.text());
  REQUIRE(rep.members.size() == 4);
  REQUIRE(rep.pass);
  double rel = -1.0, order = 0.0;
  for (const auto& [k, v] : rep.summary) {
    if (k == "rel_err") rel = v;
    if (k == "order") order = v;
  }
  CHECK(rel < 1e-6);  // backward Euler is exact in time on round data
  CHECK(order > 1.7);
  CHECK(order < 2.3);
}

TEST_CASE("preservation study: mollified caps keep their margins") {
  ScenarioConfig cfg;
  cfg.domain = "rotsym_hemisphere_doubled";
  cfg.n = 3;
  cfg.resolution = 65;
  cfg.preset = "cap_corner";
  cfg.preset_slope = 0.8;
  cfg.background = "round";
  cfg.horizon = 0.005;
  cfg.steps = 30;
  cfg.grading = 2.0;

  const StudyReport rep = run_study("preservation", cfg);
  INFO(rep.text());
  REQUIRE(rep.members.size() == 3);
  for (const StudyMember& m : rep.members) REQUIRE(m.ok);
  REQUIRE(rep.pass);

  SECTION("four-dimensional variant also monitors the isotropic cone") {
    cfg.n = 4;
    const StudyReport rep4 = run_study("preservation", cfg);
    INFO(rep4.text());
    REQUIRE(rep4.pass);
    bool saw_pic = false;
    for (const StudyMember& m : rep4.members)
      for (const auto& [k, v] : m.stats)
        if (k == "pic_margin") {
          saw_pic = true;
          CHECK(v > -1e-8);
        }
    REQUIRE(saw_pic);
  }
}

TEST_CASE("smoothing study: hessian decays at the diffusive rate") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 512;
  cfg.preset = "kinked_warp";
  cfg.preset_amplitude = 0.4;
  cfg.horizon = 0.1;
  cfg.steps = 192;
  cfg.grading = 2.0;

  const StudyReport rep = run_study("smoothing", cfg);
  INFO(rep.text());
  REQUIRE(rep.members.size() == 1);
  REQUIRE(rep.members.front().ok);
  double slope = 0.0;
  for (const auto& [k, v] : rep.summary)
    if (k == "slope") slope = v;
  CHECK(slope < -0.3);
  CHECK(slope > -0.7);
  REQUIRE(rep.pass);
}

TEST_CASE("convergence study: flow solutions refine at second order") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 32;
  cfg.preset = "conformal_bump";
  cfg.preset_amplitude = 0.08;
  cfg.horizon = 0.004;
  cfg.steps = 128;

  const StudyReport rep = run_study("convergence", cfg);
  INFO(rep.text());
  REQUIRE(rep.members.size() == 3);
  REQUIRE(rep.pass);
}

TEST_CASE("uniqueness study: the two reconstructions approach each other") {
  ScenarioConfig cfg;
  cfg.domain = "torus_doubled";
  cfg.n = 2;
  cfg.resolution = 32;
  cfg.preset = "flat";
  cfg.horizon = 0.004;
  cfg.steps = 128;
  cfg.seed = 7;

  const StudyReport rep = run_study("uniqueness", cfg);
  INFO(rep.text());
  REQUIRE(rep.members.size() == 3);
  std::vector<double> gaps;
  for (const StudyMember& m : rep.members) {
    REQUIRE(m.ok);
    for (const auto& [k, v] : m.stats)
      if (k == "gap") gaps.push_back(v);
  }
  REQUIRE(gaps.size() == 3);
  CHECK(gaps[1] < gaps[0]);
  CHECK(gaps[2] < gaps[1]);
}

TEST_CASE("study dispatch validates kinds and domains") {
  ScenarioConfig cfg;
  CHECK_THROWS_AS(run_study("navel_gazing", cfg), ConfigError);
  CHECK_THROWS_AS(run_study("preservation", cfg), ConfigError);  // torus domain
  ScenarioConfig rot;
  rot.domain = "rotsym_sphere";
  rot.preset = "round";
  rot.background = "round";
  CHECK_THROWS_AS(run_study("smoothing", rot), ConfigError);
  CHECK_THROWS_AS(run_study("contraction", rot), ConfigError);
  CHECK_THROWS_AS(run_study("uniqueness", rot), ConfigError);
}
