#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "netcbc/config.hpp"
#include "netcbc/motor.hpp"

using namespace netcbc;

TEST_CASE("motor formulas evaluated verbatim") {
  const MotorParams p{};  // published constants, default Ts
  const DtSls plant = build_motor(p);

  const double ed = std::exp(-(p.R / p.Ld) * p.Ts);
  const double eq = std::exp(-(p.R / p.Lq) * p.Ts);
  REQUIRE(plant.A(0, 0) == (p.Ld / p.R) * ed);
  REQUIRE(plant.A(0, 1) == p.Lq * (p.omega_el / p.R) * (1.0 - ed));
  REQUIRE(plant.A(1, 0) == -p.Ld * (p.omega_el / p.R) * (1.0 - eq));
  REQUIRE(plant.A(1, 1) == (p.Lq / p.R) * eq);
  REQUIRE(plant.B(0, 0) == (1.0 / p.R) * (1.0 - ed));
  REQUIRE(plant.B(0, 1) == (p.Lq / p.R) * (1.0 - ed));
  REQUIRE(plant.B(1, 0) == (p.Ld / p.R) * (1.0 - eq));
  REQUIRE(plant.B(1, 1) == (1.0 / p.R) * (1.0 - eq));

  REQUIRE(plant.A.allFinite());
  REQUIRE((plant.B.array() > 0.0).all());
}

TEST_CASE("motor at vanishing sampling time collapses to the prefactors") {
  MotorParams p{};
  p.Ts = 1e-12;
  const DtSls plant = build_motor(p);
  REQUIRE_THAT(plant.A(0, 0), Catch::Matchers::WithinAbs(0.004, 1e-9));
  REQUIRE_THAT(plant.A(1, 1), Catch::Matchers::WithinAbs(0.0048, 1e-9));
  REQUIRE(plant.A(0, 1) < 1e-4);
  REQUIRE(plant.B.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("motor parameter validation") {
  MotorParams p{};
  p.Ts = 0.0;
  REQUIRE_THROWS_AS(build_motor(p), std::invalid_argument);
  p = MotorParams{};
  p.R = -1.0;
  REQUIRE_THROWS_AS(build_motor(p), std::invalid_argument);
}

TEST_CASE("noise level scales the covariances") {
  const DtSls plant = build_motor(MotorParams{}, 0.02);
  REQUIRE((plant.sigma_w1 - 0.0004 * Matrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() <= 1e-18);
}

TEST_CASE("zero-order-hold discretization is a sane alternative") {
  MotorParams p{};
  const DtSls printed = build_motor(p);
  const DtSls zoh = build_motor(p, 0.005, MotorDiscretization::ZeroOrderHold);
  REQUIRE(zoh.A.allFinite());
  REQUIRE(zoh.B.allFinite());
  // The two discretizations genuinely differ.
  REQUIRE((zoh.A - printed.A).cwiseAbs().maxCoeff() > 1e-3);

  // For tiny Ts the ZOH matrix approaches I + Ac Ts.
  MotorParams tiny = p;
  tiny.Ts = 1e-9;
  const DtSls z2 = build_motor(tiny, 0.005, MotorDiscretization::ZeroOrderHold);
  Matrix Ac(2, 2);
  Ac << -p.R / p.Ld, p.omega_el * p.Lq / p.Ld, -p.omega_el * p.Ld / p.Lq,
      -p.R / p.Lq;
  REQUIRE((z2.A - (Matrix::Identity(2, 2) + Ac * tiny.Ts)).cwiseAbs().maxCoeff() <
          1e-6);
}

TEST_CASE("reference candidate is structurally sound") {
  const ReferenceCandidate rc = motor_reference_candidate();
  REQUIRE(rc.P.rows() == 8);
  REQUIRE(rc.P.cols() == 8);
  REQUIRE((rc.P - rc.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(rc.P, Eigen::EigenvaluesOnly);
  REQUIRE(es.eigenvalues().minCoeff() > 0.0);
  REQUIRE(rc.F.rows() == 2);
  REQUIRE(rc.F.cols() == 2);
}

TEST_CASE("run config round-trips through JSON") {
  const RunConfig cfg = default_motor_config();
  const json j1 = to_json(cfg);
  const RunConfig parsed = parse_run_config(j1);
  const json j2 = to_json(parsed);
  REQUIRE(j1.dump() == j2.dump());
}

TEST_CASE("explicit-plant config round-trips") {
  RunConfig cfg = default_motor_config();
  ExplicitPlantConfig ex;
  ex.A = (Matrix(2, 2) << 0.5, 0.1, -0.2, 0.7).finished();
  ex.B = Matrix::Identity(2, 2);
  ex.sigma_w1 = 0.01 * Matrix::Identity(2, 2);
  ex.sigma_w2 = 0.02 * Matrix::Identity(2, 2);
  cfg.plant = ex;
  cfg.sim.init_mode = InitFixedPoint{(Eigen::VectorXd(2) << 0.1, 0.1).finished()};

  const json j1 = to_json(cfg);
  const RunConfig parsed = parse_run_config(j1);
  REQUIRE(to_json(parsed).dump() == j1.dump());

  const DtSls plant = build_plant(parsed.plant);
  REQUIRE(plant.A == ex.A);
}

TEST_CASE("malformed configs are rejected") {
  SECTION("missing plant") {
    json j = to_json(default_motor_config());
    j.erase("plant");
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
  }

  SECTION("both plant sources") {
    json j = to_json(default_motor_config());
    j["plant"]["explicit"] = {{"A", {{1.0}}},
                              {"B", {{1.0}}},
                              {"sigma_w1", {{1.0}}},
                              {"sigma_w2", {{1.0}}}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
  }

  SECTION("bad variant") {
    json j = to_json(default_motor_config());
    j["synthesis"]["variant"] = "bogus";
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
  }

  SECTION("inconsistent box") {
    json j = to_json(default_motor_config());
    j["spec"]["X0"]["lower"] = {0.5, 0.5};
    j["spec"]["X0"]["upper"] = {-0.5, 0.5};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
  }

  SECTION("ragged matrix") {
    json j = to_json(default_motor_config());
    j["plant"] = {{"explicit",
                   {{"A", json::array({json::array({1.0, 2.0}), json::array({3.0})})},
                    {"B", {{1.0}}},
                    {"sigma_w1", {{1.0}}},
                    {"sigma_w2", {{1.0}}}}}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
  }
}

TEST_CASE("default motor config is internally consistent") {
  const RunConfig cfg = default_motor_config();
  REQUIRE(cfg.spec.T == 100);
  REQUIRE(cfg.spec.X1.size() == 2);
  REQUIRE(cfg.sim.horizon == cfg.spec.T);
  const DtSls plant = build_plant(cfg.plant);
  REQUIRE(plant.n() == 2);
  REQUIRE(plant.m() == 2);
  REQUIRE(cfg.synthesis.lyapunov_rhs.has_value());
  Eigen::SelfAdjointEigenSolver<Matrix> es(*cfg.synthesis.lyapunov_rhs,
                                           Eigen::EigenvaluesOnly);
  REQUIRE(es.eigenvalues().minCoeff() > 0.0);
}
