#pragma once

// Run configuration: plant source, network, safety spec, synthesis and
// simulation settings, plus JSON (de)serialization. Matrices are row-major
// nested arrays; the full schema is documented in docs/config-schema.md.

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "netcbc/model.hpp"
#include "netcbc/motor.hpp"
#include "netcbc/sets.hpp"
#include "netcbc/simulator.hpp"
#include "netcbc/synthesis.hpp"

namespace netcbc {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message)
      : std::runtime_error("config: " + message) {}
};

// ---------------------------------------------------------------------------
// JSON helpers

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(name + " must be a nested array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw ConfigError(name + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!j[i][c].is_number())
        throw ConfigError(name + " contains a non-numeric entry");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError(name + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(name + " contains a non-numeric entry");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline json box_to_json(const Box& b) {
  return json{{"lower", vector_to_json(b.lower)},
              {"upper", vector_to_json(b.upper)}};
}

inline Box box_from_json(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("lower") || !j.contains("upper"))
    throw ConfigError(name + " must be an object with lower/upper arrays");
  try {
    return Box(vector_from_json(j.at("lower"), name + ".lower"),
               vector_from_json(j.at("upper"), name + ".upper"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Plant configuration: exactly one source, motor parameters or explicit
// matrices.

struct MotorPlantConfig {
  MotorParams params;
  double noise_std = 0.005;
  MotorDiscretization discretization = MotorDiscretization::Printed;
};

struct ExplicitPlantConfig {
  Matrix A;
  Matrix B;
  Matrix sigma_w1;
  Matrix sigma_w2;
};

using PlantConfig = std::variant<MotorPlantConfig, ExplicitPlantConfig>;

inline DtSls build_plant(const PlantConfig& plant) {
  if (const auto* motor = std::get_if<MotorPlantConfig>(&plant))
    return build_motor(motor->params, motor->noise_std, motor->discretization);
  const auto& ex = std::get<ExplicitPlantConfig>(plant);
  return DtSls(ex.A, ex.B, ex.sigma_w1, ex.sigma_w2);
}

struct RunConfig {
  PlantConfig plant = MotorPlantConfig{};
  NetworkParams network{0.9, 0.9};
  SafetySpec spec;
  SynthesisConfig synthesis;
  SimConfig sim;
  std::string output_dir = "out";
};

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const RunConfig& cfg) {
  json j;

  if (const auto* motor = std::get_if<MotorPlantConfig>(&cfg.plant)) {
    j["plant"]["motor"] = {
        {"R", motor->params.R},
        {"omega_el", motor->params.omega_el},
        {"Ld", motor->params.Ld},
        {"Lq", motor->params.Lq},
        {"Ts", motor->params.Ts},
        {"noise_std", motor->noise_std},
        {"discretization",
         motor->discretization == MotorDiscretization::Printed ? "printed"
                                                               : "zoh"}};
  } else {
    const auto& ex = std::get<ExplicitPlantConfig>(cfg.plant);
    j["plant"]["explicit"] = {{"A", matrix_to_json(ex.A)},
                              {"B", matrix_to_json(ex.B)},
                              {"sigma_w1", matrix_to_json(ex.sigma_w1)},
                              {"sigma_w2", matrix_to_json(ex.sigma_w2)}};
  }

  j["network"] = {{"mu_theta", cfg.network.mu_theta},
                  {"mu_phi", cfg.network.mu_phi}};

  json unsafe = json::array();
  for (const Box& b : cfg.spec.X1) unsafe.push_back(box_to_json(b));
  j["spec"] = {{"X", box_to_json(cfg.spec.X)},
               {"X0", box_to_json(cfg.spec.X0)},
               {"X1", std::move(unsafe)},
               {"U", box_to_json(cfg.spec.U)},
               {"T", cfg.spec.T}};

  j["synthesis"] = {
      {"variant", to_string(cfg.synthesis.variant)},
      {"gain_search",
       cfg.synthesis.gain_search == GainSearchMethod::NelderMead
           ? "nelder_mead"
           : "coordinate"},
      {"budget", cfg.synthesis.budget},
      {"seed", cfg.synthesis.seed},
      {"rho_target", cfg.synthesis.rho_target},
      {"tol",
       {{"inequality", cfg.synthesis.tol.inequality},
        {"psd", cfg.synthesis.tol.psd},
        {"symmetry", cfg.synthesis.tol.symmetry}}}};
  if (cfg.synthesis.lyapunov_rhs)
    j["synthesis"]["lyapunov_rhs"] = matrix_to_json(*cfg.synthesis.lyapunov_rhs);

  j["sim"] = {{"trajectories", cfg.sim.trajectories},
              {"horizon", cfg.sim.horizon},
              {"seed", cfg.sim.seed},
              {"record_full", cfg.sim.record_full}};
  if (std::holds_alternative<InitUniformOverX0>(cfg.sim.init_mode))
    j["sim"]["init_mode"] = "uniform_x0";
  else
    j["sim"]["init_mode"] = {
        {"fixed",
         vector_to_json(std::get<InitFixedPoint>(cfg.sim.init_mode).x0)}};

  j["output"] = {{"dir", cfg.output_dir}};
  return j;
}

inline RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  try {
    if (!j.contains("plant") || !j.at("plant").is_object())
      throw ConfigError("missing plant section");
    const json& plant = j.at("plant");
    const bool has_motor = plant.contains("motor");
    const bool has_explicit = plant.contains("explicit");
    if (has_motor == has_explicit)
      throw ConfigError("plant must contain exactly one of motor / explicit");
    if (has_motor) {
      const json& mj = plant.at("motor");
      MotorPlantConfig motor;
      motor.params.R = mj.value("R", motor.params.R);
      motor.params.omega_el = mj.value("omega_el", motor.params.omega_el);
      motor.params.Ld = mj.value("Ld", motor.params.Ld);
      motor.params.Lq = mj.value("Lq", motor.params.Lq);
      motor.params.Ts = mj.value("Ts", motor.params.Ts);
      motor.noise_std = mj.value("noise_std", motor.noise_std);
      const std::string disc = mj.value("discretization", "printed");
      if (disc == "printed")
        motor.discretization = MotorDiscretization::Printed;
      else if (disc == "zoh")
        motor.discretization = MotorDiscretization::ZeroOrderHold;
      else
        throw ConfigError("plant.motor.discretization must be printed or zoh");
      motor.params.validate();
      cfg.plant = motor;
    } else {
      const json& ej = plant.at("explicit");
      ExplicitPlantConfig ex;
      ex.A = matrix_from_json(ej.at("A"), "plant.explicit.A");
      ex.B = matrix_from_json(ej.at("B"), "plant.explicit.B");
      ex.sigma_w1 = matrix_from_json(ej.at("sigma_w1"), "plant.explicit.sigma_w1");
      ex.sigma_w2 = matrix_from_json(ej.at("sigma_w2"), "plant.explicit.sigma_w2");
      cfg.plant = ex;
    }

    const json& net = j.at("network");
    cfg.network = NetworkParams(net.at("mu_theta").get<double>(),
                                net.at("mu_phi").get<double>());

    const json& sj = j.at("spec");
    std::vector<Box> unsafe;
    for (std::size_t i = 0; i < sj.at("X1").size(); ++i)
      unsafe.push_back(
          box_from_json(sj.at("X1")[i], "spec.X1[" + std::to_string(i) + "]"));
    cfg.spec = SafetySpec(box_from_json(sj.at("X"), "spec.X"),
                          box_from_json(sj.at("X0"), "spec.X0"),
                          std::move(unsafe),
                          box_from_json(sj.at("U"), "spec.U"),
                          sj.at("T").get<long>());

    if (j.contains("synthesis")) {
      const json& yj = j.at("synthesis");
      const std::string variant = yj.value("variant", "exact");
      if (variant == "exact")
        cfg.synthesis.variant = CoeffVariant::DerivationExact;
      else if (variant == "paper")
        cfg.synthesis.variant = CoeffVariant::PaperLiteral;
      else
        throw ConfigError("synthesis.variant must be exact or paper");
      const std::string method = yj.value("gain_search", "nelder_mead");
      if (method == "nelder_mead")
        cfg.synthesis.gain_search = GainSearchMethod::NelderMead;
      else if (method == "coordinate")
        cfg.synthesis.gain_search = GainSearchMethod::RandomRestartCoordinate;
      else
        throw ConfigError("synthesis.gain_search must be nelder_mead or coordinate");
      cfg.synthesis.budget = yj.value("budget", cfg.synthesis.budget);
      cfg.synthesis.seed = yj.value("seed", cfg.synthesis.seed);
      cfg.synthesis.rho_target = yj.value("rho_target", cfg.synthesis.rho_target);
      if (yj.contains("tol")) {
        const json& tj = yj.at("tol");
        cfg.synthesis.tol.inequality =
            tj.value("inequality", cfg.synthesis.tol.inequality);
        cfg.synthesis.tol.psd = tj.value("psd", cfg.synthesis.tol.psd);
        cfg.synthesis.tol.symmetry =
            tj.value("symmetry", cfg.synthesis.tol.symmetry);
      }
      if (yj.contains("lyapunov_rhs"))
        cfg.synthesis.lyapunov_rhs =
            matrix_from_json(yj.at("lyapunov_rhs"), "synthesis.lyapunov_rhs");
      cfg.synthesis.validate();
    }

    if (j.contains("sim")) {
      const json& mj = j.at("sim");
      cfg.sim.trajectories = mj.value("trajectories", cfg.sim.trajectories);
      cfg.sim.horizon = mj.value("horizon", cfg.spec.T > 0 ? cfg.spec.T : cfg.sim.horizon);
      cfg.sim.seed = mj.value("seed", cfg.sim.seed);
      cfg.sim.record_full = mj.value("record_full", cfg.sim.record_full);
      if (mj.contains("init_mode")) {
        const json& im = mj.at("init_mode");
        if (im.is_string() && im.get<std::string>() == "uniform_x0")
          cfg.sim.init_mode = InitUniformOverX0{};
        else if (im.is_object() && im.contains("fixed"))
          cfg.sim.init_mode =
              InitFixedPoint{vector_from_json(im.at("fixed"), "sim.init_mode.fixed")};
        else
          throw ConfigError("sim.init_mode must be \"uniform_x0\" or {fixed: [...]}");
      }
      cfg.sim.validate();
    } else if (cfg.spec.T > 0) {
      cfg.sim.horizon = cfg.spec.T;
    }

    if (j.contains("output")) cfg.output_dir = j.at("output").value("dir", cfg.output_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Shipped defaults for the motor study. The input box and the Lyapunov
// right-hand side are tuned so the synthesized certificate separates its
// level sets: the drift inequality forces the input-block weight of P to
// track the state-block weight (the plant's B couples u into x at full
// strength), so large input boxes would inflate eta past beta no matter the
// gain. The noise scale is a declared assumption, echoed in every report.

inline RunConfig default_motor_config() {
  RunConfig cfg;

  MotorPlantConfig motor;
  motor.params = MotorParams{};  // R 0.025, omega_el 6283.2, Ld 1e-4, Lq 1.2e-4, Ts 1e-4
  motor.noise_std = 0.005;
  cfg.plant = motor;

  cfg.network = NetworkParams(0.9, 0.9);

  const Box X = Box::centered(2, 2.0);
  const Box X0 = Box::centered(2, 0.2);
  std::vector<Box> X1;
  X1.push_back(Box((Eigen::VectorXd(2) << -2.0, -2.0).finished(),
                   (Eigen::VectorXd(2) << -1.2, 2.0).finished()));
  X1.push_back(Box((Eigen::VectorXd(2) << 1.2, -2.0).finished(),
                   (Eigen::VectorXd(2) << 2.0, 2.0).finished()));
  const Box U = Box::centered(2, 0.05);
  cfg.spec = SafetySpec(X, X0, std::move(X1), U, 100);

  cfg.synthesis.variant = CoeffVariant::DerivationExact;
  cfg.synthesis.budget = 400;
  cfg.synthesis.seed = 1;
  // The x2 weight is relaxed because the rotation-heavy A already transfers
  // x2 into the unsafe x1 direction; weighting it like x1 would inflate eta.
  Vector q_diag(8);
  q_diag << 1.0, 0.1, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6;
  cfg.synthesis.lyapunov_rhs = Matrix(q_diag.asDiagonal());

  cfg.sim.trajectories = 10;
  cfg.sim.horizon = 100;
  cfg.sim.seed = 2024;
  cfg.sim.record_full = true;

  cfg.output_dir = "out";
  return cfg;
}

}  // namespace netcbc
