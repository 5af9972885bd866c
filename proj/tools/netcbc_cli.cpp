// netcbc command-line front end.
//
// Subcommands:
//   certify                full pipeline: synthesize gain + certificate,
//                          validate, simulate, write artifacts
//   verify                 check a supplied (P, F) candidate against a config
//   bound                  probability-bound arithmetic from eta, c, beta, T
//   simulate               Monte Carlo with a given gain (or open loop)
//   motor                  emit the motor plant matrices
//   export-paper-candidate evaluate the bundled reference (P, F) candidate
//                          at the configured sampling time, record verdict
//
// Exit codes: 0 success, 1 infeasible/invalid certificate or stage failure,
// 2 usage/config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "netcbc/certificate.hpp"
#include "netcbc/config.hpp"
#include "netcbc/model.hpp"
#include "netcbc/motor.hpp"
#include "netcbc/report.hpp"
#include "netcbc/simulator.hpp"
#include "netcbc/synthesis.hpp"

namespace fs = std::filesystem;
using netcbc::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string variant;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_config = true) {
  if (with_config)
    cmd->add_option("--config", flags.config_path,
                    "Run configuration JSON (defaults to the built-in motor study)");
  cmd->add_option("--out", flags.out_dir, "Output directory for artifacts");
  cmd->add_option("--seed", flags.seed,
                  "Override the synthesis and simulation seeds");
  cmd->add_option("--variant", flags.variant,
                  "Variance-coefficient variant: exact or paper")
      ->check(CLI::IsMember({"exact", "paper"}));
}

netcbc::RunConfig load_config(const CommonFlags& flags) {
  netcbc::RunConfig cfg;
  if (flags.config_path.empty()) {
    cfg = netcbc::default_motor_config();
  } else {
    std::ifstream in(flags.config_path);
    if (!in) throw netcbc::ConfigError("cannot open " + flags.config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw netcbc::ConfigError(std::string("invalid JSON: ") + e.what());
    }
    cfg = netcbc::parse_run_config(j);
  }
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  if (flags.seed) {
    cfg.synthesis.seed = *flags.seed;
    cfg.sim.seed = *flags.seed;
  }
  if (flags.variant == "exact")
    cfg.synthesis.variant = netcbc::CoeffVariant::DerivationExact;
  else if (flags.variant == "paper")
    cfg.synthesis.variant = netcbc::CoeffVariant::PaperLiteral;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string describe_plant(const netcbc::RunConfig& cfg) {
  std::ostringstream os;
  if (const auto* motor = std::get_if<netcbc::MotorPlantConfig>(&cfg.plant)) {
    os << "motor (Ts = " << motor->params.Ts
       << " s [assumed default], noise_std = " << motor->noise_std
       << " [assumed default], discretization = "
       << (motor->discretization == netcbc::MotorDiscretization::Printed
               ? "printed"
               : "zoh")
       << ")";
  } else {
    os << "explicit matrices";
  }
  return os.str();
}

std::string box_to_text(const netcbc::Box& b) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < b.dim(); ++i) {
    if (i) os << " x ";
    os << "[" << b.lower[i] << ", " << b.upper[i] << "]";
  }
  os << "]";
  return os.str();
}

int run_certify(const CommonFlags& flags) {
  const netcbc::RunConfig cfg = load_config(flags);
  const netcbc::DtSls plant = netcbc::build_plant(cfg.plant);

  netcbc::SynthesisResult result;
  try {
    result = netcbc::synthesize(plant, cfg.network, cfg.spec, cfg.synthesis);
  } catch (const netcbc::SynthesisError& e) {
    std::cerr << "certify failed at stage " << e.stage() << ": " << e.what()
              << "\n";
    return 1;
  }

  const double epsilon = result.bound;
  netcbc::SimulationReport sim = netcbc::run_monte_carlo(
      plant, result.gain, cfg.network, cfg.spec, cfg.sim, epsilon);

  fs::create_directories(cfg.output_dir);
  const json cfg_echo = netcbc::to_json(cfg);
  json cert = netcbc::certificate_to_json(result.cbc, result.gain, result.rho,
                                          cfg.spec.T);
  cert["config"] = cfg_echo;
  write_json(fs::path(cfg.output_dir) / "certificate.json", cert);
  write_json(fs::path(cfg.output_dir) / "simulation_report.json",
             netcbc::simulation_report_to_json(sim, cfg_echo));
  if (cfg.sim.record_full) {
    std::ofstream csv(fs::path(cfg.output_dir) / "trajectories.csv",
                      std::ios::binary);
    netcbc::write_trajectories_csv(sim, plant.n(), plant.m(), csv);
  }

  std::ostringstream summary;
  summary << "netcbc certification summary\n"
          << "  plant: " << describe_plant(cfg) << "\n"
          << "  network: mu_theta = " << cfg.network.mu_theta
          << ", mu_phi = " << cfg.network.mu_phi << "\n"
          << "  variant: " << netcbc::to_string(cfg.synthesis.variant) << "\n"
          << "  input box U = " << box_to_text(cfg.spec.U)
          << " (certificate conditions quantify over U)\n"
          << "  gain F = " << result.gain.F.format(Eigen::IOFormat(
                 Eigen::StreamPrecision, Eigen::DontAlignCols, ", ", "; "))
          << "\n"
          << "  spectral radius = " << result.rho << "\n"
          << "  eta = " << result.cbc.eta << ", beta = " << result.cbc.beta
          << ", c = " << result.cbc.c << "\n"
          << "  epsilon = " << epsilon << "\n"
          << "  guarantee >= " << netcbc::format_guarantee(1.0 - epsilon)
          << " over T = " << cfg.spec.T << " steps\n"
          << "  simulation: N = " << sim.trajectories
          << ", violations = " << sim.violations
          << ", exited X: " << sim.exited_state_set << "\n";
  write_text(fs::path(cfg.output_dir) / "summary.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

int run_verify(const CommonFlags& flags, const std::string& candidate_path,
               bool record_only) {
  const netcbc::RunConfig cfg = load_config(flags);
  const netcbc::DtSls plant = netcbc::build_plant(cfg.plant);

  netcbc::Matrix P, F;
  if (record_only) {
    const netcbc::ReferenceCandidate rc = netcbc::motor_reference_candidate();
    P = rc.P;
    F = rc.F;
  } else {
    std::ifstream in(candidate_path);
    if (!in) throw netcbc::ConfigError("cannot open " + candidate_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw netcbc::ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.contains("P") || !j.contains("F"))
      throw netcbc::ConfigError("candidate file must contain P and F");
    P = netcbc::matrix_from_json(j.at("P"), "P");
    F = netcbc::matrix_from_json(j.at("F"), "F");
  }

  const netcbc::FeedbackGain gain(F);
  const netcbc::AugmentedSystem aug =
      netcbc::build_augmented(plant, gain, cfg.network, cfg.synthesis.variant);

  json out;
  out["candidate"] = {{"P", netcbc::matrix_to_json(P)},
                      {"F", netcbc::matrix_to_json(F)}};
  out["structural"] = {
      {"P_dims_ok", P.rows() == aug.kappa() && P.cols() == aug.kappa()},
      {"P_symmetric",
       (P - P.transpose()).cwiseAbs().maxCoeff() <=
           1e-12 * (1.0 + P.cwiseAbs().maxCoeff())},
  };

  netcbc::CbcValidation v;
  bool valid = false;
  try {
    v = netcbc::validate_cbc(aug, P, cfg.spec, cfg.synthesis.tol);
    out["validation"] = netcbc::validation_to_json(v);
    valid = v.valid;
    if (valid) {
      const double eps =
          netcbc::probability_bound_raw(v.eta, v.c, v.beta, cfg.spec.T);
      out["epsilon"] = eps;
      out["guarantee"] = 1.0 - eps;
    }
  } catch (const std::exception& e) {
    out["validation"] = {{"valid", false}, {"error", e.what()}};
  }
  out["verdict"] = valid ? "valid" : "invalid";
  out["config"] = netcbc::to_json(cfg);

  fs::create_directories(cfg.output_dir);
  const std::string name =
      record_only ? "reference_candidate.json" : "verification.json";
  write_json(fs::path(cfg.output_dir) / name, out);
  std::cout << "verdict: " << out["verdict"].get<std::string>() << "\n";
  if (record_only) return 0;  // verdict recorded, not asserted
  return valid ? 0 : 1;
}

int run_bound(double eta, double c, double beta, long T) {
  const double eps = netcbc::probability_bound_raw(eta, c, beta, T);
  std::cout << netcbc::format_guarantee(1.0 - eps) << "\n";
  return 0;
}

int run_simulate(const CommonFlags& flags, const std::string& gain_path,
                 const std::string& mode) {
  const netcbc::RunConfig cfg = load_config(flags);
  const netcbc::DtSls plant = netcbc::build_plant(cfg.plant);

  netcbc::Matrix F = netcbc::Matrix::Zero(plant.m(), plant.n());
  std::optional<double> epsilon;
  if (mode == "closed") {
    if (gain_path.empty())
      throw netcbc::ConfigError("simulate --mode closed requires --gain");
    std::ifstream in(gain_path);
    if (!in) throw netcbc::ConfigError("cannot open " + gain_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw netcbc::ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.contains("F"))
      throw netcbc::ConfigError("gain file must contain F");
    F = netcbc::matrix_from_json(j.at("F"), "F");
    if (j.contains("epsilon") && j.at("epsilon").is_number())
      epsilon = j.at("epsilon").get<double>();
  }
  // zero-gain and zero-input coincide here: u(0) = F y(0) = 0 and the hold
  // keeps a zero input at zero, so F = 0 yields u(k) = 0 for all k.

  const netcbc::FeedbackGain gain(F);
  const netcbc::SimulationReport rep = netcbc::run_monte_carlo(
      plant, gain, cfg.network, cfg.spec, cfg.sim, epsilon);

  fs::create_directories(cfg.output_dir);
  const json cfg_echo = netcbc::to_json(cfg);
  write_json(fs::path(cfg.output_dir) / "simulation_report.json",
             netcbc::simulation_report_to_json(rep, cfg_echo));
  if (cfg.sim.record_full) {
    std::ofstream csv(fs::path(cfg.output_dir) / "trajectories.csv",
                      std::ios::binary);
    netcbc::write_trajectories_csv(rep, plant.n(), plant.m(), csv);
  }
  std::cout << "trajectories: " << rep.trajectories
            << ", violations: " << rep.violations
            << ", empirical_p: " << rep.empirical_p
            << ", ci_upper_99: " << rep.ci_upper << "\n";
  return 0;
}

int run_motor(const netcbc::MotorParams& params, double noise_std, bool zoh) {
  const netcbc::DtSls plant = netcbc::build_motor(
      params, noise_std,
      zoh ? netcbc::MotorDiscretization::ZeroOrderHold
          : netcbc::MotorDiscretization::Printed);
  json j;
  j["A"] = netcbc::matrix_to_json(plant.A);
  j["B"] = netcbc::matrix_to_json(plant.B);
  j["sigma_w1"] = netcbc::matrix_to_json(plant.sigma_w1);
  j["sigma_w2"] = netcbc::matrix_to_json(plant.sigma_w2);
  j["Ts"] = params.Ts;
  j["discretization"] = zoh ? "zoh" : "printed";
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety certification of stochastic linear control loops over "
               "lossy wireless links"};
  app.require_subcommand(1);

  CommonFlags certify_flags;
  CLI::App* certify = app.add_subcommand(
      "certify", "Synthesize gain + certificate, validate, and simulate");
  add_common(certify, certify_flags);

  CommonFlags verify_flags;
  std::string candidate_path;
  CLI::App* verify =
      app.add_subcommand("verify", "Validate a supplied (P, F) candidate");
  add_common(verify, verify_flags);
  verify->add_option("--certificate", candidate_path,
                     "JSON file containing P and F")
      ->required();

  double b_eta = 0.0, b_c = 0.0, b_beta = 0.0;
  long b_T = 0;
  CLI::App* bound =
      app.add_subcommand("bound", "Print the safety guarantee 1 - (eta + c T)/beta");
  bound->add_option("--eta", b_eta, "Initial level set")->required();
  bound->add_option("--c", b_c, "Noise constant")->required();
  bound->add_option("--beta", b_beta, "Unsafe level set")->required();
  bound->add_option("--T", b_T, "Time horizon")->required();

  CommonFlags sim_flags;
  std::string gain_path, sim_mode = "closed";
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo with a given gain");
  add_common(simulate, sim_flags);
  simulate->add_option("--gain", gain_path,
                       "JSON file containing F (e.g. certificate.json)");
  simulate->add_option("--mode", sim_mode,
                       "closed (uses --gain), zero-gain, or zero-input")
      ->check(CLI::IsMember({"closed", "zero-gain", "zero-input"}));

  netcbc::MotorParams motor_params;
  double motor_noise = 0.005;
  bool motor_zoh = false;
  CLI::App* motor = app.add_subcommand("motor", "Emit the motor plant matrices");
  motor->add_option("--R", motor_params.R, "Stator resistance [Ohm]");
  motor->add_option("--omega-el", motor_params.omega_el,
                    "Electrical angular frequency [rad/s]");
  motor->add_option("--Ld", motor_params.Ld, "d-axis inductance [H-turn]");
  motor->add_option("--Lq", motor_params.Lq, "q-axis inductance [H-turn]");
  motor->add_option("--Ts", motor_params.Ts, "Sampling time [s]");
  motor->add_option("--noise-std", motor_noise, "Noise standard deviation");
  motor->add_flag("--zoh", motor_zoh,
                  "Use the standard zero-order-hold discretization of the "
                  "continuous d/q dynamics (comparison only)");

  CommonFlags export_flags;
  CLI::App* export_candidate = app.add_subcommand(
      "export-paper-candidate",
      "Validate the bundled reference (P, F) at the configured sampling time "
      "and record the verdict");
  add_common(export_candidate, export_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(certify)) return run_certify(certify_flags);
    if (app.got_subcommand(verify))
      return run_verify(verify_flags, candidate_path, false);
    if (app.got_subcommand(bound)) return run_bound(b_eta, b_c, b_beta, b_T);
    if (app.got_subcommand(simulate))
      return run_simulate(sim_flags, gain_path, sim_mode);
    if (app.got_subcommand(motor))
      return run_motor(motor_params, motor_noise, motor_zoh);
    if (app.got_subcommand(export_candidate))
      return run_verify(export_flags, "", true);
  } catch (const netcbc::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const netcbc::SynthesisError& e) {
    std::cerr << "stage " << e.stage() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
