#pragma once

// JSON artifact serialization: certificates, verification verdicts, and
// simulation reports. All values come straight from the library types, so
// identical runs serialize byte-identically.

#include <string>

#include <json.hpp>

#include "netcbc/certificate.hpp"
#include "netcbc/config.hpp"
#include "netcbc/simulator.hpp"
#include "netcbc/synthesis.hpp"

namespace netcbc {

inline json certificate_to_json(const QuadraticCbc& cbc,
                                const FeedbackGain& gain, double rho,
                                long horizon) {
  const double raw = (cbc.eta + cbc.c * static_cast<double>(horizon)) / cbc.beta;
  const double eps = probability_bound(cbc, horizon);
  json j;
  j["P"] = matrix_to_json(cbc.P);
  j["F"] = matrix_to_json(gain.F);
  j["eta"] = cbc.eta;
  j["beta"] = cbc.beta;
  j["beta_certified"] = cbc.beta_certified;
  j["c"] = cbc.c;
  j["variant"] = to_string(cbc.variant);
  j["spectral_radius"] = rho;
  j["horizon"] = horizon;
  j["epsilon"] = eps;
  j["raw_ratio"] = raw;
  j["guarantee"] = 1.0 - eps;
  j["bound_inputs"] = {{"mu_theta", cbc.bound_inputs.mu_theta},
                       {"mu_phi", cbc.bound_inputs.mu_phi},
                       {"sigma_w", matrix_to_json(cbc.bound_inputs.sigma_w)}};
  return j;
}

inline json validation_to_json(const CbcValidation& v) {
  json j;
  j["valid"] = v.valid;
  j["eta"] = v.eta;
  j["beta"] = v.beta;
  j["beta_certified"] = v.beta_certified;
  j["c"] = v.c;
  j["inequality"] = {{"max_eig", v.inequality.max_eig},
                     {"tol", v.inequality.tol},
                     {"satisfied", v.inequality.satisfied}};
  j["failures"] = v.failures;
  return j;
}

inline json simulation_report_to_json(const SimulationReport& rep,
                                      const json& config_echo) {
  json j;
  j["trajectories"] = rep.trajectories;
  j["horizon"] = rep.horizon;
  j["seed"] = rep.seed;
  j["violations"] = rep.violations;
  j["exited_state_set"] = rep.exited_state_set;
  j["empirical_p"] = rep.empirical_p;
  j["ci_upper_99"] = rep.ci_upper;
  if (rep.bound_epsilon)
    j["bound_epsilon"] = *rep.bound_epsilon;
  else
    j["bound_epsilon"] = nullptr;

  json flags = json::array();
  for (std::uint8_t f : rep.violated_flags) flags.push_back(f != 0);
  j["violated_flags"] = std::move(flags);
  json exits = json::array();
  for (std::uint8_t f : rep.exited_flags) exits.push_back(f != 0);
  j["exited_flags"] = std::move(exits);

  json env_min = json::array(), env_max = json::array();
  for (const Vector& v : rep.env_min) env_min.push_back(vector_to_json(v));
  for (const Vector& v : rep.env_max) env_max.push_back(vector_to_json(v));
  j["per_step_envelope"] = {{"min", std::move(env_min)},
                            {"max", std::move(env_max)}};
  j["config"] = config_echo;
  return j;
}

/// Four-decimal floor of a guarantee; a lower bound never rounds up.
inline std::string format_guarantee(double guarantee) {
  const double floored = std::floor(guarantee * 10000.0) / 10000.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", floored);
  return buf;
}

}  // namespace netcbc
