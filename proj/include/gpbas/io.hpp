#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gpbas/control.hpp"
#include "gpbas/environments.hpp"
#include "gpbas/gp.hpp"
#include "gpbas/uncertainty.hpp"

namespace gpbas {

// Shortest decimal string that round-trips the double.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Canonical dump: 2-space indent, sorted keys via nlohmann's ordered map,
// trailing newline. Reruns produce byte-identical files.
std::string dump_json(const nlohmann::json& j);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

// Dataset CSV with a naming header row.
std::string dataset_to_csv(const Dataset& data, const std::vector<std::string>& input_names,
                           const std::vector<std::string>& target_names);

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> input_names;
  std::vector<std::string> target_names;
};

// input_columns tells the reader where inputs end and targets begin.
LoadedDataset dataset_from_csv(const std::string& csv_text, int input_columns);

// GP model serialization. Cholesky factors are not stored; loading refits and
// re-verifies the factorization invariants.
nlohmann::json gp_model_to_json(const GpModel& model, nlohmann::json metadata);
GpModel gp_model_from_json(const nlohmann::json& j, nlohmann::json* metadata = nullptr);

nlohmann::json safety_report_to_json(const SafetyReport& report);

nlohmann::json barrier_config_to_json(const BarrierConfig& config);
BarrierConfig barrier_config_from_json(const nlohmann::json& j);

// A solved controller in replayable form.
struct StoredPolicy {
  std::string kind;  // "lqr" or "ddp"
  std::string environment;
  std::string course;
  BarrierConfig barrier;
  double dt = 0.0;
  // lqr
  LqrGains lqr;
  Vector goal;  // embedded goal
  // ddp
  std::vector<Vector> nominal_states;  // stacked
  std::vector<Vector> controls;
  std::vector<Matrix> gains;
  std::vector<Vector> feedforward;

  Policy policy() const;
};

nlohmann::json stored_policy_to_json(const StoredPolicy& p);
StoredPolicy stored_policy_from_json(const nlohmann::json& j);

StoredPolicy store_lqr_policy(const std::string& environment, const std::string& course,
                              const BarrierConfig& barrier, double dt,
                              const LqrGains& gains, const Vector& goal);
StoredPolicy store_ddp_policy(const std::string& environment, const std::string& course,
                              const BarrierConfig& barrier, double dt,
                              const DdpSolution& solution);

// Trajectory CSV: t, x_1..x_n, z_1..z_q, u_1..u_m, h_min, cost_to_go.
std::string trajectory_to_csv(const RolloutResult& rollout, const EmbeddedModel& model,
                              const QuadraticCost* cost);

// Experiment configuration, one seed and one output directory per run.
struct ExperimentConfig {
  std::string environment = "linear";
  std::string course;  // empty: the environment's default course
  std::uint64_t seed = 0;

  // gp
  int subsample = 0;  // 0 keeps every row
  int optimizer_iters = 100;
  double holdout_fraction = 0.2;
  bool center_targets = true;

  // barrier
  double gamma = -1.0;  // negative: command default (1 for lqr, 0 for ddp)
  double quantile_phi = 0.0;
  double rho = -1.0;  // in (0,1) converts to quantile_phi; negative: unset
  std::string combine = "sum";  // or "per_constraint"
  double barrier_weight = 1e-3;

  // solver
  int horizon = 500;
  double dt = -1.0;  // negative: environment default
  int max_iters = 100;
  double epsilon = 1e-4;
  double reg_init = 0.0;
  double reg_max = 1e6;
  double alpha_min = 0.0009765625;

  std::string output_dir = "out";

  // Resolved quantile multiplier (rho wins when set).
  double resolved_phi() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

// Draft-07 schema describing the config document; the file under schemas/
// ships this exact text.
std::string experiment_config_schema();

// Solver options block as accepted inside the config's "solver" section.
DdpOptions ddp_options_from_config(const ExperimentConfig& config);

}  // namespace gpbas
