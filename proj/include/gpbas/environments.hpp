#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gpbas/barrier.hpp"
#include "gpbas/dynamics.hpp"
#include "gpbas/gp.hpp"
#include "gpbas/types.hpp"

namespace gpbas {

// How a benchmark generates its training set.
struct DataRecipe {
  enum class Kind {
    kUniform,      // independent uniform draws over a box in (x, u)
    kSinusoidal,   // wheel-speed sinusoids rolled through the dynamics
    kExcitation,   // near-hover excitation trajectories
  };
  Kind kind = Kind::kUniform;
  int count = 0;          // total rows
  double low = -1.0;      // uniform box bounds
  double high = 1.0;
  int trajectories = 0;   // trajectory-based recipes
  int steps = 0;          // rows per trajectory
};

// One benchmark: ground truth, constraints, cost weights and data recipe.
struct Environment {
  std::string name;
  std::string course;
  int state_dim = 0;
  int control_dim = 0;
  double dt = 0.0;
  TargetMode target_mode = TargetMode::kDerivative;  // of GP training targets
  std::shared_ptr<const MeanDynamics> truth;         // continuous-time dynamics
  SafetyFunction constraints;
  Matrix state_weight;     // over the raw state
  Matrix control_weight;
  Matrix terminal_weight;
  Vector x0;
  Vector goal;
  DataRecipe recipe;
  std::vector<int> learned_rows;  // empty: the GP learns every row
  std::vector<std::string> state_names;
  std::vector<std::string> control_names;
};

// Unstable planar linear system with one circular obstacle.
Environment linear_env();

// Differential-drive vehicle; course is "single" or "multi" obstacles.
Environment dubins_env(const std::string& course = "single");

// 12-state quadrotor around hover; control 0 is thrust deviation from m*g.
Environment quadrotor_env();

// Lookup by name ("linear", "dubins", "quadrotor") and course label.
Environment make_environment(const std::string& name, const std::string& course = "");
std::vector<std::string> environment_names();

// Builds an environment from a course config in JSON form.
Environment environment_from_json(const std::string& json_text);

// Canonical JSON for a named course, byte-identical to the file shipped under
// courses/.
std::string course_json(const std::string& environment, const std::string& course);
std::vector<std::pair<std::string, std::string>> course_catalog();  // (env, course)

// Executes the environment's recipe. Targets are exact derivatives or exact
// one-step deltas depending on target_mode; rows follow the substream
// (seed, "data", trajectory).
Dataset generate_training_data(const Environment& env, std::uint64_t seed);

// True dynamics expressed in the environment's target mode (RK4 deltas for
// delta mode). Drop-in replacement for a trained GP.
std::shared_ptr<const MeanDynamics> true_model(const Environment& env);

// Wraps a trained GP into the environment's dynamics, grey-box when the
// environment learns a subset of rows.
std::shared_ptr<const MeanDynamics> learned_model(const Environment& env, GpModel gp);

std::vector<std::string> dataset_input_names(const Environment& env);
std::vector<std::string> dataset_target_names(const Environment& env);

}  // namespace gpbas
