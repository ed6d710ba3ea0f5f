#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gpbas/control.hpp"
#include "gpbas/environments.hpp"
#include "gpbas/gp.hpp"
#include "gpbas/io.hpp"
#include "gpbas/rng.hpp"
#include "gpbas/uncertainty.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitNumerical = 4;

// Relative paths resolve against GPBAS_OUTPUT_ROOT when it is set, so a whole
// pipeline can be redirected with one environment variable.
std::filesystem::path resolve_path(const std::string& path) {
  std::filesystem::path p(path);
  const char* root = std::getenv("GPBAS_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && p.is_relative()) {
    p = std::filesystem::path(root) / p;
  }
  return p;
}

std::filesystem::path resolve_output_dir(const std::string& dir) {
  const auto p = resolve_path(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) {
    throw std::invalid_argument("cannot create output directory: " + p.string());
  }
  return p;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  gpbas::write_text_file(path.string(), content);
  std::cout << "wrote " << path.string() << "\n";
}

json parse_json_file(const std::string& path) {
  const auto resolved = resolve_path(path);
  try {
    return json::parse(gpbas::read_text_file(resolved.string()));
  } catch (const json::exception& e) {
    throw std::invalid_argument("JSON parse error in " + resolved.string() + ": " +
                                e.what());
  }
}

// Milliseconds since construction, reported on stderr so artifact bytes stay
// independent of machine speed.
class WallClock {
 public:
  explicit WallClock(std::string label)
      : label_(std::move(label)), start_(std::chrono::steady_clock::now()) {}
  ~WallClock() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    std::cerr << label_ << ": " << ms << " ms\n";
  }

 private:
  std::string label_;
  std::chrono::steady_clock::time_point start_;
};

std::string mode_name(gpbas::TargetMode mode) {
  return mode == gpbas::TargetMode::kDerivative ? "derivative" : "delta";
}

json recipe_to_json(const gpbas::DataRecipe& recipe) {
  switch (recipe.kind) {
    case gpbas::DataRecipe::Kind::kUniform:
      return json{{"kind", "uniform"},
                  {"count", recipe.count},
                  {"low", recipe.low},
                  {"high", recipe.high}};
    case gpbas::DataRecipe::Kind::kSinusoidal:
      return json{{"kind", "sinusoidal"},
                  {"trajectories", recipe.trajectories},
                  {"steps", recipe.steps}};
    case gpbas::DataRecipe::Kind::kExcitation:
      return json{{"kind", "excitation"},
                  {"trajectories", recipe.trajectories},
                  {"steps", recipe.steps}};
  }
  return json();
}

void shuffle_indices(std::vector<int>& indices, gpbas::Rng& rng) {
  for (int i = static_cast<int>(indices.size()) - 1; i > 0; --i) {
    std::swap(indices[static_cast<std::size_t>(i)],
              indices[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  }
}

gpbas::Dataset select_rows(const gpbas::Dataset& data, const std::vector<int>& rows) {
  gpbas::Dataset out;
  out.inputs.resize(static_cast<int>(rows.size()), data.input_dim());
  out.targets.resize(static_cast<int>(rows.size()), data.output_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<int>(i)) = data.inputs.row(rows[i]);
    out.targets.row(static_cast<int>(i)) = data.targets.row(rows[i]);
  }
  return out;
}

gpbas::Vector rmse_per_output(const gpbas::GpModel& model, const gpbas::Dataset& data) {
  gpbas::Vector sq = gpbas::Vector::Zero(data.output_dim());
  for (int r = 0; r < data.size(); ++r) {
    const auto pred = gpbas::gp_posterior(model, data.inputs.row(r).transpose());
    const gpbas::Vector err = pred.mean - data.targets.row(r).transpose();
    sq += err.cwiseProduct(err);
  }
  return (sq / std::max(1, data.size())).cwiseSqrt();
}

std::vector<gpbas::KernelHyperparameters> initial_hyper(const gpbas::Dataset& data) {
  const int d = data.input_dim();
  gpbas::Vector lengthscales(d);
  for (int c = 0; c < d; ++c) {
    const double mean = data.inputs.col(c).mean();
    const double var =
        (data.inputs.col(c).array() - mean).square().sum() / std::max(1, data.size() - 1);
    lengthscales(c) = std::max(2.0 * std::sqrt(var), 1e-2);
  }
  std::vector<gpbas::KernelHyperparameters> hyper;
  for (int e = 0; e < data.output_dim(); ++e) {
    const double mean = data.targets.col(e).mean();
    const double var =
        (data.targets.col(e).array() - mean).square().sum() / std::max(1, data.size() - 1);
    gpbas::KernelHyperparameters h;
    h.signal_variance = std::max(var, 1e-6);
    h.lengthscales = lengthscales;
    h.noise_variance = std::max(1e-4 * h.signal_variance, 1e-8);
    hyper.push_back(std::move(h));
  }
  return hyper;
}

struct LoadedModel {
  gpbas::GpModel gp;
  gpbas::Environment env;
  json metadata;
};

LoadedModel load_model(const std::string& model_path) {
  LoadedModel out;
  out.gp = gpbas::gp_model_from_json(parse_json_file(model_path), &out.metadata);
  if (!out.metadata.is_object() || !out.metadata.contains("environment")) {
    throw std::invalid_argument("model metadata does not name an environment");
  }
  const std::string env_name = out.metadata.at("environment").get<std::string>();
  const std::string course = out.metadata.value("course", std::string());
  out.env = gpbas::make_environment(env_name, course);
  return out;
}

gpbas::BarrierConfig barrier_from_config(const gpbas::ExperimentConfig& config,
                                         const gpbas::Environment& env,
                                         double default_gamma) {
  gpbas::BarrierConfig bc;
  bc.gamma = config.gamma >= 0.0 ? config.gamma : default_gamma;
  bc.shift_point = env.goal;
  bc.combine = config.combine == "per_constraint" ? gpbas::BarrierCombine::kPerConstraint
                                                  : gpbas::BarrierCombine::kSingleSum;
  bc.quantile_phi = config.resolved_phi();
  return bc;
}

json rollout_summary(const gpbas::RolloutResult& rollout, const gpbas::Environment& env) {
  const gpbas::Vector final_x = rollout.states.back().x;
  return json{{"cost", rollout.cost},
              {"min_h", rollout.min_h},
              {"violation_step", rollout.violation_step},
              {"violation_constraint", rollout.violation_constraint},
              {"goal_distance", (final_x - env.goal).norm()},
              {"final_state", gpbas::vector_to_json(final_x)}};
}

const char* status_name(gpbas::DdpStatus status) {
  switch (status) {
    case gpbas::DdpStatus::kConverged:
      return "converged";
    case gpbas::DdpStatus::kMaxIterations:
      return "max_iterations";
    case gpbas::DdpStatus::kStalled:
      return "stalled";
  }
  return "unknown";
}

int cmd_gen_data(gpbas::ExperimentConfig config) {
  WallClock clock("gen-data");
  gpbas::Environment env = gpbas::make_environment(config.environment, config.course);
  config.environment = env.name;
  config.course = env.course;

  const gpbas::Dataset data = gpbas::generate_training_data(env, config.seed);
  const auto dir = resolve_output_dir(config.output_dir);
  write_file(dir / "dataset.csv",
             gpbas::dataset_to_csv(data, gpbas::dataset_input_names(env),
                                   gpbas::dataset_target_names(env)));

  json meta{{"environment", env.name},
            {"course", env.course},
            {"seed", config.seed},
            {"rows", data.size()},
            {"input_columns", gpbas::dataset_input_names(env)},
            {"target_columns", gpbas::dataset_target_names(env)},
            {"target_mode", mode_name(env.target_mode)},
            {"recipe", recipe_to_json(env.recipe)}};
  write_file(dir / "dataset.meta.json", gpbas::dump_json(meta));
  write_file(dir / "config.json", gpbas::dump_json(gpbas::experiment_config_to_json(config)));
  return kExitOk;
}

int cmd_train(gpbas::ExperimentConfig config, const std::string& data_path) {
  WallClock clock("train");
  gpbas::Environment env = gpbas::make_environment(config.environment, config.course);
  config.environment = env.name;
  config.course = env.course;

  gpbas::Dataset data;
  if (data_path.empty()) {
    data = gpbas::generate_training_data(env, config.seed);
  } else {
    const auto loaded = gpbas::dataset_from_csv(
        gpbas::read_text_file(resolve_path(data_path).string()),
        env.state_dim + env.control_dim);
    if (static_cast<int>(loaded.target_names.size()) !=
        static_cast<int>(gpbas::dataset_target_names(env).size())) {
      throw std::invalid_argument("dataset target columns do not match the environment");
    }
    data = loaded.data;
  }
  const int total_rows = data.size();

  if (config.subsample > 0 && config.subsample < data.size()) {
    std::vector<int> indices(static_cast<std::size_t>(data.size()));
    std::iota(indices.begin(), indices.end(), 0);
    gpbas::Rng rng = gpbas::Rng::substream(config.seed, "subsample");
    shuffle_indices(indices, rng);
    indices.resize(static_cast<std::size_t>(config.subsample));
    std::sort(indices.begin(), indices.end());
    data = select_rows(data, indices);
  }

  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  gpbas::Rng split_rng = gpbas::Rng::substream(config.seed, "holdout");
  shuffle_indices(order, split_rng);
  const int holdout_rows =
      std::min(data.size() - 1,
               static_cast<int>(std::lround(config.holdout_fraction * data.size())));
  std::vector<int> train_idx(order.begin(), order.end() - holdout_rows);
  std::vector<int> hold_idx(order.end() - holdout_rows, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(hold_idx.begin(), hold_idx.end());
  const gpbas::Dataset train_set = select_rows(data, train_idx);

  gpbas::FitOptions fit;
  fit.center_targets = config.center_targets;
  auto hyper = initial_hyper(train_set);
  if (config.optimizer_iters > 0) {
    gpbas::HyperOptOptions ho;
    ho.max_iters = config.optimizer_iters;
    hyper = gpbas::optimize_hyperparameters(train_set, hyper, ho, fit);
  }

  gpbas::Vector holdout_rmse = gpbas::Vector::Zero(data.output_dim());
  if (holdout_rows > 0) {
    const gpbas::GpModel split_model = gpbas::gp_fit(train_set, hyper, fit);
    holdout_rmse = rmse_per_output(split_model, select_rows(data, hold_idx));
  }

  const gpbas::GpModel model = gpbas::gp_fit(data, hyper, fit);
  const gpbas::Vector train_rmse = rmse_per_output(model, data);
  const double lml = gpbas::log_marginal_likelihood(model).value;

  json metadata{{"environment", env.name},
                {"course", env.course},
                {"seed", config.seed},
                {"target_mode", mode_name(env.target_mode)},
                {"rows_total", total_rows},
                {"rows_used", data.size()},
                {"holdout_rows", holdout_rows},
                {"optimizer_iters", config.optimizer_iters},
                {"center_targets", config.center_targets},
                {"train_rmse", gpbas::vector_to_json(train_rmse)},
                {"holdout_rmse", gpbas::vector_to_json(holdout_rmse)},
                {"log_marginal_likelihood", lml}};

  const auto dir = resolve_output_dir(config.output_dir);
  write_file(dir / "model.json", gpbas::dump_json(gpbas::gp_model_to_json(model, metadata)));
  write_file(dir / "train_report.json", gpbas::dump_json(metadata));
  write_file(dir / "config.json", gpbas::dump_json(gpbas::experiment_config_to_json(config)));
  std::cout << "holdout rmse:";
  for (int e = 0; e < holdout_rmse.size(); ++e) std::cout << " " << holdout_rmse(e);
  std::cout << "\n";
  return kExitOk;
}

int cmd_lqr(gpbas::ExperimentConfig config, const std::string& model_path) {
  WallClock clock("lqr");
  LoadedModel loaded = load_model(model_path);
  const gpbas::Environment& env = loaded.env;
  config.environment = env.name;
  config.course = env.course;

  const double dt = config.dt > 0.0 ? config.dt : env.dt;
  const gpbas::BarrierConfig bc = barrier_from_config(config, env, 0.5);
  const auto dynamics = gpbas::learned_model(env, loaded.gp);
  const gpbas::EmbeddedModel model =
      gpbas::make_embedded_model(dynamics, env.constraints, bc, dt);
  const gpbas::QuadraticCost cost =
      gpbas::embed_cost(model, env.state_weight, env.control_weight, env.terminal_weight,
                        env.goal, config.barrier_weight);

  const auto disc = env.name == "linear" ? gpbas::Discretization::kZeroOrderHold
                                         : gpbas::Discretization::kEuler;
  const gpbas::LqrGains gains = gpbas::embedded_lqr(model, cost, disc);
  const gpbas::Policy policy = gpbas::lqr_policy(gains, cost.goal);

  const auto on_model = gpbas::rollout_policy(model, policy, model.make_state(env.x0),
                                              config.horizon, true, &cost);
  const auto on_true = gpbas::rollout_policy_on_plant(*env.truth, model, policy, env.x0,
                                                      config.horizon, true, &cost);

  const auto dir = resolve_output_dir(config.output_dir);
  const auto stored = gpbas::store_lqr_policy(env.name, env.course, bc, dt, gains, cost.goal);
  write_file(dir / "policy.json", gpbas::dump_json(gpbas::stored_policy_to_json(stored)));
  write_file(dir / "trajectory_model.csv", gpbas::trajectory_to_csv(on_model, model, &cost));
  write_file(dir / "trajectory_true.csv", gpbas::trajectory_to_csv(on_true, model, &cost));

  json metrics{{"environment", env.name},
               {"course", env.course},
               {"seed", config.seed},
               {"dt", dt},
               {"horizon", config.horizon},
               {"gamma", bc.gamma},
               {"phi", bc.quantile_phi},
               {"barrier_weight", config.barrier_weight},
               {"dare_iterations", gains.iterations},
               {"model", rollout_summary(on_model, env)},
               {"true", rollout_summary(on_true, env)}};
  write_file(dir / "metrics.json", gpbas::dump_json(metrics));
  write_file(dir / "config.json", gpbas::dump_json(gpbas::experiment_config_to_json(config)));
  std::cout << "min_h on true plant: " << on_true.min_h << "\n";
  return kExitOk;
}

int cmd_ddp(gpbas::ExperimentConfig config, const std::string& model_path) {
  WallClock clock("ddp");
  LoadedModel loaded = load_model(model_path);
  const gpbas::Environment& env = loaded.env;
  config.environment = env.name;
  config.course = env.course;

  const double dt = config.dt > 0.0 ? config.dt : env.dt;
  const gpbas::BarrierConfig bc = barrier_from_config(config, env, 0.0);
  const auto dynamics = gpbas::learned_model(env, loaded.gp);
  const gpbas::EmbeddedModel model =
      gpbas::make_embedded_model(dynamics, env.constraints, bc, dt);
  const gpbas::QuadraticCost cost =
      gpbas::embed_cost(model, env.state_weight, env.control_weight, env.terminal_weight,
                        env.goal, config.barrier_weight);

  const std::vector<gpbas::Vector> u_init(
      static_cast<std::size_t>(config.horizon),
      gpbas::Vector::Zero(model.control_dim()));
  const gpbas::DdpSolution solution = gpbas::ddp_optimize(
      model, cost, model.make_state(env.x0), u_init, gpbas::ddp_options_from_config(config));

  gpbas::RolloutResult nominal;
  nominal.states = solution.states;
  nominal.controls = solution.controls;
  nominal.min_h = std::numeric_limits<double>::infinity();
  for (const auto& s : solution.states) {
    nominal.min_h = std::min(nominal.min_h, model.safety.min_value(s.x));
  }
  nominal.cost = solution.cost_history.empty() ? 0.0 : solution.cost_history.back();

  const auto on_true =
      gpbas::rollout_policy_on_plant(*env.truth, model, gpbas::ddp_policy(solution),
                                     env.x0, config.horizon, true, &cost);

  const auto dir = resolve_output_dir(config.output_dir);
  const auto stored = gpbas::store_ddp_policy(env.name, env.course, bc, dt, solution);
  write_file(dir / "policy.json", gpbas::dump_json(gpbas::stored_policy_to_json(stored)));
  write_file(dir / "trajectory_model.csv", gpbas::trajectory_to_csv(nominal, model, &cost));
  write_file(dir / "trajectory_true.csv", gpbas::trajectory_to_csv(on_true, model, &cost));

  std::string history = "iteration,cost\n";
  for (std::size_t i = 0; i < solution.cost_history.size(); ++i) {
    history += std::to_string(i) + "," + gpbas::format_double(solution.cost_history[i]) + "\n";
  }
  write_file(dir / "cost_history.csv", history);

  json metrics{{"environment", env.name},
               {"course", env.course},
               {"seed", config.seed},
               {"dt", dt},
               {"horizon", config.horizon},
               {"gamma", bc.gamma},
               {"phi", bc.quantile_phi},
               {"barrier_weight", config.barrier_weight},
               {"status", status_name(solution.status)},
               {"iterations", solution.iterations},
               {"final_cost", nominal.cost},
               {"expected_decrease", solution.delta_v},
               {"qu_norm", solution.qu_norm},
               {"model", rollout_summary(nominal, env)},
               {"true", rollout_summary(on_true, env)}};
  write_file(dir / "metrics.json", gpbas::dump_json(metrics));
  write_file(dir / "config.json", gpbas::dump_json(gpbas::experiment_config_to_json(config)));

  std::cout << "ddp " << status_name(solution.status) << " after " << solution.iterations
            << " iterations, cost " << nominal.cost << ", min_h on true plant "
            << on_true.min_h << "\n";
  return solution.status == gpbas::DdpStatus::kConverged ? kExitOk : kExitNoConvergence;
}

struct PolicyBundle {
  gpbas::EmbeddedModel model;
  gpbas::Policy policy;
  gpbas::QuadraticCost cost;
  gpbas::Environment env;
  int natural_horizon = 0;
};

PolicyBundle load_policy_bundle(const std::string& model_path,
                                const std::string& policy_path) {
  LoadedModel loaded = load_model(model_path);
  const gpbas::StoredPolicy stored =
      gpbas::stored_policy_from_json(parse_json_file(policy_path));
  if (stored.environment != loaded.env.name || stored.course != loaded.env.course) {
    throw std::invalid_argument("policy was solved for " + stored.environment + "/" +
                                stored.course + " but the model belongs to " +
                                loaded.env.name + "/" + loaded.env.course);
  }
  PolicyBundle out{
      gpbas::make_embedded_model(gpbas::learned_model(loaded.env, loaded.gp),
                                 loaded.env.constraints, stored.barrier, stored.dt),
      stored.policy(),
      {},
      loaded.env,
      0};
  out.cost = gpbas::embed_cost(out.model, out.env.state_weight, out.env.control_weight,
                               out.env.terminal_weight, out.env.goal, 0.0);
  out.natural_horizon = stored.kind == "ddp" ? static_cast<int>(stored.controls.size()) : 0;
  return out;
}

int cmd_simulate(gpbas::ExperimentConfig config, const std::string& model_path,
                 const std::string& policy_path, const std::string& plant,
                 bool horizon_given) {
  WallClock clock("simulate");
  PolicyBundle bundle = load_policy_bundle(model_path, policy_path);
  config.environment = bundle.env.name;
  config.course = bundle.env.course;
  const int horizon = (!horizon_given && bundle.natural_horizon > 0)
                          ? bundle.natural_horizon
                          : config.horizon;

  gpbas::RolloutResult rollout;
  if (plant == "model") {
    rollout = gpbas::rollout_policy(bundle.model, bundle.policy,
                                    bundle.model.make_state(bundle.env.x0), horizon, true,
                                    &bundle.cost);
  } else if (plant == "true") {
    rollout = gpbas::rollout_policy_on_plant(*bundle.env.truth, bundle.model, bundle.policy,
                                             bundle.env.x0, horizon, true, &bundle.cost);
  } else {
    throw std::invalid_argument("--plant must be 'model' or 'true'");
  }

  const auto dir = resolve_output_dir(config.output_dir);
  write_file(dir / "trajectory.csv",
             gpbas::trajectory_to_csv(rollout, bundle.model, &bundle.cost));
  json report = rollout_summary(rollout, bundle.env);
  report["plant"] = plant;
  report["horizon"] = horizon;
  write_file(dir / "sim_report.json", gpbas::dump_json(report));
  write_file(dir / "config.json", gpbas::dump_json(gpbas::experiment_config_to_json(config)));
  std::cout << "min_h " << rollout.min_h << ", violation_step " << rollout.violation_step
            << "\n";
  return kExitOk;
}

int cmd_verify(gpbas::ExperimentConfig config, const std::string& model_path,
               const std::string& policy_path, int samples, bool horizon_given) {
  WallClock clock("verify");
  PolicyBundle bundle = load_policy_bundle(model_path, policy_path);
  config.environment = bundle.env.name;
  config.course = bundle.env.course;
  const int horizon = (!horizon_given && bundle.natural_horizon > 0)
                          ? bundle.natural_horizon
                          : config.horizon;
  const double rho = config.rho >= 0.0 ? config.rho : 0.95;
  gpbas::require(samples > 0, "sample count must be positive");

  const gpbas::SafetyReport report = gpbas::mc_rollout(
      bundle.model, bundle.policy, bundle.env.x0, horizon, samples, config.seed);

  const double se = std::sqrt(rho * (1.0 - rho) / samples);
  const double threshold = rho - 2.0 * se;
  json out{{"report", gpbas::safety_report_to_json(report)},
           {"rho", rho},
           {"phi", bundle.model.config.quantile_phi},
           {"seed", config.seed},
           {"binomial_se", se},
           {"threshold", threshold},
           {"meets_threshold", report.fraction_safe >= threshold}};

  const auto dir = resolve_output_dir(config.output_dir);
  write_file(dir / "safety_report.json", gpbas::dump_json(out));
  write_file(dir / "config.json", gpbas::dump_json(gpbas::experiment_config_to_json(config)));
  std::cout << "fraction_safe " << report.fraction_safe << " (threshold " << threshold
            << ")\n";
  return kExitOk;
}

int cmd_export(const std::string& run_dir) {
  WallClock clock("export");
  const auto dir = resolve_path(run_dir);
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("not a directory: " + dir.string());
  }

  std::vector<std::filesystem::path> entries;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) entries.push_back(entry.path());
  }
  std::sort(entries.begin(), entries.end());

  json documents = json::object();
  json files = json::array();
  for (const auto& path : entries) {
    const std::string name = path.filename().string();
    if (name == "report.json") continue;
    if (path.extension() == ".json") {
      documents[name] = json::parse(gpbas::read_text_file(path.string()));
    } else {
      const std::string text = gpbas::read_text_file(path.string());
      files.push_back(json{{"name", name},
                           {"bytes", text.size()},
                           {"lines", std::count(text.begin(), text.end(), '\n')}});
    }
  }
  json report{{"directory", run_dir}, {"documents", documents}, {"files", files}};
  write_file(dir / "report.json", gpbas::dump_json(report));
  return kExitOk;
}

struct CommonArgs {
  std::string config_path;
  std::string env;
  std::string course;
  std::string out;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "JSON experiment config");
  sub->add_option("--env", args.env, "environment: linear, dubins or quadrotor");
  sub->add_option("--course", args.course, "course label within the environment");
  sub->add_option("--seed", args.seed, "master seed for every random substream");
  sub->add_option("--out", args.out, "output directory");
}

gpbas::ExperimentConfig build_config(const CLI::App* sub, const CommonArgs& args) {
  gpbas::ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = gpbas::experiment_config_from_json(
        parse_json_file(args.config_path));
  }
  if (sub->count("--env") > 0) config.environment = args.env;
  if (sub->count("--course") > 0) config.course = args.course;
  if (sub->count("--seed") > 0) config.seed = args.seed;
  if (sub->count("--out") > 0) config.output_dir = args.out;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe trajectory optimization with learned dynamics"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "generate a training dataset");
  add_common(gen, gen_args);

  CommonArgs train_args;
  std::string train_data;
  int train_iters = 0;
  int train_subsample = 0;
  double train_holdout = 0.0;
  bool train_no_center = false;
  auto* train = app.add_subcommand("train", "optimize GP hyperparameters and save the model");
  add_common(train, train_args);
  train->add_option("--data", train_data, "dataset CSV (default: regenerate from the seed)");
  train->add_option("--iters", train_iters, "optimizer iterations");
  train->add_option("--subsample", train_subsample, "train on this many rows (0 = all)");
  train->add_option("--holdout", train_holdout, "holdout fraction for validation");
  train->add_flag("--no-center", train_no_center, "disable target centering");

  CommonArgs lqr_args;
  std::string lqr_model;
  double lqr_gamma = 0.0, lqr_phi = 0.0, lqr_rho = 0.0, lqr_weight = 0.0;
  int lqr_horizon = 0;
  auto* lqr = app.add_subcommand("lqr", "solve the safety-embedded LQR and roll it out");
  add_common(lqr, lqr_args);
  lqr->add_option("--model", lqr_model, "trained model JSON")->required();
  lqr->add_option("--gamma", lqr_gamma, "barrier-state decay");
  lqr->add_option("--phi", lqr_phi, "uncertainty quantile multiplier");
  lqr->add_option("--rho", lqr_rho, "risk level; converts to the quantile multiplier");
  lqr->add_option("--barrier-weight", lqr_weight, "cost weight on the barrier state");
  lqr->add_option("--horizon", lqr_horizon, "rollout steps");

  CommonArgs ddp_args;
  std::string ddp_model;
  double ddp_gamma = 0.0, ddp_phi = 0.0, ddp_rho = 0.0, ddp_weight = 0.0, ddp_eps = 0.0;
  int ddp_horizon = 0, ddp_iters = 0;
  auto* ddp = app.add_subcommand("ddp", "trajectory optimization on the embedded model");
  add_common(ddp, ddp_args);
  ddp->add_option("--model", ddp_model, "trained model JSON")->required();
  ddp->add_option("--gamma", ddp_gamma, "barrier-state decay");
  ddp->add_option("--phi", ddp_phi, "uncertainty quantile multiplier");
  ddp->add_option("--rho", ddp_rho, "risk level; converts to the quantile multiplier");
  ddp->add_option("--barrier-weight", ddp_weight, "cost weight on the barrier state");
  ddp->add_option("--horizon", ddp_horizon, "trajectory steps");
  ddp->add_option("--max-iters", ddp_iters, "solver iteration cap");
  ddp->add_option("--epsilon", ddp_eps, "expected-improvement stop tolerance");

  CommonArgs sim_args;
  std::string sim_model, sim_policy, sim_plant = "model";
  int sim_horizon = 0;
  auto* sim = app.add_subcommand("simulate", "replay a stored policy");
  add_common(sim, sim_args);
  sim->add_option("--model", sim_model, "trained model JSON")->required();
  sim->add_option("--policy", sim_policy, "stored policy JSON")->required();
  sim->add_option("--plant", sim_plant, "'model' or 'true'");
  sim->add_option("--horizon", sim_horizon, "rollout steps");

  CommonArgs verify_args;
  std::string verify_model, verify_policy;
  int verify_samples = 2000, verify_horizon = 0;
  double verify_rho = 0.0;
  auto* verify = app.add_subcommand("verify", "Monte Carlo safety verification");
  add_common(verify, verify_args);
  verify->add_option("--model", verify_model, "trained model JSON")->required();
  verify->add_option("--policy", verify_policy, "stored policy JSON")->required();
  verify->add_option("--samples", verify_samples, "Monte Carlo sample count");
  verify->add_option("--rho", verify_rho, "target safety level");
  verify->add_option("--horizon", verify_horizon, "rollout steps");

  std::string export_dir;
  auto* exp = app.add_subcommand("export", "bundle a run directory into report.json");
  exp->add_option("--dir", export_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(build_config(gen, gen_args));
    }
    if (train->parsed()) {
      auto config = build_config(train, train_args);
      if (train->count("--iters") > 0) config.optimizer_iters = train_iters;
      if (train->count("--subsample") > 0) config.subsample = train_subsample;
      if (train->count("--holdout") > 0) config.holdout_fraction = train_holdout;
      if (train_no_center) config.center_targets = false;
      return cmd_train(config, train_data);
    }
    if (lqr->parsed()) {
      auto config = build_config(lqr, lqr_args);
      if (lqr->count("--gamma") > 0) config.gamma = lqr_gamma;
      if (lqr->count("--phi") > 0) config.quantile_phi = lqr_phi;
      if (lqr->count("--rho") > 0) config.rho = lqr_rho;
      if (lqr->count("--barrier-weight") > 0) config.barrier_weight = lqr_weight;
      if (lqr->count("--horizon") > 0) config.horizon = lqr_horizon;
      return cmd_lqr(config, lqr_model);
    }
    if (ddp->parsed()) {
      auto config = build_config(ddp, ddp_args);
      if (ddp->count("--gamma") > 0) config.gamma = ddp_gamma;
      if (ddp->count("--phi") > 0) config.quantile_phi = ddp_phi;
      if (ddp->count("--rho") > 0) config.rho = ddp_rho;
      if (ddp->count("--barrier-weight") > 0) config.barrier_weight = ddp_weight;
      if (ddp->count("--horizon") > 0) config.horizon = ddp_horizon;
      if (ddp->count("--max-iters") > 0) config.max_iters = ddp_iters;
      if (ddp->count("--epsilon") > 0) config.epsilon = ddp_eps;
      return cmd_ddp(config, ddp_model);
    }
    if (sim->parsed()) {
      auto config = build_config(sim, sim_args);
      if (sim->count("--horizon") > 0) config.horizon = sim_horizon;
      return cmd_simulate(config, sim_model, sim_policy, sim_plant,
                          sim->count("--horizon") > 0);
    }
    if (verify->parsed()) {
      auto config = build_config(verify, verify_args);
      if (verify->count("--rho") > 0) config.rho = verify_rho;
      if (verify->count("--horizon") > 0) config.horizon = verify_horizon;
      return cmd_verify(config, verify_model, verify_policy, verify_samples,
                        verify->count("--horizon") > 0);
    }
    if (exp->parsed()) {
      return cmd_export(export_dir);
    }
  } catch (const gpbas::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const gpbas::BoundaryViolation& e) {
    std::cerr << "safety violation: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
