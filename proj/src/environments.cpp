#include "gpbas/environments.hpp"

#include <json.hpp>

#include <cmath>
#include <utility>

#include "gpbas/rng.hpp"

namespace gpbas {

namespace {

using nlohmann::json;

// Quadrotor constants. The inertia is diagonal; control 0 is thrust deviation
// from hover so u = 0 is an equilibrium.
constexpr double kQuadMass = 0.5;
constexpr double kGravity = 9.81;
constexpr double kInertia[3] = {0.01, 0.01, 0.01};

constexpr double kWheelRadius = 0.2;
constexpr double kAxleHalfWidth = 0.2;

Vector linear_rhs(const Vector& x, const Vector& u) {
  Vector dx(2);
  dx[0] = x[0] - 5.0 * x[1];
  dx[1] = -x[1] + u[0];
  return dx;
}

DynamicsJacobians linear_jacobians(const Vector&, const Vector&) {
  Matrix a(2, 2);
  a << 1.0, -5.0, 0.0, -1.0;
  Matrix b(2, 1);
  b << 0.0, 1.0;
  return {a, b};
}

Vector dubins_rhs(const Vector& x, const Vector& u) {
  const double speed = 0.5 * kWheelRadius * (u[0] + u[1]);
  Vector dx(3);
  dx[0] = speed * std::cos(x[2]);
  dx[1] = speed * std::sin(x[2]);
  dx[2] = kWheelRadius / (2.0 * kAxleHalfWidth) * (u[0] - u[1]);
  return dx;
}

DynamicsJacobians dubins_jacobians(const Vector& x, const Vector& u) {
  const double speed = 0.5 * kWheelRadius * (u[0] + u[1]);
  const double c = std::cos(x[2]);
  const double s = std::sin(x[2]);
  Matrix a = Matrix::Zero(3, 3);
  a(0, 2) = -speed * s;
  a(1, 2) = speed * c;
  Matrix b(3, 2);
  b(0, 0) = 0.5 * kWheelRadius * c;
  b(0, 1) = b(0, 0);
  b(1, 0) = 0.5 * kWheelRadius * s;
  b(1, 1) = b(1, 0);
  b(2, 0) = kWheelRadius / (2.0 * kAxleHalfWidth);
  b(2, 1) = -b(2, 0);
  return {a, b};
}

// State: position (0-2), attitude phi/theta/psi (3-5), velocity (6-8), body
// rates (9-11). Controls: thrust deviation from m*g, then body torques.
Vector quadrotor_rhs(const Vector& x, const Vector& u) {
  const double phi = x[3], theta = x[4], psi = x[5];
  const double wx = x[9], wy = x[10], wz = x[11];
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double cpsi = std::cos(psi), spsi = std::sin(psi);
  const double tth = sth / cth;
  const double accel = (u[0] + kQuadMass * kGravity) / kQuadMass;

  Vector dx(12);
  dx.segment(0, 3) = x.segment(6, 3);
  dx[3] = wx + sphi * tth * wy + cphi * tth * wz;
  dx[4] = cphi * wy - sphi * wz;
  dx[5] = (sphi * wy + cphi * wz) / cth;
  dx[6] = accel * (cphi * sth * cpsi + sphi * spsi);
  dx[7] = accel * (cphi * sth * spsi - sphi * cpsi);
  dx[8] = accel * cphi * cth - kGravity;
  dx[9] = (u[1] + (kInertia[1] - kInertia[2]) * wy * wz) / kInertia[0];
  dx[10] = (u[2] + (kInertia[2] - kInertia[0]) * wx * wz) / kInertia[1];
  dx[11] = (u[3] + (kInertia[0] - kInertia[1]) * wx * wy) / kInertia[2];
  return dx;
}

DynamicsJacobians quadrotor_jacobians(const Vector& x, const Vector& u) {
  const double phi = x[3], theta = x[4], psi = x[5];
  const double wx = x[9], wy = x[10], wz = x[11];
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double cpsi = std::cos(psi), spsi = std::sin(psi);
  const double tth = sth / cth;
  const double sec2 = 1.0 / (cth * cth);
  const double accel = (u[0] + kQuadMass * kGravity) / kQuadMass;

  Matrix a = Matrix::Zero(12, 12);
  Matrix b = Matrix::Zero(12, 4);

  a.block(0, 6, 3, 3).setIdentity();

  a(3, 3) = cphi * tth * wy - sphi * tth * wz;
  a(3, 4) = (sphi * wy + cphi * wz) * sec2;
  a(3, 9) = 1.0;
  a(3, 10) = sphi * tth;
  a(3, 11) = cphi * tth;
  a(4, 3) = -sphi * wy - cphi * wz;
  a(4, 10) = cphi;
  a(4, 11) = -sphi;
  a(5, 3) = (cphi * wy - sphi * wz) / cth;
  a(5, 4) = (sphi * wy + cphi * wz) * sth * sec2;
  a(5, 10) = sphi / cth;
  a(5, 11) = cphi / cth;

  // Third body-to-world rotation column and its attitude partials.
  const Vector c3 = (Vector(3) << cphi * sth * cpsi + sphi * spsi,
                     cphi * sth * spsi - sphi * cpsi, cphi * cth)
                        .finished();
  a(6, 3) = accel * (-sphi * sth * cpsi + cphi * spsi);
  a(7, 3) = accel * (-sphi * sth * spsi - cphi * cpsi);
  a(8, 3) = accel * (-sphi * cth);
  a(6, 4) = accel * (cphi * cth * cpsi);
  a(7, 4) = accel * (cphi * cth * spsi);
  a(8, 4) = accel * (-cphi * sth);
  a(6, 5) = accel * (-cphi * sth * spsi + sphi * cpsi);
  a(7, 5) = accel * (cphi * sth * cpsi + sphi * spsi);
  b.block(6, 0, 3, 1) = c3 / kQuadMass;

  a(9, 10) = (kInertia[1] - kInertia[2]) * wz / kInertia[0];
  a(9, 11) = (kInertia[1] - kInertia[2]) * wy / kInertia[0];
  a(10, 9) = (kInertia[2] - kInertia[0]) * wz / kInertia[1];
  a(10, 11) = (kInertia[2] - kInertia[0]) * wx / kInertia[1];
  a(11, 9) = (kInertia[0] - kInertia[1]) * wy / kInertia[2];
  a(11, 10) = (kInertia[0] - kInertia[1]) * wx / kInertia[2];
  b(9, 1) = 1.0 / kInertia[0];
  b(10, 2) = 1.0 / kInertia[1];
  b(11, 3) = 1.0 / kInertia[2];
  return {a, b};
}

const char* kLinearDefault = R"({
  "environment": "linear",
  "course": "default",
  "dt": 0.02,
  "x0": [4.0, 0.0],
  "goal": [0.0, 0.0],
  "obstacles": [
    {"type": "circle", "center": [2.0, 2.2], "radius": 1.0, "position_indices": [0, 1]}
  ],
  "cost": {
    "state_weight": [0.1, 0.1],
    "control_weight": [0.01],
    "terminal_weight": [0.1, 0.1]
  },
  "recipe": {"kind": "uniform", "count": 125, "low": -10.0, "high": 10.0}
}
)";

const char* kDubinsSingle = R"({
  "environment": "dubins",
  "course": "single",
  "dt": 0.02,
  "x0": [0.0, 0.0, 0.7853981633974483],
  "goal": [2.0, 2.0, 0.7853981633974483],
  "obstacles": [
    {"type": "circle", "center": [1.0, 1.0], "radius": 0.4, "position_indices": [0, 1]}
  ],
  "cost": {
    "state_weight": [0.1, 0.1, 0.01],
    "control_weight": [0.01, 0.01],
    "terminal_weight": [100.0, 100.0, 5.0]
  },
  "recipe": {"kind": "sinusoidal", "trajectories": 4, "steps": 74}
}
)";

const char* kDubinsMulti = R"({
  "environment": "dubins",
  "course": "multi",
  "dt": 0.02,
  "x0": [0.0, 0.0, 0.7853981633974483],
  "goal": [2.0, 2.0, 0.7853981633974483],
  "obstacles": [
    {"type": "circle", "center": [0.7, 0.7], "radius": 0.3, "position_indices": [0, 1]},
    {"type": "circle", "center": [1.45, 1.15], "radius": 0.3, "position_indices": [0, 1]},
    {"type": "circle", "center": [0.9, 1.7], "radius": 0.25, "position_indices": [0, 1]}
  ],
  "cost": {
    "state_weight": [0.1, 0.1, 0.01],
    "control_weight": [0.01, 0.01],
    "terminal_weight": [100.0, 100.0, 5.0]
  },
  "recipe": {"kind": "sinusoidal", "trajectories": 4, "steps": 74}
}
)";

const char* kQuadrotorDefault = R"({
  "environment": "quadrotor",
  "course": "default",
  "dt": 0.01,
  "x0": [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
  "goal": [2.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
  "obstacles": [
    {"type": "circle", "center": [1.0, 0.0, 1.0], "radius": 0.35, "position_indices": [0, 1, 2]}
  ],
  "cost": {
    "state_weight": [0.5, 0.5, 0.5, 0.2, 0.2, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
    "control_weight": [0.2, 50.0, 50.0, 50.0],
    "terminal_weight": [100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 2.0, 2.0, 2.0]
  },
  "recipe": {"kind": "excitation", "trajectories": 10, "steps": 150}
}
)";

Vector json_vector(const json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Matrix json_diag(const json& j) {
  return Matrix(json_vector(j).asDiagonal());
}

SafetyFunction parse_obstacles(const json& list) {
  SafetyFunction safety;
  for (const auto& item : list) {
    const std::string type = item.at("type").get<std::string>();
    require(type == "circle", "unknown obstacle type: " + type);
    Vector center = json_vector(item.at("center"));
    double radius = item.at("radius").get<double>();
    if (item.contains("margin")) radius += item["margin"].get<double>();
    std::vector<int> indices;
    for (const auto& idx : item.at("position_indices")) indices.push_back(idx.get<int>());
    safety.constraints.push_back(
        ball_constraint(center, radius, indices,
                        "circle r=" + std::to_string(radius)));
  }
  return safety;
}

DataRecipe parse_recipe(const json& j) {
  DataRecipe recipe;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    recipe.kind = DataRecipe::Kind::kUniform;
    recipe.count = j.at("count").get<int>();
    recipe.low = j.at("low").get<double>();
    recipe.high = j.at("high").get<double>();
  } else if (kind == "sinusoidal" || kind == "excitation") {
    recipe.kind = kind == "sinusoidal" ? DataRecipe::Kind::kSinusoidal
                                       : DataRecipe::Kind::kExcitation;
    recipe.trajectories = j.at("trajectories").get<int>();
    recipe.steps = j.at("steps").get<int>();
    recipe.count = recipe.trajectories * recipe.steps;
  } else {
    throw std::invalid_argument("unknown data recipe: " + kind);
  }
  return recipe;
}

}  // namespace

Environment environment_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  const std::string family = j.at("environment").get<std::string>();

  Environment env;
  env.name = family;
  env.course = j.at("course").get<std::string>();
  env.dt = j.at("dt").get<double>();
  env.x0 = json_vector(j.at("x0"));
  env.goal = json_vector(j.at("goal"));
  env.constraints = parse_obstacles(j.at("obstacles"));
  env.state_weight = json_diag(j.at("cost").at("state_weight"));
  env.control_weight = json_diag(j.at("cost").at("control_weight"));
  env.terminal_weight = json_diag(j.at("cost").at("terminal_weight"));
  env.recipe = parse_recipe(j.at("recipe"));

  if (family == "linear") {
    env.state_dim = 2;
    env.control_dim = 1;
    env.target_mode = TargetMode::kDerivative;
    env.truth = std::make_shared<AnalyticDynamics>(2, 1, TargetMode::kDerivative,
                                                   linear_rhs, linear_jacobians);
    env.state_names = {"x1", "x2"};
    env.control_names = {"u1"};
  } else if (family == "dubins") {
    env.state_dim = 3;
    env.control_dim = 2;
    env.target_mode = TargetMode::kDelta;
    env.truth = std::make_shared<AnalyticDynamics>(3, 2, TargetMode::kDerivative,
                                                   dubins_rhs, dubins_jacobians);
    env.state_names = {"x", "y", "theta"};
    env.control_names = {"u1", "u2"};
  } else if (family == "quadrotor") {
    env.state_dim = 12;
    env.control_dim = 4;
    env.target_mode = TargetMode::kDerivative;
    env.truth = std::make_shared<AnalyticDynamics>(12, 4, TargetMode::kDerivative,
                                                   quadrotor_rhs, quadrotor_jacobians);
    env.learned_rows = {6, 7, 8, 9, 10, 11};
    env.state_names = {"px", "py", "pz", "phi", "theta", "psi",
                       "vx", "vy", "vz", "wx", "wy", "wz"};
    env.control_names = {"thrust_dev", "tau_x", "tau_y", "tau_z"};
  } else {
    throw std::invalid_argument("unknown environment: " + family);
  }

  require(env.x0.size() == env.state_dim, "x0 dimension mismatch in course config");
  require(env.goal.size() == env.state_dim, "goal dimension mismatch in course config");
  require(env.state_weight.rows() == env.state_dim, "state weight dimension mismatch");
  require(env.control_weight.rows() == env.control_dim, "control weight dimension mismatch");
  require(env.constraints.is_safe(env.x0), "course x0 is inside an obstacle");
  require(env.constraints.is_safe(env.goal), "course goal is inside an obstacle");
  return env;
}

std::string course_json(const std::string& environment, const std::string& course) {
  if (environment == "linear" && (course.empty() || course == "default")) {
    return kLinearDefault;
  }
  if (environment == "dubins" && (course.empty() || course == "single")) {
    return kDubinsSingle;
  }
  if (environment == "dubins" && course == "multi") {
    return kDubinsMulti;
  }
  if (environment == "quadrotor" && (course.empty() || course == "default")) {
    return kQuadrotorDefault;
  }
  throw std::invalid_argument("unknown course '" + course + "' for environment '" +
                              environment + "'");
}

std::vector<std::pair<std::string, std::string>> course_catalog() {
  return {{"linear", "default"},
          {"dubins", "single"},
          {"dubins", "multi"},
          {"quadrotor", "default"}};
}

Environment linear_env() { return environment_from_json(kLinearDefault); }

Environment dubins_env(const std::string& course) {
  return environment_from_json(course_json("dubins", course));
}

Environment quadrotor_env() { return environment_from_json(kQuadrotorDefault); }

std::vector<std::string> environment_names() { return {"linear", "dubins", "quadrotor"}; }

Environment make_environment(const std::string& name, const std::string& course) {
  if (name != "linear" && name != "dubins" && name != "quadrotor") {
    std::string names;
    for (const auto& n : environment_names()) names += (names.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown environment '" + name + "'; valid names: " + names);
  }
  return environment_from_json(course_json(name, course));
}

Dataset generate_training_data(const Environment& env, std::uint64_t seed) {
  const int n = env.state_dim;
  const int m = env.control_dim;
  const int n_out = env.learned_rows.empty() ? n : static_cast<int>(env.learned_rows.size());

  Dataset data;
  data.inputs.resize(env.recipe.count, n + m);
  data.targets.resize(env.recipe.count, n_out);

  auto record = [&](int row, const Vector& x, const Vector& u) {
    data.inputs.row(row).head(n) = x.transpose();
    data.inputs.row(row).tail(m) = u.transpose();
    Vector target;
    if (env.target_mode == TargetMode::kDerivative) {
      target = env.truth->eval(x, u).mean;
    } else {
      target = rk4_step(*env.truth, x, u, env.dt) - x;
    }
    if (env.learned_rows.empty()) {
      data.targets.row(row) = target.transpose();
    } else {
      for (int i = 0; i < n_out; ++i) data.targets(row, i) = target[env.learned_rows[i]];
    }
  };

  switch (env.recipe.kind) {
    case DataRecipe::Kind::kUniform: {
      Rng rng = Rng::substream(seed, "data");
      for (int row = 0; row < env.recipe.count; ++row) {
        Vector x(n), u(m);
        for (int d = 0; d < n; ++d) x[d] = rng.uniform(env.recipe.low, env.recipe.high);
        for (int d = 0; d < m; ++d) u[d] = rng.uniform(env.recipe.low, env.recipe.high);
        record(row, x, u);
      }
      break;
    }
    case DataRecipe::Kind::kSinusoidal: {
      int row = 0;
      for (int traj = 0; traj < env.recipe.trajectories; ++traj) {
        Rng rng = Rng::substream(seed, "data", traj);
        Vector x(3);
        x << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-M_PI, M_PI);
        const double base = rng.uniform(2.0, 5.0);
        const double amp = rng.uniform(1.0, 4.0);
        const double omega = 2.0 * M_PI * rng.uniform(0.5, 2.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        // Common-mode wave swings the wheel-speed sum through zero so the
        // dataset covers slow and stopped driving, not just cruise speed.
        const double surge_omega = 2.0 * M_PI * rng.uniform(0.4, 0.9);
        const double surge_phase = rng.uniform(0.0, 2.0 * M_PI);
        for (int k = 0; k < env.recipe.steps; ++k) {
          const double t = k * env.dt;
          const double wave = amp * std::sin(omega * t + phase);
          const double surge = base * std::sin(surge_omega * t + surge_phase);
          Vector u(2);
          u << base + surge + wave, base + surge - wave;
          record(row, x, u);
          x = rk4_step(*env.truth, x, u, env.dt);
          ++row;
        }
      }
      break;
    }
    case DataRecipe::Kind::kExcitation: {
      int row = 0;
      for (int traj = 0; traj < env.recipe.trajectories; ++traj) {
        Rng rng = Rng::substream(seed, "data", traj);
        Vector x(12);
        x << rng.uniform(-0.5, 2.5), rng.uniform(-1.0, 1.0), 1.0 + rng.uniform(-0.5, 0.5),
            rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
            rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
            rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2);
        const double thrust_amp = rng.uniform(0.2, 1.0);
        const double thrust_freq = rng.uniform(2.0, 6.0);
        const double thrust_phase = rng.uniform(0.0, 2.0 * M_PI);
        const double thrust_offset = rng.uniform(-0.3, 0.3);
        double torque_amp[3], torque_freq[3], torque_phase[3];
        for (int axis = 0; axis < 3; ++axis) {
          torque_amp[axis] = rng.uniform(0.005, 0.05);
          torque_freq[axis] = rng.uniform(2.0, 8.0);
          torque_phase[axis] = rng.uniform(0.0, 2.0 * M_PI);
        }
        for (int k = 0; k < env.recipe.steps; ++k) {
          const double t = k * env.dt;
          Vector u(4);
          u[0] = thrust_offset + thrust_amp * std::sin(thrust_freq * t + thrust_phase);
          for (int axis = 0; axis < 3; ++axis) {
            u[axis + 1] =
                torque_amp[axis] * std::sin(torque_freq[axis] * t + torque_phase[axis]);
          }
          record(row, x, u);
          x = rk4_step(*env.truth, x, u, env.dt);
          ++row;
        }
      }
      break;
    }
  }
  return data;
}

std::shared_ptr<const MeanDynamics> true_model(const Environment& env) {
  if (env.target_mode == TargetMode::kDelta) {
    return std::make_shared<Rk4DeltaDynamics>(env.truth, env.dt);
  }
  return env.truth;
}

std::shared_ptr<const MeanDynamics> learned_model(const Environment& env, GpModel gp) {
  if (env.learned_rows.empty()) {
    return std::make_shared<GpDynamics>(std::move(gp), env.state_dim, env.target_mode);
  }
  return std::make_shared<GreyBoxDynamics>(env.truth, std::move(gp), env.learned_rows);
}

std::vector<std::string> dataset_input_names(const Environment& env) {
  std::vector<std::string> names = env.state_names;
  names.insert(names.end(), env.control_names.begin(), env.control_names.end());
  return names;
}

std::vector<std::string> dataset_target_names(const Environment& env) {
  const std::string prefix =
      env.target_mode == TargetMode::kDerivative ? "ddt_" : "delta_";
  std::vector<std::string> names;
  if (env.learned_rows.empty()) {
    for (const auto& s : env.state_names) names.push_back(prefix + s);
  } else {
    for (int r : env.learned_rows) names.push_back(prefix + env.state_names[r]);
  }
  return names;
}

}  // namespace gpbas
