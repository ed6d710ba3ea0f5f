#include "gpbas/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gpbas {

namespace {

using nlohmann::json;

double parse_double(const std::string& token) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr == begin) {
    throw std::invalid_argument("not a number: '" + token + "'");
  }
  return value;
}

// Strict object reader: every key must be consumed by the caller.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : obj_(j), where_(std::move(where)) {
    if (!obj_.is_object()) {
      throw std::invalid_argument(where_ + " must be a JSON object");
    }
  }

  bool has(const std::string& key) {
    seen_.push_back(key);
    return obj_.contains(key);
  }

  const json& at(const std::string& key) {
    if (!has(key)) {
      throw std::invalid_argument(where_ + " is missing required key '" + key + "'");
    }
    return obj_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(where_ + " key '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  T require_key(const std::string& key) {
    const json& value = at(key);
    try {
      return value.get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(where_ + " key '" + key + "' has the wrong type");
    }
  }

  // Call last; rejects keys nobody asked about.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      bool known = false;
      for (const auto& k : seen_) {
        if (k == it.key()) {
          known = true;
          break;
        }
      }
      if (!known) {
        throw std::invalid_argument(where_ + " has unknown key '" + it.key() + "'");
      }
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::vector<std::string> seen_;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string token;
  std::stringstream ss(line);
  while (std::getline(ss, token, ',')) {
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) {
      token.erase(token.begin());
    }
    while (!token.empty() && (token.back() == ' ' || token.back() == '\r')) {
      token.pop_back();
    }
    out.push_back(token);
  }
  return out;
}

std::string combine_to_string(BarrierCombine combine) {
  return combine == BarrierCombine::kSingleSum ? "sum" : "per_constraint";
}

BarrierCombine combine_from_string(const std::string& s) {
  if (s == "sum") return BarrierCombine::kSingleSum;
  if (s == "per_constraint") return BarrierCombine::kPerConstraint;
  throw std::invalid_argument("unknown barrier combine mode '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  }
  return std::string(buf, ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("cannot read file: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::invalid_argument("cannot write file: " + path);
  }
  out << content;
  if (!out) {
    throw std::invalid_argument("write failed: " + path);
  }
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument("expected a JSON array of numbers");
    v(static_cast<int>(i)) = j[i].get<double>();
  }
  return v;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  ObjectReader r(j, "matrix");
  const int rows = r.require_key<int>("rows");
  const int cols = r.require_key<int>("cols");
  const json& data = r.at("data");
  r.finish();
  require(rows >= 0 && cols >= 0, "matrix dimensions must be nonnegative");
  if (!data.is_array() || static_cast<int>(data.size()) != rows * cols) {
    throw std::invalid_argument("matrix data length does not match rows*cols");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) {
      m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
    }
  }
  return m;
}

std::string dataset_to_csv(const Dataset& data, const std::vector<std::string>& input_names,
                           const std::vector<std::string>& target_names) {
  require(static_cast<int>(input_names.size()) == data.input_dim(),
          "input name count does not match the dataset");
  require(static_cast<int>(target_names.size()) == data.output_dim(),
          "target name count does not match the dataset");
  std::string out;
  for (std::size_t i = 0; i < input_names.size(); ++i) {
    if (i > 0) out += ',';
    out += input_names[i];
  }
  for (const auto& name : target_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (int r = 0; r < data.size(); ++r) {
    for (int c = 0; c < data.input_dim(); ++c) {
      if (c > 0) out += ',';
      out += format_double(data.inputs(r, c));
    }
    for (int c = 0; c < data.output_dim(); ++c) {
      out += ',';
      out += format_double(data.targets(r, c));
    }
    out += '\n';
  }
  return out;
}

LoadedDataset dataset_from_csv(const std::string& csv_text, int input_columns) {
  std::stringstream ss(csv_text);
  std::string line;
  if (!std::getline(ss, line)) {
    throw std::invalid_argument("dataset CSV is empty");
  }
  const auto header = split_csv_line(line);
  const int total = static_cast<int>(header.size());
  require(input_columns > 0 && input_columns < total,
          "input column count must split the CSV header");

  LoadedDataset out;
  out.input_names.assign(header.begin(), header.begin() + input_columns);
  out.target_names.assign(header.begin() + input_columns, header.end());

  std::vector<std::vector<double>> rows;
  while (std::getline(ss, line)) {
    if (line.empty() || line == "\r") continue;
    const auto tokens = split_csv_line(line);
    if (static_cast<int>(tokens.size()) != total) {
      throw std::invalid_argument("dataset CSV row has wrong column count");
    }
    std::vector<double> row(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) row[i] = parse_double(tokens[i]);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "dataset CSV has no data rows");

  const int n = static_cast<int>(rows.size());
  out.data.inputs.resize(n, input_columns);
  out.data.targets.resize(n, total - input_columns);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < input_columns; ++c) out.data.inputs(r, c) = rows[r][c];
    for (int c = input_columns; c < total; ++c) {
      out.data.targets(r, c - input_columns) = rows[r][c];
    }
  }
  return out;
}

nlohmann::json gp_model_to_json(const GpModel& model, nlohmann::json metadata) {
  json hyper = json::array();
  for (const auto& h : model.hyper) {
    hyper.push_back(json{{"signal_variance", h.signal_variance},
                         {"lengthscales", vector_to_json(h.lengthscales)},
                         {"noise_variance", h.noise_variance}});
  }
  return json{{"kind", "gp_model"},
              {"hyperparameters", hyper},
              {"target_offsets", vector_to_json(model.target_offsets)},
              {"inputs", matrix_to_json(model.data.inputs)},
              {"targets", matrix_to_json(model.data.targets)},
              {"metadata", std::move(metadata)}};
}

GpModel gp_model_from_json(const nlohmann::json& j, nlohmann::json* metadata) {
  ObjectReader r(j, "gp model");
  if (r.require_key<std::string>("kind") != "gp_model") {
    throw std::invalid_argument("not a gp_model document");
  }
  Dataset data;
  data.inputs = matrix_from_json(r.at("inputs"));
  data.targets = matrix_from_json(r.at("targets"));
  const json& hyper_json = r.at("hyperparameters");
  const Vector offsets = vector_from_json(r.at("target_offsets"));
  if (metadata != nullptr) *metadata = r.at("metadata");
  else r.has("metadata");
  r.finish();

  if (!hyper_json.is_array() ||
      static_cast<int>(hyper_json.size()) != data.output_dim()) {
    throw std::invalid_argument("hyperparameter count does not match target columns");
  }
  std::vector<KernelHyperparameters> hyper;
  for (const auto& hj : hyper_json) {
    ObjectReader hr(hj, "hyperparameters entry");
    KernelHyperparameters h;
    h.signal_variance = hr.require_key<double>("signal_variance");
    h.lengthscales = vector_from_json(hr.at("lengthscales"));
    h.noise_variance = hr.require_key<double>("noise_variance");
    hr.finish();
    hyper.push_back(std::move(h));
  }

  // Offsets recompute deterministically from the data; centering was on iff
  // any stored offset is nonzero (an all-zero mean stays consistent either
  // way because the recomputed offset is then also zero).
  FitOptions options;
  options.center_targets = offsets.size() > 0 && offsets.cwiseAbs().maxCoeff() > 0.0;
  GpModel model = gp_fit(data, hyper, options);
  if (offsets.size() != model.target_offsets.size() ||
      (offsets - model.target_offsets).cwiseAbs().maxCoeff() > 1e-12) {
    throw NumericalError("stored target offsets do not match the refit");
  }
  verify_model(model);
  return model;
}

nlohmann::json safety_report_to_json(const SafetyReport& report) {
  json hist = json::array();
  for (const auto& [step, count] : report.first_violation_histogram) {
    hist.push_back(json{{"step", step}, {"count", count}});
  }
  return json{{"fraction_safe", report.fraction_safe},
              {"samples", report.samples},
              {"horizon", report.horizon},
              {"min_h_quantiles",
               json::array({report.min_h_p5, report.min_h_p50, report.min_h_p95})},
              {"first_violation_histogram", hist}};
}

nlohmann::json barrier_config_to_json(const BarrierConfig& config) {
  json j{{"kind", "inverse"},
         {"gamma", config.gamma},
         {"combine", combine_to_string(config.combine)},
         {"quantile_phi", config.quantile_phi}};
  j["shift_point"] =
      config.shift_point.size() > 0 ? vector_to_json(config.shift_point) : json();
  return j;
}

BarrierConfig barrier_config_from_json(const nlohmann::json& j) {
  ObjectReader r(j, "barrier config");
  BarrierConfig config;
  if (r.require_key<std::string>("kind") != "inverse") {
    throw std::invalid_argument("unknown barrier kind");
  }
  config.gamma = r.require_key<double>("gamma");
  config.combine = combine_from_string(r.require_key<std::string>("combine"));
  config.quantile_phi = r.require_key<double>("quantile_phi");
  const json& shift = r.at("shift_point");
  if (!shift.is_null()) config.shift_point = vector_from_json(shift);
  r.finish();
  return config;
}

Policy StoredPolicy::policy() const {
  if (kind == "lqr") {
    return lqr_policy(lqr, goal);
  }
  if (kind == "ddp") {
    // Gains act on the stacked state, so the x/z split is irrelevant here.
    auto nominal = nominal_states;
    auto u = controls;
    auto k_fb = gains;
    auto ff = feedforward;
    return [nominal, u, k_fb, ff](const Vector& stacked, int step) {
      const int last = static_cast<int>(u.size()) - 1;
      const std::size_t k = static_cast<std::size_t>(std::min(std::max(step, 0), last));
      return Vector(u[k] + ff[k] - k_fb[k] * (stacked - nominal[k]));
    };
  }
  throw std::invalid_argument("unknown policy kind '" + kind + "'");
}

nlohmann::json stored_policy_to_json(const StoredPolicy& p) {
  json j{{"kind", p.kind},
         {"environment", p.environment},
         {"course", p.course},
         {"barrier", barrier_config_to_json(p.barrier)},
         {"dt", p.dt}};
  if (p.kind == "lqr") {
    j["feedback"] = matrix_to_json(p.lqr.feedback);
    j["value"] = matrix_to_json(p.lqr.value);
    j["iterations"] = p.lqr.iterations;
    j["goal"] = vector_to_json(p.goal);
  } else if (p.kind == "ddp") {
    json states = json::array();
    for (const auto& s : p.nominal_states) states.push_back(vector_to_json(s));
    json controls = json::array();
    for (const auto& u : p.controls) controls.push_back(vector_to_json(u));
    json gains = json::array();
    for (const auto& g : p.gains) gains.push_back(matrix_to_json(g));
    json feedforward = json::array();
    for (const auto& f : p.feedforward) feedforward.push_back(vector_to_json(f));
    j["nominal_states"] = states;
    j["controls"] = controls;
    j["gains"] = gains;
    j["feedforward"] = feedforward;
  } else {
    throw std::invalid_argument("unknown policy kind '" + p.kind + "'");
  }
  return j;
}

StoredPolicy stored_policy_from_json(const nlohmann::json& j) {
  ObjectReader r(j, "policy");
  StoredPolicy p;
  p.kind = r.require_key<std::string>("kind");
  p.environment = r.require_key<std::string>("environment");
  p.course = r.require_key<std::string>("course");
  p.barrier = barrier_config_from_json(r.at("barrier"));
  p.dt = r.require_key<double>("dt");
  if (p.kind == "lqr") {
    p.lqr.feedback = matrix_from_json(r.at("feedback"));
    p.lqr.value = matrix_from_json(r.at("value"));
    p.lqr.iterations = r.require_key<int>("iterations");
    p.goal = vector_from_json(r.at("goal"));
  } else if (p.kind == "ddp") {
    for (const auto& s : r.at("nominal_states")) p.nominal_states.push_back(vector_from_json(s));
    for (const auto& u : r.at("controls")) p.controls.push_back(vector_from_json(u));
    for (const auto& g : r.at("gains")) p.gains.push_back(matrix_from_json(g));
    for (const auto& f : r.at("feedforward")) p.feedforward.push_back(vector_from_json(f));
    require(p.controls.size() == p.gains.size() &&
                p.controls.size() == p.feedforward.size() &&
                p.nominal_states.size() == p.controls.size() + 1,
            "policy trajectory lengths are inconsistent");
  } else {
    throw std::invalid_argument("unknown policy kind '" + p.kind + "'");
  }
  r.finish();
  return p;
}

StoredPolicy store_lqr_policy(const std::string& environment, const std::string& course,
                              const BarrierConfig& barrier, double dt,
                              const LqrGains& gains, const Vector& goal) {
  StoredPolicy p;
  p.kind = "lqr";
  p.environment = environment;
  p.course = course;
  p.barrier = barrier;
  p.dt = dt;
  p.lqr = gains;
  p.goal = goal;
  return p;
}

StoredPolicy store_ddp_policy(const std::string& environment, const std::string& course,
                              const BarrierConfig& barrier, double dt,
                              const DdpSolution& solution) {
  StoredPolicy p;
  p.kind = "ddp";
  p.environment = environment;
  p.course = course;
  p.barrier = barrier;
  p.dt = dt;
  for (const auto& s : solution.states) p.nominal_states.push_back(s.stacked());
  p.controls = solution.controls;
  // The file shares one sign convention across policy kinds:
  // u = controls + feedforward - gains * (stacked - nominal). The solver's
  // feedback matrices are additive, so flip them here.
  p.gains.reserve(solution.gains.size());
  for (const auto& g : solution.gains) p.gains.push_back(-g);
  p.feedforward = solution.feedforward;
  return p;
}

std::string trajectory_to_csv(const RolloutResult& rollout, const EmbeddedModel& model,
                              const QuadraticCost* cost) {
  const int n = model.state_dim();
  const int q = model.bas_dim();
  const int m = model.control_dim();

  std::string out = "t";
  for (int i = 1; i <= n; ++i) out += ",x_" + std::to_string(i);
  for (int i = 1; i <= q; ++i) out += ",z_" + std::to_string(i);
  for (int i = 1; i <= m; ++i) out += ",u_" + std::to_string(i);
  out += ",h_min,cost_to_go\n";

  const std::size_t rows = rollout.states.size();
  const bool complete = rows == rollout.controls.size() + 1;
  std::vector<double> cost_to_go(rows, 0.0);
  if (cost != nullptr && complete && rows > 0) {
    cost_to_go[rows - 1] = cost->terminal(rollout.states[rows - 1].stacked());
    for (std::size_t k = rows - 1; k-- > 0;) {
      cost_to_go[k] = cost_to_go[k + 1] +
                      cost->running(rollout.states[k].stacked(), rollout.controls[k]);
    }
  }

  for (std::size_t k = 0; k < rows; ++k) {
    out += format_double(static_cast<double>(k) * model.dt);
    const auto& s = rollout.states[k];
    for (int i = 0; i < n; ++i) out += "," + format_double(s.x(i));
    for (int i = 0; i < q; ++i) out += "," + format_double(s.z(i));
    const bool have_u = k < rollout.controls.size();
    for (int i = 0; i < m; ++i) {
      out += "," + format_double(have_u ? rollout.controls[k](i) : 0.0);
    }
    out += "," + format_double(model.safety.min_value(s.x));
    out += "," + format_double(cost_to_go[k]);
    out += '\n';
  }
  return out;
}

double ExperimentConfig::resolved_phi() const {
  if (rho >= 0.0) {
    require(rho > 0.0 && rho < 1.0, "rho must lie strictly inside (0, 1)");
    return normal_quantile(rho);
  }
  return quantile_phi;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ObjectReader r(j, "config");
  ExperimentConfig c;
  c.environment = r.get<std::string>("environment", c.environment);
  c.course = r.get<std::string>("course", c.course);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  c.output_dir = r.get<std::string>("output_dir", c.output_dir);

  if (r.has("gp")) {
    ObjectReader g(j.at("gp"), "config.gp");
    c.subsample = g.get<int>("subsample", c.subsample);
    c.optimizer_iters = g.get<int>("optimizer_iters", c.optimizer_iters);
    c.holdout_fraction = g.get<double>("holdout_fraction", c.holdout_fraction);
    c.center_targets = g.get<bool>("center_targets", c.center_targets);
    g.finish();
  }
  if (r.has("barrier")) {
    ObjectReader b(j.at("barrier"), "config.barrier");
    c.gamma = b.get<double>("gamma", c.gamma);
    c.quantile_phi = b.get<double>("phi", c.quantile_phi);
    const bool rho_set = b.has("rho");
    if (rho_set) c.rho = j.at("barrier").at("rho").get<double>();
    c.combine = b.get<std::string>("combine", c.combine);
    c.barrier_weight = b.get<double>("barrier_weight", c.barrier_weight);
    b.finish();
  }
  if (r.has("solver")) {
    ObjectReader s(j.at("solver"), "config.solver");
    c.horizon = s.get<int>("horizon", c.horizon);
    c.dt = s.get<double>("dt", c.dt);
    c.max_iters = s.get<int>("max_iters", c.max_iters);
    c.epsilon = s.get<double>("epsilon", c.epsilon);
    c.reg_init = s.get<double>("reg_init", c.reg_init);
    c.reg_max = s.get<double>("reg_max", c.reg_max);
    c.alpha_min = s.get<double>("alpha_min", c.alpha_min);
    // Accepted here as well so one solver block can travel alone.
    c.barrier_weight = s.get<double>("barrier_weight", c.barrier_weight);
    c.quantile_phi = s.get<double>("phi_rho", c.quantile_phi);
    s.finish();
  }
  r.finish();

  if (c.rho >= 0.0 && c.quantile_phi != 0.0) {
    throw std::invalid_argument("config sets both a quantile level rho and a direct phi");
  }
  require(c.horizon > 0, "horizon must be positive");
  require(c.max_iters > 0, "max_iters must be positive");
  require(c.epsilon > 0.0, "epsilon must be positive");
  require(c.subsample >= 0, "subsample must be nonnegative");
  require(c.optimizer_iters >= 0, "optimizer_iters must be nonnegative");
  require(c.holdout_fraction >= 0.0 && c.holdout_fraction < 1.0,
          "holdout_fraction must lie in [0, 1)");
  require(c.quantile_phi >= 0.0, "phi must be nonnegative");
  require(c.barrier_weight >= 0.0, "barrier_weight must be nonnegative");
  if (c.combine != "sum" && c.combine != "per_constraint") {
    throw std::invalid_argument("config.barrier.combine must be 'sum' or 'per_constraint'");
  }
  return c;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& config) {
  json barrier{{"gamma", config.gamma},
               {"combine", config.combine},
               {"barrier_weight", config.barrier_weight}};
  if (config.rho >= 0.0) {
    barrier["rho"] = config.rho;
  } else {
    barrier["phi"] = config.quantile_phi;
  }
  return json{{"environment", config.environment},
              {"course", config.course},
              {"seed", config.seed},
              {"gp",
               json{{"subsample", config.subsample},
                    {"optimizer_iters", config.optimizer_iters},
                    {"holdout_fraction", config.holdout_fraction},
                    {"center_targets", config.center_targets}}},
              {"barrier", barrier},
              {"solver",
               json{{"horizon", config.horizon},
                    {"dt", config.dt},
                    {"max_iters", config.max_iters},
                    {"epsilon", config.epsilon},
                    {"reg_init", config.reg_init},
                    {"reg_max", config.reg_max},
                    {"alpha_min", config.alpha_min}}},
              {"output_dir", config.output_dir}};
}

std::string experiment_config_schema() {
  static const char* const kSchema = R"JSON({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "experiment configuration",
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "environment": { "type": "string", "enum": ["linear", "dubins", "quadrotor"] },
    "course": { "type": "string" },
    "seed": { "type": "integer", "minimum": 0 },
    "gp": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "subsample": { "type": "integer", "minimum": 0 },
        "optimizer_iters": { "type": "integer", "minimum": 0 },
        "holdout_fraction": { "type": "number", "minimum": 0, "exclusiveMaximum": 1 },
        "center_targets": { "type": "boolean" }
      }
    },
    "barrier": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "gamma": { "type": "number" },
        "phi": { "type": "number", "minimum": 0 },
        "rho": { "type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1 },
        "combine": { "type": "string", "enum": ["sum", "per_constraint"] },
        "barrier_weight": { "type": "number", "minimum": 0 }
      }
    },
    "solver": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "horizon": { "type": "integer", "minimum": 1 },
        "dt": { "type": "number" },
        "max_iters": { "type": "integer", "minimum": 1 },
        "epsilon": { "type": "number", "exclusiveMinimum": 0 },
        "reg_init": { "type": "number", "minimum": 0 },
        "reg_max": { "type": "number", "minimum": 0 },
        "alpha_min": { "type": "number", "exclusiveMinimum": 0 },
        "barrier_weight": { "type": "number", "minimum": 0 },
        "phi_rho": { "type": "number", "minimum": 0 }
      }
    },
    "output_dir": { "type": "string" }
  }
}
)JSON";
  return kSchema;
}

DdpOptions ddp_options_from_config(const ExperimentConfig& config) {
  DdpOptions opts;
  opts.max_iters = config.max_iters;
  opts.epsilon = config.epsilon;
  opts.reg_init = config.reg_init;
  opts.reg_max = config.reg_max;
  opts.alpha_min = config.alpha_min;
  return opts;
}

}  // namespace gpbas
