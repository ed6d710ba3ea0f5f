#include "gpbas/barrier.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace gpbas {

namespace {

void check_barrier_domain(double h) {
  if (!(h > 0.0)) {
    throw BoundaryViolation("barrier evaluated outside the safe set: h = " +
                                std::to_string(h),
                            -1, h);
  }
}

}  // namespace

double barrier_value(BarrierKind kind, double h) {
  check_barrier_domain(h);
  switch (kind) {
    case BarrierKind::kInverse:
      return 1.0 / h;
  }
  throw std::invalid_argument("unknown barrier kind");
}

double barrier_deriv(BarrierKind kind, double h) {
  check_barrier_domain(h);
  switch (kind) {
    case BarrierKind::kInverse:
      return -1.0 / (h * h);
  }
  throw std::invalid_argument("unknown barrier kind");
}

double barrier_inverse(BarrierKind kind, double w) {
  switch (kind) {
    case BarrierKind::kInverse:
      require(w > 0.0, "barrier inverse needs a positive argument");
      return 1.0 / w;
  }
  throw std::invalid_argument("unknown barrier kind");
}

Vector SafetyFunction::eval(const Vector& x) const {
  Vector h(count());
  for (int i = 0; i < count(); ++i) h[i] = constraints[i].value(x);
  return h;
}

Matrix SafetyFunction::gradient(const Vector& x) const {
  Matrix g(count(), x.size());
  for (int i = 0; i < count(); ++i) g.row(i) = constraints[i].gradient(x);
  return g;
}

bool SafetyFunction::is_safe(const Vector& x) const {
  for (const auto& c : constraints) {
    if (!(c.value(x) > 0.0)) return false;
  }
  return true;
}

double SafetyFunction::min_value(const Vector& x) const {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) lowest = std::min(lowest, c.value(x));
  return lowest;
}

Constraint ball_constraint(const Vector& center, double radius,
                           std::vector<int> position_indices, std::string description) {
  require(radius > 0.0, "obstacle radius must be positive");
  require(center.size() == static_cast<Eigen::Index>(position_indices.size()),
          "obstacle center size does not match the index list");
  Constraint c;
  c.description = std::move(description);
  c.value = [center, position_indices, radius](const Vector& x) {
    double s = 0.0;
    for (size_t k = 0; k < position_indices.size(); ++k) {
      const double d = x[position_indices[k]] - center[static_cast<Eigen::Index>(k)];
      s += d * d;
    }
    return s - radius * radius;
  };
  c.gradient = [center, position_indices](const Vector& x) {
    RowVector g = RowVector::Zero(x.size());
    for (size_t k = 0; k < position_indices.size(); ++k) {
      g[position_indices[k]] =
          2.0 * (x[position_indices[k]] - center[static_cast<Eigen::Index>(k)]);
    }
    return g;
  };
  return c;
}

void check_safe(const Vector& x, const SafetyFunction& safety, int step) {
  for (int i = 0; i < safety.count(); ++i) {
    const double h = safety.constraints[i].value(x);
    if (!(h > 0.0)) {
      throw BoundaryViolation("state violates '" + safety.constraints[i].description +
                                  "': h = " + std::to_string(h),
                              i, h, step);
    }
  }
}

void validate_barrier_config(const SafetyFunction& safety, const BarrierConfig& config,
                             bool discrete) {
  require(config.gamma >= 0.0, "gamma must be nonnegative");
  if (discrete) {
    require(config.gamma < 1.0, "discrete barrier stepping needs gamma < 1");
  }
  require(config.quantile_phi >= 0.0, "quantile multiplier must be nonnegative");
  if (config.shift_point.size() > 0) {
    check_safe(config.shift_point, safety);
  }
}

int barrier_state_dim(const SafetyFunction& safety, const BarrierConfig& config) {
  if (safety.count() == 0) return 0;
  return config.combine == BarrierCombine::kSingleSum ? 1 : safety.count();
}

Vector barrier_composite(const Vector& x, const SafetyFunction& safety,
                         const BarrierConfig& config) {
  const int q = barrier_state_dim(safety, config);
  Vector beta = Vector::Zero(q);
  if (q == 0) return beta;
  check_safe(x, safety);
  if (config.combine == BarrierCombine::kSingleSum) {
    for (const auto& c : safety.constraints) {
      beta[0] += barrier_value(config.kind, c.value(x));
    }
  } else {
    for (int i = 0; i < safety.count(); ++i) {
      beta[i] = barrier_value(config.kind, safety.constraints[i].value(x));
    }
  }
  return beta;
}

Matrix barrier_composite_gradient(const Vector& x, const SafetyFunction& safety,
                                  const BarrierConfig& config) {
  const int q = barrier_state_dim(safety, config);
  Matrix g = Matrix::Zero(q, x.size());
  if (q == 0) return g;
  check_safe(x, safety);
  for (int i = 0; i < safety.count(); ++i) {
    const double slope = barrier_deriv(config.kind, safety.constraints[i].value(x));
    const RowVector row = slope * safety.constraints[i].gradient(x);
    if (config.combine == BarrierCombine::kSingleSum) {
      g.row(0) += row;
    } else {
      g.row(i) = row;
    }
  }
  return g;
}

Vector barrier_shift_offset(const SafetyFunction& safety, const BarrierConfig& config) {
  const int q = barrier_state_dim(safety, config);
  if (q == 0 || config.shift_point.size() == 0) return Vector::Zero(q);
  return barrier_composite(config.shift_point, safety, config);
}

Matrix barrier_input_matrix(const Vector& x, const Vector& z,
                            const SafetyFunction& safety, const BarrierConfig& config) {
  const int q = barrier_state_dim(safety, config);
  require(z.size() == q, "barrier state dimension mismatch");
  if (q == 0) return Matrix::Zero(0, x.size());

  const Vector beta0 = barrier_shift_offset(safety, config);
  if (config.combine == BarrierCombine::kSingleSum && safety.count() > 1) {
    // The summed barrier has no single inverse; its input matrix is the
    // composite gradient, exact at consistent z.
    return barrier_composite_gradient(x, safety, config);
  }
  Matrix g(q, x.size());
  for (int i = 0; i < q; ++i) {
    const double level = barrier_inverse(config.kind, z[i] + beta0[i]);
    g.row(i) = barrier_deriv(config.kind, level) * safety.constraints[i].gradient(x);
  }
  return g;
}

Vector barrier_state_rhs(const Vector& x, const Vector& z, const Vector& xdot,
                         const SafetyFunction& safety, const BarrierConfig& config) {
  const Vector beta = barrier_composite(x, safety, config);
  const Vector beta0 = barrier_shift_offset(safety, config);
  const Matrix input = barrier_input_matrix(x, z, safety, config);
  return input * xdot - config.gamma * (z + beta0 - beta);
}

Vector barrier_state_step(const Vector& x, const Vector& w, const Vector& x_next,
                          const SafetyFunction& safety, const BarrierConfig& config) {
  const Vector beta = barrier_composite(x, safety, config);
  const Vector beta_next = barrier_composite(x_next, safety, config);
  require(w.size() == beta.size(), "barrier state dimension mismatch");
  return beta_next - config.gamma * (w - beta);
}

BarrierStateGradients barrier_state_gradients(const Vector& x, const Vector& x_next,
                                              const Matrix& fx, const Matrix& fu,
                                              const SafetyFunction& safety,
                                              const BarrierConfig& config) {
  const Matrix g_here = barrier_composite_gradient(x, safety, config);
  const Matrix g_next = barrier_composite_gradient(x_next, safety, config);
  const int q = static_cast<int>(g_here.rows());
  BarrierStateGradients out;
  out.dx = g_next * fx + config.gamma * g_here;
  out.dw = -config.gamma * Matrix::Identity(q, q);
  out.du = g_next * fu;
  return out;
}

EmbeddedState EmbeddedModel::make_state(const Vector& x) const {
  EmbeddedState s;
  s.x = x;
  s.z = barrier_composite(x, safety, config) - shift_offset;
  return s;
}

EmbeddedState EmbeddedModel::unstack(const Vector& stacked) const {
  require(stacked.size() == embedded_dim(), "embedded state dimension mismatch");
  EmbeddedState s;
  s.x = stacked.head(state_dim());
  s.z = stacked.tail(bas_dim());
  return s;
}

EmbeddedModel make_embedded_model(std::shared_ptr<const MeanDynamics> dynamics,
                                  SafetyFunction safety, BarrierConfig config, double dt) {
  require(dynamics != nullptr, "dynamics must be provided");
  require(dt > 0.0, "step size must be positive");
  validate_barrier_config(safety, config, /*discrete=*/true);
  EmbeddedModel model;
  model.dynamics = std::move(dynamics);
  model.safety = std::move(safety);
  model.config = std::move(config);
  model.dt = dt;
  model.shift_offset = barrier_shift_offset(model.safety, model.config);
  return model;
}

BasMoments barrier_state_moments(const Vector& x, const Vector& z, const Vector& u,
                                 const EmbeddedModel& model) {
  check_safe(x, model.safety);
  DynamicsEval eval = model.dynamics->eval(x, u);
  const Matrix input = barrier_input_matrix(x, z, model.safety, model.config);
  const Vector beta = barrier_composite(x, model.safety, model.config);
  BasMoments out;
  out.mean = input * eval.mean - model.config.gamma * (z + model.shift_offset - beta);
  out.cov = input * eval.variance.asDiagonal() * input.transpose();
  return out;
}

double normal_quantile(double rho) {
  require(rho > 0.0 && rho < 1.0, "quantile level must lie in (0, 1)");
  const double target = 2.0 * rho - 1.0;  // erf(t / sqrt(2)) = target
  // Bisection on erf, then Newton polish; erf is monotone and the root of
  // erf(t) = target lies within |t| < 6 for any representable target.
  double lo = -6.0, hi = 6.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double t = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const double residual = std::erf(t) - target;
    const double slope = 2.0 / std::sqrt(M_PI) * std::exp(-t * t);
    if (slope <= 0.0) break;
    t -= residual / slope;
  }
  return std::sqrt(2.0) * t;
}

Vector barrier_state_bound(const Vector& mu, const Matrix& cov, double phi) {
  require(phi >= 0.0, "quantile multiplier must be nonnegative");
  require(cov.rows() == mu.size() && cov.cols() == mu.size(),
          "covariance dimension mismatch");
  Vector bound = mu;
  for (int i = 0; i < mu.size(); ++i) {
    const double v = cov(i, i);
    if (v < -1e-12) {
      throw NumericalError("negative variance on the covariance diagonal: " +
                           std::to_string(v));
    }
    bound[i] += phi * std::sqrt(std::max(v, 0.0));
  }
  return bound;
}

EmbeddedState embedded_step(const EmbeddedState& state, const Vector& u,
                            const EmbeddedModel& model, bool use_bound) {
  check_safe(state.x, model.safety);
  DynamicsEval eval = model.dynamics->eval(state.x, u);
  const bool derivative = model.dynamics->target_mode() == TargetMode::kDerivative;
  const double scale = derivative ? model.dt : 1.0;

  EmbeddedState next;
  next.x = state.x + scale * eval.mean;

  const Vector w = state.z + model.shift_offset;
  const Vector w_next =
      barrier_state_step(state.x, w, next.x, model.safety, model.config);
  next.z = w_next - model.shift_offset;

  if (use_bound && model.config.quantile_phi > 0.0 && model.bas_dim() > 0) {
    const Matrix g_next =
        barrier_composite_gradient(next.x, model.safety, model.config);
    for (int i = 0; i < model.bas_dim(); ++i) {
      const double var =
          (g_next.row(i).array().square() * eval.variance.transpose().array()).sum();
      next.z[i] += model.config.quantile_phi * scale * std::sqrt(std::max(var, 0.0));
    }
  }
  return next;
}

EmbeddedJacobians embedded_step_jacobians(const EmbeddedState& state, const Vector& u,
                                          const EmbeddedModel& model) {
  check_safe(state.x, model.safety);
  const int n = model.state_dim();
  const int q = model.bas_dim();
  const int m = model.control_dim();
  const bool derivative = model.dynamics->target_mode() == TargetMode::kDerivative;
  const double scale = derivative ? model.dt : 1.0;

  DynamicsEval eval = model.dynamics->eval(state.x, u);
  DynamicsJacobians jac = model.dynamics->jacobians(state.x, u);
  const Matrix fx = Matrix::Identity(n, n) + scale * jac.dx;
  const Matrix fu = scale * jac.du;
  const Vector x_next = state.x + scale * eval.mean;

  EmbeddedJacobians out;
  out.a = Matrix::Zero(n + q, n + q);
  out.b = Matrix::Zero(n + q, m);
  out.a.topLeftCorner(n, n) = fx;
  out.b.topRows(n) = fu;
  if (q > 0) {
    BarrierStateGradients g = barrier_state_gradients(state.x, x_next, fx, fu,
                                                      model.safety, model.config);
    out.a.bottomLeftCorner(q, n) = g.dx;
    out.a.bottomRightCorner(q, q) = g.dw;
    out.b.bottomRows(q) = g.du;
  }
  return out;
}

EmbeddedJacobians equilibrium_jacobians(const EmbeddedModel& model) {
  require(model.dynamics->target_mode() == TargetMode::kDerivative,
          "equilibrium linearization needs derivative-mode dynamics");
  require(model.config.shift_point.size() == model.state_dim(),
          "shift point must be set for equilibrium linearization");
  check_safe(model.config.shift_point, model.safety);

  const int n = model.state_dim();
  const int q = model.bas_dim();
  const Vector u0 = Vector::Zero(model.control_dim());
  DynamicsJacobians jac = model.dynamics->jacobians(model.config.shift_point, u0);
  const Matrix g0 =
      barrier_composite_gradient(model.config.shift_point, model.safety, model.config);

  EmbeddedJacobians out;
  out.a = Matrix::Zero(n + q, n + q);
  out.b = Matrix::Zero(n + q, model.control_dim());
  out.a.topLeftCorner(n, n) = jac.dx;
  out.b.topRows(n) = jac.du;
  if (q > 0) {
    out.a.bottomLeftCorner(q, n) = g0 * jac.dx + model.config.gamma * g0;
    out.a.bottomRightCorner(q, q) =
        -model.config.gamma * Matrix::Identity(q, q);
    out.b.bottomRows(q) = g0 * jac.du;
  }
  return out;
}

}  // namespace gpbas
