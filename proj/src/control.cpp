#include "gpbas/control.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>

namespace gpbas {

namespace {

void check_symmetric_psd(const Matrix& m, const std::string& name, bool strict) {
  require(m.rows() == m.cols(), name + " must be square");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + m.cwiseAbs().maxCoeff()),
          name + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (strict) {
    require(min_eig > 0.0, name + " must be positive definite");
  } else {
    require(min_eig >= -1e-10 * (1.0 + std::abs(eig.eigenvalues().maxCoeff())),
            name + " must be positive semidefinite");
  }
}

}  // namespace

double QuadraticCost::running(const Vector& xbar, const Vector& u) const {
  const Vector e = xbar - goal;
  return e.dot(state_weight * e) + u.dot(control_weight * u);
}

double QuadraticCost::terminal(const Vector& xbar) const {
  const Vector e = xbar - goal;
  return e.dot(terminal_weight * e);
}

void validate_cost(const QuadraticCost& cost, int embedded_dim, int control_dim) {
  require(cost.state_weight.rows() == embedded_dim, "state weight dimension mismatch");
  require(cost.terminal_weight.rows() == embedded_dim,
          "terminal weight dimension mismatch");
  require(cost.control_weight.rows() == control_dim, "control weight dimension mismatch");
  require(cost.goal.size() == embedded_dim, "goal dimension mismatch");
  check_symmetric_psd(cost.state_weight, "state weight", false);
  check_symmetric_psd(cost.terminal_weight, "terminal weight", false);
  check_symmetric_psd(cost.control_weight, "control weight", true);
}

QuadraticCost embed_cost(const EmbeddedModel& model, const Matrix& state_weight,
                         const Matrix& control_weight, const Matrix& terminal_weight,
                         const Vector& goal_state, double barrier_weight) {
  const int n = model.state_dim();
  const int q = model.bas_dim();
  require(state_weight.rows() == n && terminal_weight.rows() == n,
          "state weights must match the raw state dimension");
  require(goal_state.size() == n, "goal dimension mismatch");
  require(barrier_weight >= 0.0, "barrier weight must be nonnegative");

  QuadraticCost cost;
  cost.state_weight = Matrix::Zero(n + q, n + q);
  cost.state_weight.topLeftCorner(n, n) = state_weight;
  cost.terminal_weight = Matrix::Zero(n + q, n + q);
  cost.terminal_weight.topLeftCorner(n, n) = terminal_weight;
  for (int i = 0; i < q; ++i) {
    cost.state_weight(n + i, n + i) = barrier_weight;
    cost.terminal_weight(n + i, n + i) = barrier_weight;
  }
  cost.control_weight = control_weight;
  cost.goal = Vector::Zero(n + q);
  cost.goal.head(n) = goal_state;
  if (q > 0) {
    cost.goal.tail(q) =
        barrier_composite(goal_state, model.safety, model.config) - model.shift_offset;
  }
  return cost;
}

LqrGains dare_solve(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
  const int n = static_cast<int>(a.rows());
  require(a.cols() == n, "A must be square");
  require(b.rows() == n, "B row count must match A");
  require(q.rows() == n, "Q dimension must match A");
  require(r.rows() == b.cols(), "R dimension must match B columns");
  check_symmetric_psd(q, "Q", false);
  check_symmetric_psd(r, "R", true);

  Matrix p = q;
  Matrix k;
  int used = 0;
  bool converged = false;
  for (int iter = 1; iter <= 10000; ++iter) {
    const Matrix btp = b.transpose() * p;
    Eigen::LLT<Matrix> llt(Matrix(r + btp * b));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("R + B'PB lost positive definiteness in the Riccati iteration");
    }
    k = llt.solve(btp * a);
    Matrix next = q + a.transpose() * p * (a - b * k);
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).norm();
    p = next;
    used = iter;
    if (change < 1e-10) {
      converged = true;
      break;
    }
    if (p.trace() > 1e12) {
      throw NumericalError("Riccati iteration diverged; the pair (A, B) looks unstabilizable");
    }
  }
  if (!converged) {
    throw NumericalError("Riccati iteration did not converge within 10000 steps");
  }

  Eigen::EigenSolver<Matrix> eig(a - b * k);
  const double radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (radius >= 1.0) {
    throw NumericalError("closed loop is not stable: spectral radius " +
                         std::to_string(radius));
  }

  LqrGains gains;
  gains.feedback = k;
  gains.value = p;
  gains.iterations = used;
  return gains;
}

LqrGains embedded_lqr(const EmbeddedModel& model, const QuadraticCost& cost,
                      Discretization discretization) {
  validate_cost(cost, model.embedded_dim(), model.control_dim());
  EmbeddedJacobians lin = equilibrium_jacobians(model);
  const int n = model.embedded_dim();
  const int m = model.control_dim();

  Matrix ad, bd;
  if (discretization == Discretization::kZeroOrderHold) {
    Matrix block = Matrix::Zero(n + m, n + m);
    block.topLeftCorner(n, n) = lin.a * model.dt;
    block.topRightCorner(n, m) = lin.b * model.dt;
    const Matrix e = block.exp();
    ad = e.topLeftCorner(n, n);
    bd = e.topRightCorner(n, m);
  } else {
    ad = Matrix::Identity(n, n) + model.dt * lin.a;
    bd = model.dt * lin.b;
  }
  return dare_solve(ad, bd, cost.state_weight, cost.control_weight);
}

Policy lqr_policy(const LqrGains& gains, const Vector& goal) {
  Matrix k = gains.feedback;
  Vector g = goal;
  return [k, g](const Vector& stacked, int) -> Vector { return -k * (stacked - g); };
}

namespace {

struct ForwardTrajectory {
  std::vector<EmbeddedState> states;  // horizon + 1
  std::vector<Vector> controls;       // horizon
  double cost = 0.0;
};

// Rolls the model forward under a per-step control law; nullopt when the
// rollout leaves the safe set or produces non-finite numbers.
std::optional<ForwardTrajectory> try_rollout(
    const EmbeddedModel& model, const QuadraticCost& cost, const EmbeddedState& x0,
    int horizon, const std::function<Vector(int, const EmbeddedState&)>& law) {
  ForwardTrajectory out;
  out.states.reserve(horizon + 1);
  out.controls.reserve(horizon);
  out.states.push_back(x0);
  for (int k = 0; k < horizon; ++k) {
    const EmbeddedState& s = out.states.back();
    Vector u = law(k, s);
    if (!u.allFinite()) return std::nullopt;
    EmbeddedState next;
    try {
      next = embedded_step(s, u, model, /*use_bound=*/true);
    } catch (const BoundaryViolation&) {
      return std::nullopt;
    }
    if (!next.x.allFinite() || !next.z.allFinite()) return std::nullopt;
    out.cost += cost.running(s.stacked(), u);
    out.controls.push_back(std::move(u));
    out.states.push_back(std::move(next));
  }
  out.cost += cost.terminal(out.states.back().stacked());
  if (!std::isfinite(out.cost)) return std::nullopt;
  return out;
}

struct BackwardPass {
  bool ok = false;
  std::vector<Matrix> gains;
  std::vector<Vector> feedforward;
  double d1 = 0.0;  // sum k'Qu
  double d2 = 0.0;  // sum k'Quu k
  double qu_max = 0.0;

  double expected_decrease(double alpha) const {
    return -(alpha * d1 + 0.5 * alpha * alpha * d2);
  }
};

BackwardPass backward_pass(const EmbeddedModel& model, const QuadraticCost& cost,
                           const ForwardTrajectory& nominal, double lambda) {
  const int horizon = static_cast<int>(nominal.controls.size());
  const int ne = model.embedded_dim();
  const int m = model.control_dim();

  BackwardPass bp;
  bp.gains.assign(horizon, Matrix::Zero(m, ne));
  bp.feedforward.assign(horizon, Vector::Zero(m));

  Vector vx = 2.0 * cost.terminal_weight * (nominal.states.back().stacked() - cost.goal);
  Matrix vxx = 2.0 * cost.terminal_weight;

  for (int k = horizon - 1; k >= 0; --k) {
    const Vector xbar = nominal.states[k].stacked();
    const Vector& u = nominal.controls[k];
    EmbeddedJacobians j = embedded_step_jacobians(nominal.states[k], u, model);

    const Vector qx = 2.0 * cost.state_weight * (xbar - cost.goal) + j.a.transpose() * vx;
    const Vector qu = 2.0 * cost.control_weight * u + j.b.transpose() * vx;
    const Matrix qxx = 2.0 * cost.state_weight + j.a.transpose() * vxx * j.a;
    const Matrix quu = 2.0 * cost.control_weight + j.b.transpose() * vxx * j.b;
    const Matrix qux = j.b.transpose() * vxx * j.a;

    Matrix quu_reg = quu + lambda * Matrix::Identity(m, m);
    Eigen::LLT<Matrix> llt(quu_reg);
    if (llt.info() != Eigen::Success) {
      return bp;  // ok stays false: caller raises regularization
    }
    const Vector kff = -llt.solve(qu);
    const Matrix kfb = -llt.solve(qux);

    bp.d1 += kff.dot(qu);
    bp.d2 += kff.dot(quu * kff);
    bp.qu_max = std::max(bp.qu_max, qu.norm());

    vx = qx + kfb.transpose() * (quu * kff + qu) + qux.transpose() * kff;
    vxx = qxx + kfb.transpose() * quu * kfb + kfb.transpose() * qux +
          qux.transpose() * kfb;
    vxx = 0.5 * (vxx + vxx.transpose());

    bp.gains[k] = kfb;
    bp.feedforward[k] = kff;
  }
  bp.ok = true;
  return bp;
}

}  // namespace

DdpSolution ddp_optimize(const EmbeddedModel& model, const QuadraticCost& cost,
                         const EmbeddedState& x0, const std::vector<Vector>& u_init,
                         const DdpOptions& opts) {
  const int horizon = static_cast<int>(u_init.size());
  require(horizon >= 2, "horizon must be at least 2");
  require(opts.max_iters >= 1, "max_iters must be at least 1");
  require(opts.epsilon > 0.0, "epsilon must be positive");
  validate_cost(cost, model.embedded_dim(), model.control_dim());
  check_safe(x0.x, model.safety);

  auto nominal_opt = try_rollout(model, cost, x0, horizon,
                                 [&](int k, const EmbeddedState&) { return u_init[k]; });
  require(nominal_opt.has_value(), "initial control sequence is infeasible on the model");
  ForwardTrajectory nominal = std::move(*nominal_opt);

  DdpSolution sol;
  sol.cost_history.push_back(nominal.cost);
  sol.gains.assign(horizon, Matrix::Zero(model.control_dim(), model.embedded_dim()));
  sol.feedforward.assign(horizon, Vector::Zero(model.control_dim()));

  double lambda = opts.reg_init;
  auto raise_lambda = [&]() {
    lambda = lambda <= 0.0 ? 1e-6 : lambda * 10.0;
    return lambda <= opts.reg_max;
  };
  auto decay_lambda = [&]() { lambda = lambda * 0.5 < 1e-6 ? 0.0 : lambda * 0.5; };

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    sol.iterations = iter;
    BackwardPass bp = backward_pass(model, cost, nominal, lambda);
    if (!bp.ok) {
      if (!raise_lambda()) {
        sol.status = DdpStatus::kStalled;
        break;
      }
      continue;
    }
    sol.delta_v = bp.expected_decrease(1.0);
    sol.qu_norm = bp.qu_max;

    if (sol.delta_v < opts.epsilon) {
      sol.status = DdpStatus::kConverged;
      sol.converged = true;
      sol.gains = bp.gains;
      break;
    }

    bool accepted = false;
    for (double alpha = 1.0; alpha >= opts.alpha_min; alpha *= 0.5) {
      auto candidate =
          try_rollout(model, cost, x0, horizon, [&](int k, const EmbeddedState& s) -> Vector {
            return nominal.controls[k] + alpha * bp.feedforward[k] +
                   bp.gains[k] * (s.stacked() - nominal.states[k].stacked());
          });
      if (candidate && candidate->cost < nominal.cost) {
        nominal = std::move(*candidate);
        sol.cost_history.push_back(nominal.cost);
        accepted = true;
        break;
      }
    }
    if (accepted) {
      // Keep the gains that produced the accepted trajectory. A later
      // backward pass whose line search fails would otherwise leave the
      // heavily regularized (near-zero) gains in the returned policy.
      sol.gains = bp.gains;
      decay_lambda();
    } else if (!raise_lambda()) {
      sol.status = DdpStatus::kStalled;
      break;
    }
  }

  sol.states = std::move(nominal.states);
  sol.controls = std::move(nominal.controls);
  return sol;
}

Policy ddp_policy(const DdpSolution& solution) {
  require(!solution.controls.empty(), "solution has no controls");
  std::vector<Vector> nominal_states;
  nominal_states.reserve(solution.states.size());
  for (const auto& s : solution.states) nominal_states.push_back(s.stacked());
  std::vector<Vector> controls = solution.controls;
  std::vector<Vector> feedforward = solution.feedforward;
  std::vector<Matrix> gains = solution.gains;
  const int last = static_cast<int>(controls.size()) - 1;
  return [=](const Vector& stacked, int step) -> Vector {
    const int k = std::min(std::max(step, 0), last);
    return controls[k] + feedforward[k] + gains[k] * (stacked - nominal_states[k]);
  };
}

RolloutResult rollout_policy(const EmbeddedModel& model, const Policy& policy,
                             const EmbeddedState& x0, int horizon, bool use_bound,
                             const QuadraticCost* cost) {
  require(horizon >= 1, "horizon must be at least 1");
  RolloutResult out;
  out.min_h = std::numeric_limits<double>::infinity();
  out.states.push_back(x0);
  if (model.safety.count() > 0) {
    out.min_h = model.safety.min_value(x0.x);
    if (!(out.min_h > 0.0)) {
      out.violation_step = 0;
      return out;
    }
  }
  for (int k = 0; k < horizon; ++k) {
    const EmbeddedState& s = out.states.back();
    Vector u = policy(s.stacked(), k);
    EmbeddedState next;
    try {
      next = embedded_step(s, u, model, use_bound);
    } catch (const BoundaryViolation& violation) {
      out.violation_step = k + 1;
      out.violation_constraint = violation.constraint_index;
      out.min_h = std::min(out.min_h, violation.h_value);
      out.controls.push_back(std::move(u));
      return out;
    }
    if (!next.x.allFinite() || !next.z.allFinite()) {
      throw NumericalError("rollout produced a non-finite state at step " +
                           std::to_string(k + 1));
    }
    if (cost) out.cost += cost->running(s.stacked(), u);
    out.controls.push_back(std::move(u));
    out.states.push_back(std::move(next));
    if (model.safety.count() > 0) {
      out.min_h = std::min(out.min_h, model.safety.min_value(out.states.back().x));
    }
  }
  if (cost) out.cost += cost->terminal(out.states.back().stacked());
  return out;
}

RolloutResult rollout_policy_on_plant(const MeanDynamics& plant,
                                      const EmbeddedModel& model, const Policy& policy,
                                      const Vector& x0, int horizon, bool use_bound,
                                      const QuadraticCost* cost) {
  require(horizon >= 1, "horizon must be at least 1");
  require(plant.state_dim() == model.state_dim() &&
              plant.control_dim() == model.control_dim(),
          "plant dimensions do not match the model");

  RolloutResult out;
  out.min_h = std::numeric_limits<double>::infinity();
  if (model.safety.count() > 0) {
    out.min_h = model.safety.min_value(x0);
    if (!(out.min_h > 0.0)) {
      out.violation_step = 0;
      out.states.push_back(EmbeddedState{x0, Vector::Zero(model.bas_dim())});
      return out;
    }
  }
  out.states.push_back(model.make_state(x0));

  for (int k = 0; k < horizon; ++k) {
    const EmbeddedState& s = out.states.back();
    Vector u = policy(s.stacked(), k);

    // The controller propagates its own barrier state from the model; if its
    // one-step prediction crosses the boundary, it recovers the barrier state
    // from the next measurement instead.
    Vector z_next;
    bool z_from_model = true;
    try {
      z_next = embedded_step(s, u, model, use_bound).z;
    } catch (const BoundaryViolation&) {
      z_from_model = false;
    }

    Vector x_next;
    if (plant.target_mode() == TargetMode::kDelta) {
      x_next = s.x + plant.eval(s.x, u).mean;
    } else {
      x_next = rk4_step(plant, s.x, u, model.dt);
    }
    if (!x_next.allFinite()) {
      throw NumericalError("plant rollout produced a non-finite state at step " +
                           std::to_string(k + 1));
    }

    if (cost) out.cost += cost->running(s.stacked(), u);
    out.controls.push_back(u);

    if (model.safety.count() > 0) {
      const double h = model.safety.min_value(x_next);
      out.min_h = std::min(out.min_h, h);
      if (!(h > 0.0)) {
        out.violation_step = k + 1;
        for (int i = 0; i < model.safety.count(); ++i) {
          if (!(model.safety.constraints[i].value(x_next) > 0.0)) {
            out.violation_constraint = i;
            break;
          }
        }
        out.states.push_back(EmbeddedState{x_next, Vector::Zero(model.bas_dim())});
        return out;
      }
      if (!z_from_model) {
        z_next = barrier_composite(x_next, model.safety, model.config) -
                 model.shift_offset;
      }
    } else {
      z_next = Vector::Zero(0);
    }
    out.states.push_back(EmbeddedState{std::move(x_next), std::move(z_next)});
  }
  if (cost) out.cost += cost->terminal(out.states.back().stacked());
  return out;
}

}  // namespace gpbas
