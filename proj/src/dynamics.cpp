#include "gpbas/dynamics.hpp"

#include <algorithm>

namespace gpbas {

namespace {

Vector stack(const Vector& x, const Vector& u) {
  Vector q(x.size() + u.size());
  q << x, u;
  return q;
}

}  // namespace

GpDynamics::GpDynamics(GpModel model, int state_dim, TargetMode mode)
    : model_(std::move(model)), state_dim_(state_dim), mode_(mode) {
  require(state_dim >= 1, "state dimension must be positive");
  require(model_.output_dim() == state_dim,
          "GP output dimension does not match the state dimension");
  control_dim_ = model_.input_dim() - state_dim;
  require(control_dim_ >= 1, "GP input dimension leaves no room for controls");
}

DynamicsEval GpDynamics::eval(const Vector& x, const Vector& u) const {
  GpPrediction p = gp_posterior(model_, stack(x, u));
  return {std::move(p.mean), std::move(p.variance)};
}

DynamicsJacobians GpDynamics::jacobians(const Vector& x, const Vector& u) const {
  Matrix g = gp_posterior_mean_gradient(model_, stack(x, u));
  return {g.leftCols(state_dim_), g.rightCols(control_dim_)};
}

DynamicsEval AnalyticDynamics::eval(const Vector& x, const Vector& u) const {
  require(x.size() == state_dim_, "state dimension mismatch");
  require(u.size() == control_dim_, "control dimension mismatch");
  return {f_(x, u), Vector::Zero(state_dim_)};
}

DynamicsJacobians AnalyticDynamics::jacobians(const Vector& x, const Vector& u) const {
  require(x.size() == state_dim_, "state dimension mismatch");
  require(u.size() == control_dim_, "control dimension mismatch");
  return jac_(x, u);
}

GreyBoxDynamics::GreyBoxDynamics(std::shared_ptr<const MeanDynamics> known, GpModel gp,
                                 std::vector<int> learned_rows)
    : known_(std::move(known)), gp_(std::move(gp)), learned_rows_(std::move(learned_rows)) {
  require(known_ != nullptr, "known dynamics must be provided");
  require(!learned_rows_.empty(), "grey-box model needs at least one learned row");
  require(gp_.output_dim() == static_cast<int>(learned_rows_.size()),
          "GP output count does not match the learned row count");
  require(gp_.input_dim() == known_->state_dim() + known_->control_dim(),
          "GP input dimension does not match state plus control");
  for (int r : learned_rows_) {
    require(r >= 0 && r < known_->state_dim(), "learned row index out of range");
  }
}

DynamicsEval GreyBoxDynamics::eval(const Vector& x, const Vector& u) const {
  DynamicsEval out = known_->eval(x, u);
  GpPrediction p = gp_posterior(gp_, stack(x, u));
  for (int i = 0; i < static_cast<int>(learned_rows_.size()); ++i) {
    out.mean[learned_rows_[i]] = p.mean[i];
    out.variance[learned_rows_[i]] = p.variance[i];
  }
  return out;
}

DynamicsJacobians GreyBoxDynamics::jacobians(const Vector& x, const Vector& u) const {
  DynamicsJacobians out = known_->jacobians(x, u);
  Matrix g = gp_posterior_mean_gradient(gp_, stack(x, u));
  const int n = known_->state_dim();
  for (int i = 0; i < static_cast<int>(learned_rows_.size()); ++i) {
    out.dx.row(learned_rows_[i]) = g.row(i).head(n);
    out.du.row(learned_rows_[i]) = g.row(i).tail(known_->control_dim());
  }
  return out;
}

Vector rk4_step(const MeanDynamics& f, const Vector& x, const Vector& u, double dt) {
  require(f.target_mode() == TargetMode::kDerivative,
          "RK4 integrates derivative-mode dynamics only");
  const Vector k1 = f.eval(x, u).mean;
  const Vector k2 = f.eval(x + 0.5 * dt * k1, u).mean;
  const Vector k3 = f.eval(x + 0.5 * dt * k2, u).mean;
  const Vector k4 = f.eval(x + dt * k3, u).mean;
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Rk4Result rk4_step_with_jacobians(const MeanDynamics& f, const Vector& x,
                                  const Vector& u, double dt) {
  require(f.target_mode() == TargetMode::kDerivative,
          "RK4 integrates derivative-mode dynamics only");
  const int n = f.state_dim();
  const Matrix eye = Matrix::Identity(n, n);

  const Vector k1 = f.eval(x, u).mean;
  DynamicsJacobians j1 = f.jacobians(x, u);
  Matrix a1 = j1.dx;
  Matrix b1 = j1.du;

  const Vector x2 = x + 0.5 * dt * k1;
  const Vector k2 = f.eval(x2, u).mean;
  DynamicsJacobians j2 = f.jacobians(x2, u);
  Matrix a2 = j2.dx * (eye + 0.5 * dt * a1);
  Matrix b2 = j2.du + j2.dx * (0.5 * dt * b1);

  const Vector x3 = x + 0.5 * dt * k2;
  const Vector k3 = f.eval(x3, u).mean;
  DynamicsJacobians j3 = f.jacobians(x3, u);
  Matrix a3 = j3.dx * (eye + 0.5 * dt * a2);
  Matrix b3 = j3.du + j3.dx * (0.5 * dt * b2);

  const Vector x4 = x + dt * k3;
  const Vector k4 = f.eval(x4, u).mean;
  DynamicsJacobians j4 = f.jacobians(x4, u);
  Matrix a4 = j4.dx * (eye + dt * a3);
  Matrix b4 = j4.du + j4.dx * (dt * b3);

  Rk4Result out;
  out.x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.dx = eye + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  out.du = (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
  return out;
}

Rk4DeltaDynamics::Rk4DeltaDynamics(std::shared_ptr<const MeanDynamics> continuous, double dt)
    : continuous_(std::move(continuous)), dt_(dt) {
  require(continuous_ != nullptr, "continuous dynamics must be provided");
  require(continuous_->target_mode() == TargetMode::kDerivative,
          "Rk4DeltaDynamics wraps derivative-mode dynamics");
  require(dt > 0.0, "step size must be positive");
}

DynamicsEval Rk4DeltaDynamics::eval(const Vector& x, const Vector& u) const {
  Vector x_next = rk4_step(*continuous_, x, u, dt_);
  return {x_next - x, Vector::Zero(state_dim())};
}

DynamicsJacobians Rk4DeltaDynamics::jacobians(const Vector& x, const Vector& u) const {
  Rk4Result r = rk4_step_with_jacobians(*continuous_, x, u, dt_);
  return {r.dx - Matrix::Identity(state_dim(), state_dim()), r.du};
}

}  // namespace gpbas
