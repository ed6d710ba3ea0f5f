#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gpbas/gp.hpp"
#include "gpbas/types.hpp"

namespace gpbas {

// How model outputs map to the next state.
enum class TargetMode {
  kDerivative,  // outputs are time derivatives: x_next = x + dt * f(x, u)
  kDelta,       // outputs are one-step differences: x_next = x + f(x, u)
};

struct DynamicsEval {
  Vector mean;      // n
  Vector variance;  // n, zero on exactly known rows
};

struct DynamicsJacobians {
  Matrix dx;  // n x n, Jacobian of the mean output
  Matrix du;  // n x m
};

// State-control map with predictive uncertainty. Backed by an exact GP, an
// analytic model, or a mix of the two.
class MeanDynamics {
 public:
  virtual ~MeanDynamics() = default;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual TargetMode target_mode() const = 0;
  virtual DynamicsEval eval(const Vector& x, const Vector& u) const = 0;
  virtual DynamicsJacobians jacobians(const Vector& x, const Vector& u) const = 0;
};

// GP over stacked (x, u) inputs predicting every state output.
class GpDynamics : public MeanDynamics {
 public:
  GpDynamics(GpModel model, int state_dim, TargetMode mode);

  int state_dim() const override { return state_dim_; }
  int control_dim() const override { return control_dim_; }
  TargetMode target_mode() const override { return mode_; }
  DynamicsEval eval(const Vector& x, const Vector& u) const override;
  DynamicsJacobians jacobians(const Vector& x, const Vector& u) const override;

  const GpModel& model() const { return model_; }

 private:
  GpModel model_;
  int state_dim_;
  int control_dim_;
  TargetMode mode_;
};

// Closed-form dynamics with exact Jacobians and zero predictive variance.
class AnalyticDynamics : public MeanDynamics {
 public:
  using Fn = std::function<Vector(const Vector&, const Vector&)>;
  using JacFn = std::function<DynamicsJacobians(const Vector&, const Vector&)>;

  AnalyticDynamics(int state_dim, int control_dim, TargetMode mode, Fn f, JacFn jac)
      : state_dim_(state_dim), control_dim_(control_dim), mode_(mode),
        f_(std::move(f)), jac_(std::move(jac)) {}

  int state_dim() const override { return state_dim_; }
  int control_dim() const override { return control_dim_; }
  TargetMode target_mode() const override { return mode_; }
  DynamicsEval eval(const Vector& x, const Vector& u) const override;
  DynamicsJacobians jacobians(const Vector& x, const Vector& u) const override;

 private:
  int state_dim_;
  int control_dim_;
  TargetMode mode_;
  Fn f_;
  JacFn jac_;
};

// Known rows stay analytic (kinematics); listed rows are replaced by a GP
// trained on those outputs alone, in listed order.
class GreyBoxDynamics : public MeanDynamics {
 public:
  GreyBoxDynamics(std::shared_ptr<const MeanDynamics> known, GpModel gp,
                  std::vector<int> learned_rows);

  int state_dim() const override { return known_->state_dim(); }
  int control_dim() const override { return known_->control_dim(); }
  TargetMode target_mode() const override { return known_->target_mode(); }
  DynamicsEval eval(const Vector& x, const Vector& u) const override;
  DynamicsJacobians jacobians(const Vector& x, const Vector& u) const override;

  const GpModel& model() const { return gp_; }
  const std::vector<int>& learned_rows() const { return learned_rows_; }

 private:
  std::shared_ptr<const MeanDynamics> known_;
  GpModel gp_;
  std::vector<int> learned_rows_;
};

// Classical fourth-order step of xdot = f(x, u) with u held over the step.
Vector rk4_step(const MeanDynamics& f, const Vector& x, const Vector& u, double dt);

struct Rk4Result {
  Vector x_next;
  Matrix dx;  // d x_next / d x
  Matrix du;  // d x_next / d u
};

// RK4 step plus Jacobians chained through the four stages.
Rk4Result rk4_step_with_jacobians(const MeanDynamics& f, const Vector& x,
                                  const Vector& u, double dt);

// Adapts a derivative-mode model into a delta-mode one by integrating each
// step with RK4. Used to replay delta-mode controllers on exact dynamics.
class Rk4DeltaDynamics : public MeanDynamics {
 public:
  Rk4DeltaDynamics(std::shared_ptr<const MeanDynamics> continuous, double dt);

  int state_dim() const override { return continuous_->state_dim(); }
  int control_dim() const override { return continuous_->control_dim(); }
  TargetMode target_mode() const override { return TargetMode::kDelta; }
  DynamicsEval eval(const Vector& x, const Vector& u) const override;
  DynamicsJacobians jacobians(const Vector& x, const Vector& u) const override;

 private:
  std::shared_ptr<const MeanDynamics> continuous_;
  double dt_;
};

}  // namespace gpbas
