#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gpbas/dynamics.hpp"
#include "gpbas/types.hpp"

namespace gpbas {

// Barrier function family. Each kind supplies the triple (B, B^-1, B') on
// h > 0 with B(h) -> +inf as h -> 0+.
enum class BarrierKind {
  kInverse,  // B(h) = 1/h
};

double barrier_value(BarrierKind kind, double h);    // B(h), h > 0
double barrier_deriv(BarrierKind kind, double h);    // B'(h), h > 0
double barrier_inverse(BarrierKind kind, double w);  // B^-1(w)

// One inequality h(x) > 0 with its gradient row.
struct Constraint {
  std::function<double(const Vector&)> value;
  std::function<RowVector(const Vector&)> gradient;
  std::string description;
};

// The safe set is the intersection {x | h_i(x) > 0 for every i}.
struct SafetyFunction {
  std::vector<Constraint> constraints;

  int count() const { return static_cast<int>(constraints.size()); }
  Vector eval(const Vector& x) const;
  Matrix gradient(const Vector& x) const;  // c x n
  bool is_safe(const Vector& x) const;
  double min_value(const Vector& x) const;
};

// h(x) = |x_pos - center|^2 - radius^2 over the listed state entries.
Constraint ball_constraint(const Vector& center, double radius,
                           std::vector<int> position_indices,
                           std::string description = "ball obstacle");

// How multiple constraints map to barrier states.
enum class BarrierCombine {
  kSingleSum,       // one state, beta(x) = sum_i B(h_i(x))
  kPerConstraint,   // one state per constraint
};

struct BarrierConfig {
  BarrierKind kind = BarrierKind::kInverse;
  double gamma = 0.0;          // decay of the consistency correction
  Vector shift_point;          // where the barrier state is zeroed; empty = no shift
  BarrierCombine combine = BarrierCombine::kSingleSum;
  double quantile_phi = 0.0;   // 0 disables the stochastic bound
};

// Throws BoundaryViolation naming the first violated constraint.
void check_safe(const Vector& x, const SafetyFunction& safety, int step = -1);

// Validates gamma, shift safety and (for discrete stepping) gamma < 1.
void validate_barrier_config(const SafetyFunction& safety, const BarrierConfig& config,
                             bool discrete);

// Number of barrier states q for this combine mode (0 when unconstrained).
int barrier_state_dim(const SafetyFunction& safety, const BarrierConfig& config);

// Barrier reading beta(x) per barrier state (q-vector).
Vector barrier_composite(const Vector& x, const SafetyFunction& safety,
                         const BarrierConfig& config);

// d beta / dx (q x n); also the input matrix at a consistent barrier state.
Matrix barrier_composite_gradient(const Vector& x, const SafetyFunction& safety,
                                  const BarrierConfig& config);

// beta0 = beta(shift_point), or zeros when no shift is configured.
Vector barrier_shift_offset(const SafetyFunction& safety, const BarrierConfig& config);

// Input matrix of the barrier-state dynamics (q x n). For a single state over
// one constraint this is B'(B^-1(z + beta0)) h_x(x); the multi-constraint sum
// uses the composite gradient; per-constraint mode applies the first form row
// by row.
Matrix barrier_input_matrix(const Vector& x, const Vector& z,
                            const SafetyFunction& safety, const BarrierConfig& config);

// Continuous barrier-state dynamics
//   zdot = input_matrix(x, z) xdot - gamma (z + beta0 - beta(x)).
Vector barrier_state_rhs(const Vector& x, const Vector& z, const Vector& xdot,
                         const SafetyFunction& safety, const BarrierConfig& config);

// Discrete barrier state on the unshifted reading w:
//   w_next = beta(x_next) - gamma (w - beta(x)).
Vector barrier_state_step(const Vector& x, const Vector& w, const Vector& x_next,
                          const SafetyFunction& safety, const BarrierConfig& config);

struct BarrierStateGradients {
  Matrix dx;  // q x n
  Matrix dw;  // q x q
  Matrix du;  // q x m
};

// Derivatives of barrier_state_step through the one-step map x_next(x, u).
// fx, fu are d x_next / d x and d x_next / d u at the nominal.
BarrierStateGradients barrier_state_gradients(const Vector& x, const Vector& x_next,
                                              const Matrix& fx, const Matrix& fu,
                                              const SafetyFunction& safety,
                                              const BarrierConfig& config);

// State with its barrier states attached; z is shifted so z = 0 at the
// configured shift point.
struct EmbeddedState {
  Vector x;
  Vector z;

  Vector stacked() const {
    Vector s(x.size() + z.size());
    s << x, z;
    return s;
  }
};

// Learned (or analytic) dynamics together with the safety embedding.
struct EmbeddedModel {
  std::shared_ptr<const MeanDynamics> dynamics;
  SafetyFunction safety;
  BarrierConfig config;
  double dt = 0.0;
  Vector shift_offset;  // beta0, cached

  int state_dim() const { return dynamics->state_dim(); }
  int control_dim() const { return dynamics->control_dim(); }
  int bas_dim() const { return static_cast<int>(shift_offset.size()); }
  int embedded_dim() const { return state_dim() + bas_dim(); }

  // Embedded state with z initialized consistently from x.
  EmbeddedState make_state(const Vector& x) const;
  EmbeddedState unstack(const Vector& stacked) const;
};

EmbeddedModel make_embedded_model(std::shared_ptr<const MeanDynamics> dynamics,
                                  SafetyFunction safety, BarrierConfig config, double dt);

struct BasMoments {
  Vector mean;  // q
  Matrix cov;   // q x q, PSD
};

// Mean and covariance of the continuous barrier-state dynamics when xdot is
// the model's Gaussian prediction at (x, u).
BasMoments barrier_state_moments(const Vector& x, const Vector& z, const Vector& u,
                                 const EmbeddedModel& model);

// phi_rho = sqrt(2) erfinv(2 rho - 1), the standard normal quantile of rho.
double normal_quantile(double rho);

// Elementwise mu + phi sqrt(diag(cov)).
Vector barrier_state_bound(const Vector& mu, const Matrix& cov, double phi);

// One step of the safety-embedded model. The state advances by the mean
// dynamics (Euler in derivative mode, exact delta otherwise); the barrier
// state advances by the discrete recursion, plus phi sigma when use_bound is
// set and the model carries predictive variance.
EmbeddedState embedded_step(const EmbeddedState& state, const Vector& u,
                            const EmbeddedModel& model, bool use_bound);

struct EmbeddedJacobians {
  Matrix a;  // (n+q) x (n+q)
  Matrix b;  // (n+q) x m
};

// Jacobians of the discrete one-step embedded map at (state, u). The
// stochastic bound term is not differentiated.
EmbeddedJacobians embedded_step_jacobians(const EmbeddedState& state, const Vector& u,
                                          const EmbeddedModel& model);

// Continuous-time linearization of the embedded dynamics at the shift point
// with u = 0, for gain design. Requires a derivative-mode model whose mean
// vanishes at the shift point (an equilibrium).
EmbeddedJacobians equilibrium_jacobians(const EmbeddedModel& model);

}  // namespace gpbas
