#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "gpbas/barrier.hpp"
#include "gpbas/types.hpp"

namespace gpbas {

// Quadratic tracking cost over the embedded state:
//   sum_k (xbar_k - goal)' Q (xbar_k - goal) + u_k' R u_k  + terminal term.
struct QuadraticCost {
  Matrix state_weight;     // Q, (n+q) x (n+q), PSD
  Matrix control_weight;   // R, m x m, PD
  Matrix terminal_weight;  // Qf, (n+q) x (n+q), PSD
  Vector goal;             // embedded goal, barrier entries usually 0

  double running(const Vector& xbar, const Vector& u) const;
  double terminal(const Vector& xbar) const;
};

void validate_cost(const QuadraticCost& cost, int embedded_dim, int control_dim);

// Lifts per-state weights to the embedded dimension, putting barrier_weight
// on each barrier-state diagonal. The goal's barrier entries are the shifted
// barrier value at the goal state, which is 0 when the shift sits at the goal.
QuadraticCost embed_cost(const EmbeddedModel& model, const Matrix& state_weight,
                         const Matrix& control_weight, const Matrix& terminal_weight,
                         const Vector& goal_state, double barrier_weight);

struct LqrGains {
  Matrix feedback;  // K, m x (n+q)
  Matrix value;     // P, PSD
  int iterations = 0;
};

// Fixed-point iteration of the discrete Riccati map. Throws NumericalError on
// divergence (not stabilizable) or an unstable closed loop.
LqrGains dare_solve(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

enum class Discretization { kZeroOrderHold, kEuler };

// Linearizes the embedded model at its shift point, discretizes at model.dt
// and solves the Riccati equation. The policy is u = -K (xbar - goal).
LqrGains embedded_lqr(const EmbeddedModel& model, const QuadraticCost& cost,
                      Discretization discretization = Discretization::kZeroOrderHold);

// State-feedback law over the stacked embedded state.
using Policy = std::function<Vector(const Vector& stacked, int step)>;

Policy lqr_policy(const LqrGains& gains, const Vector& goal);

struct DdpOptions {
  int max_iters = 100;
  double epsilon = 1e-4;    // stop when the expected improvement drops below
  double reg_init = 0.0;
  double reg_max = 1e6;
  double alpha_min = 0.0009765625;  // 2^-10
};

enum class DdpStatus {
  kConverged,
  kMaxIterations,
  kStalled,  // no step accepted at the regularization ceiling
};

struct DdpSolution {
  std::vector<EmbeddedState> states;  // N+1, feasible under the model
  std::vector<Vector> controls;       // N
  std::vector<Matrix> gains;          // N, feedback around the nominal
  std::vector<Vector> feedforward;    // N, residual after acceptance (zeros)
  std::vector<double> cost_history;   // accepted totals, non-increasing
  DdpStatus status = DdpStatus::kMaxIterations;
  bool converged = false;
  double delta_v = 0.0;   // expected improvement at exit
  double qu_norm = 0.0;   // largest control-gradient norm at exit
  int iterations = 0;
};

// Trajectory optimization on the safety-embedded model: iLQR backward pass
// with Levenberg-Marquardt regularization and a backtracking forward pass.
// Rollouts that leave the safe set price as +infinity, so accepted iterates
// are always feasible. The barrier-state bound (config.quantile_phi) is part
// of the forward dynamics.
DdpSolution ddp_optimize(const EmbeddedModel& model, const QuadraticCost& cost,
                         const EmbeddedState& x0, const std::vector<Vector>& u_init,
                         const DdpOptions& opts = {});

// Time-varying affine replay of a solution around its nominal trajectory.
Policy ddp_policy(const DdpSolution& solution);

struct RolloutResult {
  std::vector<EmbeddedState> states;
  std::vector<Vector> controls;
  double min_h;              // over the whole trajectory
  int violation_step = -1;   // -1 when the rollout stayed safe
  int violation_constraint = -1;
  double cost = 0.0;         // filled when a cost is supplied
};

// Closed-loop rollout on the embedded model itself. Violations are recorded,
// not thrown; the trajectory stops at the violating step.
RolloutResult rollout_policy(const EmbeddedModel& model, const Policy& policy,
                             const EmbeddedState& x0, int horizon, bool use_bound,
                             const QuadraticCost* cost = nullptr);

// Closed-loop rollout where a separate plant generates the states (usually
// the true dynamics) while the controller propagates its barrier state with
// its own model, bound included. Derivative-mode plants are integrated with
// RK4 at model.dt.
RolloutResult rollout_policy_on_plant(const MeanDynamics& plant,
                                      const EmbeddedModel& model, const Policy& policy,
                                      const Vector& x0, int horizon, bool use_bound,
                                      const QuadraticCost* cost = nullptr);

}  // namespace gpbas
