#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gpbas/barrier.hpp"
#include "gpbas/control.hpp"
#include "gpbas/types.hpp"

namespace gpbas {

// Gaussian over the (embedded) state.
struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

// Symmetrizes and clamps eigenvalues at zero.
Matrix make_psd(const Matrix& m);

// Validates symmetry to 1e-10 and eigenvalues >= -1e-10, then repairs.
GaussianBelief make_belief(Vector mean, Matrix cov);

// One step of first-order belief propagation through the embedded model:
// the mean advances deterministically, the covariance maps through the
// one-step Jacobian (closed-loop when feedback is supplied) and picks up the
// GP predictive variance lifted into the barrier block.
GaussianBelief propagate_belief(const GaussianBelief& belief, const Vector& u,
                                const EmbeddedModel& model,
                                const Matrix* feedback = nullptr);

struct SafetyReport {
  double fraction_safe = 0.0;
  int samples = 0;
  int horizon = 0;
  double min_h_p5 = 0.0;
  double min_h_p50 = 0.0;
  double min_h_p95 = 0.0;
  std::vector<std::pair<int, int>> first_violation_histogram;  // (step, count)
};

// Closed-loop Monte Carlo over the GP posterior: each step draws the
// transition from N(mean, variance) per output, the controller tracks its
// barrier state through the model. Sample i uses the substream (seed, "mc",
// i), so results do not depend on batching. Violations are data, not errors.
SafetyReport mc_rollout(const EmbeddedModel& model, const Policy& policy,
                        const Vector& x0, int horizon, int samples,
                        std::uint64_t seed);

}  // namespace gpbas
