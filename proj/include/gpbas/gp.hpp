#pragma once

#include <string>
#include <vector>

#include "gpbas/types.hpp"

namespace gpbas {

// Training set for an exact GP: rows of inputs (typically state-control pairs)
// and the matching observed outputs, one column per modeled output.
struct Dataset {
  Matrix inputs;   // N x D
  Matrix targets;  // N x E

  int size() const { return static_cast<int>(inputs.rows()); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  int output_dim() const { return static_cast<int>(targets.cols()); }
};

// Squared-exponential ARD kernel parameters for one output dimension.
// Signal variance and lengthscales are strictly positive; noise variance may
// be zero, in which case fitting falls back on diagonal jitter.
struct KernelHyperparameters {
  double signal_variance = 1.0;
  Vector lengthscales;  // D
  double noise_variance = 1e-4;
};

struct FitOptions {
  // Subtract the per-output target mean before fitting and add it back on
  // prediction. Keeps the zero-mean prior honest for datasets with offsets.
  bool center_targets = true;
};

// Exact GP with independent outputs sharing one input set. Cholesky factors
// are kept alongside the data; serialization drops them and refits on load.
struct GpModel {
  Dataset data;
  std::vector<KernelHyperparameters> hyper;  // one per output dimension
  Vector target_offsets;                     // E, zero when centering is off
  std::vector<Matrix> chol;                  // lower Cholesky of K + sigma_n^2 I
  std::vector<Vector> alpha;                 // (K + sigma_n^2 I)^-1 (y - offset)
  std::vector<double> jitter;                // extra diagonal used per output

  int input_dim() const { return data.input_dim(); }
  int output_dim() const { return data.output_dim(); }
};

struct GpPrediction {
  Vector mean;      // E
  Vector variance;  // E, nonnegative
};

// k(a, b) = signal_variance * exp(-1/2 * sum_d (a_d - b_d)^2 / lengthscale_d^2)
double kernel_eval(const Vector& a, const Vector& b, const KernelHyperparameters& hyper);

// Dense kernel matrix over the rows of two input sets.
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelHyperparameters& hyper);

// Factor the regularized kernel matrix per output. Escalates diagonal jitter
// when the Cholesky fails and throws NumericalError once escalation runs out.
GpModel gp_fit(const Dataset& data, const std::vector<KernelHyperparameters>& hyper,
               const FitOptions& options = {});

// Posterior mean and marginal variance at one query point. Variance round-off
// below zero is clamped; clamp events are counted (see below).
GpPrediction gp_posterior(const GpModel& model, const Vector& query);

// Row e holds d mean_e / d query. Offsets cancel in the derivative.
Matrix gp_posterior_mean_gradient(const GpModel& model, const Vector& query);

struct LogMarginalLikelihood {
  double value = 0.0;
  // Per output dimension: gradient over [log sf2, log l_1..D, log sn2].
  std::vector<Vector> gradient;
};

LogMarginalLikelihood log_marginal_likelihood(const GpModel& model);

struct HyperOptOptions {
  int max_iters = 200;
  double tolerance = 1e-6;   // stop when the objective gain drops below this
  double initial_step = 0.1;
  double log_bound = 18.0;   // clamp on each log parameter
  bool parallel = true;      // optimize output dimensions on separate threads
};

// Gradient ascent on the log marginal likelihood in log-parameter space with
// backtracking. Objective is nondecreasing; failed factorizations roll back.
std::vector<KernelHyperparameters> optimize_hyperparameters(
    const Dataset& data, const std::vector<KernelHyperparameters>& init,
    const HyperOptOptions& options = {}, const FitOptions& fit_options = {});

// Count of negative predicted variances clamped to zero since process start.
long variance_clamp_count();

// Recheck the factorization invariants (L L^T = K + sn^2 I and K_hat alpha =
// centered targets). Throws NumericalError when they fail. Used after loads.
void verify_model(const GpModel& model, double rel_tol = 1e-8);

}  // namespace gpbas
