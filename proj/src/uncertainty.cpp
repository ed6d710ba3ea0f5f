#include "gpbas/uncertainty.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "gpbas/rng.hpp"

namespace gpbas {

Matrix make_psd(const Matrix& m) {
  Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
}

GaussianBelief make_belief(Vector mean, Matrix cov) {
  require(cov.rows() == mean.size() && cov.cols() == mean.size(),
          "covariance dimension mismatch");
  require_finite(mean, "belief mean");
  require_finite(cov, "belief covariance");
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <=
              1e-10 * (1.0 + cov.cwiseAbs().maxCoeff()),
          "belief covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(0.5 * (cov + cov.transpose())));
  require(eig.eigenvalues().minCoeff() >= -1e-10,
          "belief covariance must be positive semidefinite");
  return {std::move(mean), make_psd(cov)};
}

GaussianBelief propagate_belief(const GaussianBelief& belief, const Vector& u,
                                const EmbeddedModel& model, const Matrix* feedback) {
  require(belief.mean.size() == model.embedded_dim(), "belief dimension mismatch");
  const EmbeddedState state = model.unstack(belief.mean);
  check_safe(state.x, model.safety);

  const int n = model.state_dim();
  const int q = model.bas_dim();
  const bool derivative = model.dynamics->target_mode() == TargetMode::kDerivative;
  const double scale = derivative ? model.dt : 1.0;

  GaussianBelief next;
  next.mean = embedded_step(state, u, model, /*use_bound=*/false).stacked();

  EmbeddedJacobians jac = embedded_step_jacobians(state, u, model);
  Matrix a = jac.a;
  if (feedback) {
    require(feedback->rows() == model.control_dim() &&
                feedback->cols() == model.embedded_dim(),
            "feedback gain dimension mismatch");
    a -= jac.b * (*feedback);
  }

  // Predictive noise enters the state block directly and the barrier block
  // through the barrier input matrix.
  const Vector variance = model.dynamics->eval(state.x, u).variance;
  Matrix lift(n + q, n);
  lift.topRows(n) = Matrix::Identity(n, n);
  if (q > 0) {
    lift.bottomRows(q) = barrier_input_matrix(state.x, state.z, model.safety, model.config);
  }
  lift *= scale;

  next.cov = a * belief.cov * a.transpose() +
             lift * variance.asDiagonal() * lift.transpose();
  next.cov = make_psd(next.cov);
  return next;
}

SafetyReport mc_rollout(const EmbeddedModel& model, const Policy& policy,
                        const Vector& x0, int horizon, int samples,
                        std::uint64_t seed) {
  require(samples >= 1, "sample count must be at least 1");
  require(horizon >= 1, "horizon must be at least 1");
  require(x0.size() == model.state_dim(), "initial state dimension mismatch");

  const bool derivative = model.dynamics->target_mode() == TargetMode::kDerivative;
  const double scale = derivative ? model.dt : 1.0;
  const int n = model.state_dim();

  std::vector<double> min_h_values;
  min_h_values.reserve(samples);
  std::map<int, int> violation_steps;
  int safe_count = 0;

  for (int i = 0; i < samples; ++i) {
    Rng rng = Rng::substream(seed, "mc", static_cast<std::uint64_t>(i));
    double min_h = std::numeric_limits<double>::infinity();
    int violated_at = -1;

    if (model.safety.count() > 0) {
      min_h = model.safety.min_value(x0);
      if (!(min_h > 0.0)) violated_at = 0;
    }
    EmbeddedState s = model.make_state(x0);

    for (int k = 0; k < horizon && violated_at < 0; ++k) {
      const Vector u = policy(s.stacked(), k);

      // Controller-side barrier state, propagated as deployed (bound active).
      Vector z_next;
      bool z_from_model = true;
      try {
        z_next = embedded_step(s, u, model, /*use_bound=*/true).z;
      } catch (const BoundaryViolation&) {
        z_from_model = false;
      }

      // The "plant" transition is a draw from the GP posterior.
      DynamicsEval eval = model.dynamics->eval(s.x, u);
      Vector draw = eval.mean;
      for (int d = 0; d < n; ++d) {
        const double sd = std::sqrt(std::max(eval.variance[d], 0.0));
        if (sd > 0.0) draw[d] += sd * rng.normal();
      }
      Vector x_next = s.x + scale * draw;

      if (model.safety.count() > 0) {
        const double h = model.safety.min_value(x_next);
        min_h = std::min(min_h, h);
        if (!(h > 0.0)) {
          violated_at = k + 1;
          break;
        }
        if (!z_from_model) {
          z_next = barrier_composite(x_next, model.safety, model.config) -
                   model.shift_offset;
        }
      } else {
        z_next = Vector::Zero(0);
      }
      s.x = std::move(x_next);
      s.z = std::move(z_next);
    }

    min_h_values.push_back(min_h);
    if (violated_at < 0) {
      ++safe_count;
    } else {
      ++violation_steps[violated_at];
    }
  }

  std::sort(min_h_values.begin(), min_h_values.end());
  auto nearest_rank = [&](double p) {
    const int rank = std::max(
        1, static_cast<int>(std::ceil(p * static_cast<double>(min_h_values.size()))));
    return min_h_values[rank - 1];
  };

  SafetyReport report;
  report.samples = samples;
  report.horizon = horizon;
  report.fraction_safe = static_cast<double>(safe_count) / samples;
  report.min_h_p5 = nearest_rank(0.05);
  report.min_h_p50 = nearest_rank(0.50);
  report.min_h_p95 = nearest_rank(0.95);
  for (const auto& [step, count] : violation_steps) {
    report.first_violation_histogram.emplace_back(step, count);
  }
  return report;
}

}  // namespace gpbas
