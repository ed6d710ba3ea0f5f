#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gpbas/barrier.hpp"
#include "gpbas/control.hpp"
#include "gpbas/dynamics.hpp"
#include "gpbas/gp.hpp"
#include "gpbas/rng.hpp"
#include "gpbas/types.hpp"
#include "gpbas/uncertainty.hpp"

using gpbas::BarrierConfig;
using gpbas::Dataset;
using gpbas::DynamicsEval;
using gpbas::DynamicsJacobians;
using gpbas::EmbeddedModel;
using gpbas::GaussianBelief;
using gpbas::GpDynamics;
using gpbas::GpModel;
using gpbas::KernelHyperparameters;
using gpbas::Matrix;
using gpbas::Policy;
using gpbas::Rng;
using gpbas::SafetyFunction;
using gpbas::SafetyReport;
using gpbas::TargetMode;
using gpbas::Vector;

namespace {

// Scalar delta-mode GP trained on exact samples of x_next = a x + b u.
EmbeddedModel contractive_gp_model(double a, double b, int rows, double noise) {
  Dataset data;
  data.inputs.resize(rows, 2);
  data.targets.resize(rows, 1);
  Rng rng(23);
  for (int i = 0; i < rows; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const double u = rng.uniform(-1.0, 1.0);
    data.inputs(i, 0) = x;
    data.inputs(i, 1) = u;
    data.targets(i, 0) = (a - 1.0) * x + b * u;
  }
  KernelHyperparameters h;
  h.signal_variance = 1.0;
  h.lengthscales = Vector::Constant(2, 1.5);
  h.noise_variance = noise;
  GpModel gp = gp_fit(data, {h});
  auto dyn = std::make_shared<GpDynamics>(std::move(gp), 1, TargetMode::kDelta);
  return make_embedded_model(dyn, SafetyFunction{}, BarrierConfig{}, 0.1);
}

class DriftingNoise : public gpbas::MeanDynamics {
 public:
  DriftingNoise(double drift, double variance) : drift_(drift), variance_(variance) {}
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }
  TargetMode target_mode() const override { return TargetMode::kDelta; }
  DynamicsEval eval(const Vector&, const Vector& u) const override {
    return {Vector::Constant(1, drift_ + u[0]), Vector::Constant(1, variance_)};
  }
  DynamicsJacobians jacobians(const Vector&, const Vector&) const override {
    return {Matrix::Zero(1, 1), Matrix::Ones(1, 1)};
  }

 private:
  double drift_;
  double variance_;
};

}  // namespace

TEST_CASE("psd repair clamps negative eigenvalues and symmetrizes") {
  Matrix skew(2, 2);
  skew << 1.0, 0.3, 0.1, 1.0;
  Matrix fixed = gpbas::make_psd(skew);
  CHECK((fixed - fixed.transpose()).cwiseAbs().maxCoeff() < 1e-14);

  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  Matrix clamped = gpbas::make_psd(indefinite);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(clamped);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-14);
  CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("belief construction rejects broken covariances") {
  Vector mean = Vector::Zero(2);
  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(gpbas::make_belief(mean, asym), std::invalid_argument);

  Matrix negative(2, 2);
  negative << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(gpbas::make_belief(mean, negative), std::invalid_argument);

  Matrix good = Matrix::Identity(2, 2);
  GaussianBelief belief = gpbas::make_belief(mean, good);
  CHECK(belief.cov == good);
}

TEST_CASE("a degenerate belief follows the deterministic step") {
  Matrix a = Matrix::Constant(1, 1, 0.9);
  Matrix b = Matrix::Constant(1, 1, 0.1);
  auto dyn = std::make_shared<gpbas::AnalyticDynamics>(
      1, 1, TargetMode::kDelta,
      [](const Vector& x, const Vector& u) {
        return Vector(-0.1 * x + 0.1 * u);
      },
      [](const Vector&, const Vector&) {
        return DynamicsJacobians{Matrix::Constant(1, 1, -0.1), Matrix::Constant(1, 1, 0.1)};
      });
  EmbeddedModel model = make_embedded_model(dyn, SafetyFunction{}, BarrierConfig{}, 0.1);

  GaussianBelief belief;
  belief.mean = Vector::Constant(1, 1.0);
  belief.cov = Matrix::Zero(1, 1);
  GaussianBelief next = propagate_belief(belief, Vector::Zero(1), model);
  Vector expected = embedded_step(model.make_state(belief.mean), Vector::Zero(1), model,
                                  false)
                        .stacked();
  CHECK((next.mean - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(next.cov.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("one-step covariance matches the linear-Gaussian map") {
  EmbeddedModel model = contractive_gp_model(0.9, 0.1, 60, 1e-5);

  GaussianBelief belief;
  belief.mean = Vector::Constant(1, 0.5);
  belief.cov = Matrix::Constant(1, 1, 0.04);
  Vector u = Vector::Zero(1);
  GaussianBelief next = propagate_belief(belief, u, model);

  const Vector state = Vector::Constant(1, 0.5);
  DynamicsEval eval = model.dynamics->eval(state, u);
  DynamicsJacobians jac = model.dynamics->jacobians(state, u);
  const double a = 1.0 + jac.dx(0, 0);
  const double expected = a * 0.04 * a + eval.variance[0];
  CHECK(std::abs(next.cov(0, 0) - expected) / expected < 0.05);
  CHECK(std::abs(a - 0.9) < 0.02);
}

TEST_CASE("feedback contracts the propagated covariance") {
  EmbeddedModel model = contractive_gp_model(1.02, 0.1, 60, 1e-5);
  GaussianBelief belief;
  belief.mean = Vector::Constant(1, 0.2);
  belief.cov = Matrix::Constant(1, 1, 0.09);

  GaussianBelief open = propagate_belief(belief, Vector::Zero(1), model);
  Matrix gain = Matrix::Constant(1, 1, 3.0);
  GaussianBelief closed = propagate_belief(belief, Vector::Zero(1), model, &gain);
  CHECK(closed.cov(0, 0) < open.cov(0, 0));
}

TEST_CASE("ten-step belief tracks Monte Carlo moments") {
  EmbeddedModel model = contractive_gp_model(0.8, 0.1, 40, 1e-4);
  const int horizon = 10;
  const int samples = 10000;
  Vector u = Vector::Zero(1);

  GaussianBelief belief;
  belief.mean = Vector::Constant(1, 1.5);
  belief.cov = Matrix::Constant(1, 1, 0.01);
  std::vector<GaussianBelief> beliefs;
  for (int k = 0; k < horizon; ++k) {
    belief = propagate_belief(belief, u, model);
    beliefs.push_back(belief);
    CHECK(belief.cov(0, 0) < 0.2);
  }

  Rng rng(71);
  std::vector<double> sum(horizon, 0.0), sumsq(horizon, 0.0);
  for (int i = 0; i < samples; ++i) {
    double x = 1.5 + 0.1 * rng.normal();
    for (int k = 0; k < horizon; ++k) {
      DynamicsEval eval = model.dynamics->eval(Vector::Constant(1, x), u);
      x += eval.mean[0] + std::sqrt(std::max(eval.variance[0], 0.0)) * rng.normal();
      sum[k] += x;
      sumsq[k] += x * x;
    }
  }
  for (int k = 0; k < horizon; ++k) {
    const double mc_mean = sum[k] / samples;
    const double mc_var = (sumsq[k] - samples * mc_mean * mc_mean) / (samples - 1);
    const double se = std::sqrt(mc_var / samples);
    CHECK(std::abs(beliefs[k].mean[0] - mc_mean) < 3.0 * se);
    CHECK(std::abs(beliefs[k].cov(0, 0) - mc_var) / mc_var < 0.2);
  }
}

TEST_CASE("monte carlo rollouts are exact without predictive noise") {
  auto dyn = std::make_shared<gpbas::AnalyticDynamics>(
      1, 1, TargetMode::kDelta,
      [](const Vector& x, const Vector& u) { return Vector(-0.1 * x + 0.1 * u); },
      [](const Vector&, const Vector&) {
        return DynamicsJacobians{Matrix::Constant(1, 1, -0.1), Matrix::Constant(1, 1, 0.1)};
      });
  SafetyFunction safety;
  gpbas::Constraint keep_out;
  keep_out.value = [](const Vector& x) { return x[0] + 1.0; };
  keep_out.gradient = [](const Vector&) -> gpbas::RowVector {
    return gpbas::RowVector::Ones(1);
  };
  safety.constraints.push_back(keep_out);
  BarrierConfig config;
  config.gamma = 0.2;
  config.shift_point = Vector::Zero(1);
  EmbeddedModel model = make_embedded_model(dyn, safety, config, 0.1);

  Policy hold = [](const Vector&, int) -> Vector { return Vector::Zero(1); };
  Vector x0 = Vector::Constant(1, 1.0);
  SafetyReport report = mc_rollout(model, hold, x0, 15, 64, 5);
  CHECK(report.fraction_safe == 1.0);
  CHECK(report.first_violation_histogram.empty());
  CHECK(report.min_h_p5 == doctest::Approx(report.min_h_p95).epsilon(1e-12));

  SafetyReport again = mc_rollout(model, hold, x0, 15, 64, 5);
  CHECK(again.fraction_safe == report.fraction_safe);
  CHECK(again.min_h_p50 == report.min_h_p50);
}

TEST_CASE("monte carlo rollouts reject an empty sample budget") {
  EmbeddedModel model = contractive_gp_model(0.9, 0.1, 20, 1e-4);
  Policy hold = [](const Vector&, int) -> Vector { return Vector::Zero(1); };
  CHECK_THROWS_AS(mc_rollout(model, hold, Vector::Zero(1), 10, 0, 1),
                  std::invalid_argument);
}

TEST_CASE("monte carlo report stays internally consistent under violations") {
  auto dyn = std::make_shared<DriftingNoise>(-0.08, 0.01);
  SafetyFunction safety;
  gpbas::Constraint wall;
  wall.value = [](const Vector& x) { return x[0]; };
  wall.gradient = [](const Vector&) -> gpbas::RowVector {
    return gpbas::RowVector::Ones(1);
  };
  safety.constraints.push_back(wall);
  BarrierConfig config;
  config.gamma = 0.1;
  config.shift_point = Vector::Constant(1, 1.0);
  EmbeddedModel model = make_embedded_model(dyn, safety, config, 0.1);

  Policy hold = [](const Vector&, int) -> Vector { return Vector::Zero(1); };
  const int samples = 400;
  SafetyReport report = mc_rollout(model, hold, Vector::Constant(1, 0.5), 20, samples, 9);

  CHECK(report.samples == samples);
  CHECK(report.horizon == 20);
  CHECK(report.fraction_safe >= 0.0);
  CHECK(report.fraction_safe < 1.0);
  CHECK(report.min_h_p5 <= report.min_h_p50);
  CHECK(report.min_h_p50 <= report.min_h_p95);

  int violations = 0;
  for (const auto& [step, count] : report.first_violation_histogram) {
    CHECK(step >= 1);
    CHECK(step <= 20);
    CHECK(count > 0);
    violations += count;
  }
  CHECK(violations == samples - static_cast<int>(std::lround(report.fraction_safe * samples)));
}
