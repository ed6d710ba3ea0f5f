#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gpbas/dynamics.hpp"
#include "gpbas/gp.hpp"
#include "gpbas/rng.hpp"
#include "gpbas/types.hpp"

using gpbas::AnalyticDynamics;
using gpbas::Dataset;
using gpbas::DynamicsEval;
using gpbas::DynamicsJacobians;
using gpbas::GpDynamics;
using gpbas::GpModel;
using gpbas::GreyBoxDynamics;
using gpbas::KernelHyperparameters;
using gpbas::Matrix;
using gpbas::Rng;
using gpbas::TargetMode;
using gpbas::Vector;

namespace {

std::shared_ptr<AnalyticDynamics> pendulum() {
  auto f = [](const Vector& x, const Vector& u) {
    Vector out(2);
    out << x[1], -std::sin(x[0]) + u[0];
    return out;
  };
  auto jac = [](const Vector& x, const Vector&) {
    DynamicsJacobians j;
    j.dx.resize(2, 2);
    j.dx << 0.0, 1.0, -std::cos(x[0]), 0.0;
    j.du.resize(2, 1);
    j.du << 0.0, 1.0;
    return j;
  };
  return std::make_shared<AnalyticDynamics>(2, 1, TargetMode::kDerivative, f, jac);
}

KernelHyperparameters iso_hyper(int input_dim, double lengthscale) {
  KernelHyperparameters h;
  h.signal_variance = 1.0;
  h.lengthscales = Vector::Constant(input_dim, lengthscale);
  h.noise_variance = 1e-6;
  return h;
}

GpModel smooth_gp(Rng& rng, int input_dim, int output_dim, int n) {
  Dataset data;
  data.inputs.resize(n, input_dim);
  data.targets.resize(n, output_dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < input_dim; ++d) data.inputs(i, d) = rng.uniform(-1.0, 1.0);
    for (int e = 0; e < output_dim; ++e) {
      data.targets(i, e) = std::sin(data.inputs(i, 0) + 0.3 * e) + 0.2 * rng.normal();
    }
  }
  std::vector<KernelHyperparameters> hyper(output_dim, iso_hyper(input_dim, 0.8));
  return gp_fit(data, hyper);
}

}  // namespace

TEST_CASE("analytic dynamics reports zero predictive variance") {
  auto model = pendulum();
  Vector x(2), u(1);
  x << 0.4, -0.3;
  u << 0.2;
  DynamicsEval eval = model->eval(x, u);
  CHECK(eval.mean[0] == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(eval.mean[1] == doctest::Approx(-std::sin(0.4) + 0.2).epsilon(1e-12));
  CHECK(eval.variance.isZero(0.0));
}

TEST_CASE("gp dynamics exposes the posterior over stacked inputs") {
  Rng rng(4);
  GpModel gp = smooth_gp(rng, 3, 2, 15);
  GpDynamics dyn(gp, 2, TargetMode::kDerivative);
  CHECK(dyn.state_dim() == 2);
  CHECK(dyn.control_dim() == 1);

  Vector x(2), u(1);
  x << 0.2, -0.4;
  u << 0.1;
  Vector stacked(3);
  stacked << x, u;
  gpbas::GpPrediction p = gp_posterior(dyn.model(), stacked);
  DynamicsEval eval = dyn.eval(x, u);
  CHECK((eval.mean - p.mean).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((eval.variance - p.variance).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gp dynamics jacobians match finite differences") {
  Rng rng(8);
  GpModel gp = smooth_gp(rng, 3, 2, 15);
  GpDynamics dyn(gp, 2, TargetMode::kDerivative);

  Vector x(2), u(1);
  x << 0.15, -0.25;
  u << 0.3;
  DynamicsJacobians jac = dyn.jacobians(x, u);
  const double step = 1e-5;

  for (int d = 0; d < 2; ++d) {
    Vector lo = x, hi = x;
    lo[d] -= step;
    hi[d] += step;
    Vector fd = (dyn.eval(hi, u).mean - dyn.eval(lo, u).mean) / (2.0 * step);
    for (int e = 0; e < 2; ++e) {
      CHECK(std::abs(jac.dx(e, d) - fd[e]) / std::max(std::abs(fd[e]), 1e-6) < 1e-4);
    }
  }
  Vector lo = u, hi = u;
  lo[0] -= step;
  hi[0] += step;
  Vector fd = (dyn.eval(x, hi).mean - dyn.eval(x, lo).mean) / (2.0 * step);
  for (int e = 0; e < 2; ++e) {
    CHECK(std::abs(jac.du(e, 0) - fd[e]) / std::max(std::abs(fd[e]), 1e-6) < 1e-4);
  }
}

TEST_CASE("grey-box model overrides only the learned rows") {
  Rng rng(12);
  auto known = pendulum();
  GpModel gp = smooth_gp(rng, 3, 1, 12);
  GreyBoxDynamics grey(known, gp, {1});

  Vector x(2), u(1);
  x << 0.3, 0.5;
  u << -0.2;
  DynamicsEval base = known->eval(x, u);
  DynamicsEval mixed = grey.eval(x, u);
  Vector stacked(3);
  stacked << x, u;
  gpbas::GpPrediction p = gp_posterior(gp, stacked);

  CHECK(mixed.mean[0] == doctest::Approx(base.mean[0]).epsilon(1e-14));
  CHECK(mixed.mean[1] == doctest::Approx(p.mean[0]).epsilon(1e-14));
  CHECK(mixed.variance[0] == 0.0);
  CHECK(mixed.variance[1] == doctest::Approx(p.variance[0]).epsilon(1e-14));

  DynamicsJacobians jac = grey.jacobians(x, u);
  DynamicsJacobians base_jac = known->jacobians(x, u);
  CHECK((jac.dx.row(0) - base_jac.dx.row(0)).cwiseAbs().maxCoeff() < 1e-14);
  Matrix g = gp_posterior_mean_gradient(gp, stacked);
  CHECK((jac.dx.row(1) - g.row(0).head(2)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(jac.du(1, 0) == doctest::Approx(g(0, 2)).epsilon(1e-14));
}

TEST_CASE("grey-box construction validates the row list") {
  Rng rng(13);
  auto known = pendulum();
  GpModel gp = smooth_gp(rng, 3, 1, 8);
  CHECK_THROWS_AS(GreyBoxDynamics(known, gp, {5}), std::invalid_argument);
  CHECK_THROWS_AS(GreyBoxDynamics(known, gp, {0, 1}), std::invalid_argument);
}

TEST_CASE("rk4 matches the exact flow of a linear system") {
  auto decay = std::make_shared<AnalyticDynamics>(
      1, 1, TargetMode::kDerivative,
      [](const Vector& x, const Vector& u) { return Vector(-x + u); },
      [](const Vector&, const Vector&) {
        DynamicsJacobians j;
        j.dx = Matrix::Constant(1, 1, -1.0);
        j.du = Matrix::Constant(1, 1, 1.0);
        return j;
      });
  Vector x = Vector::Constant(1, 2.0);
  Vector u = Vector::Zero(1);
  Vector next = rk4_step(*decay, x, u, 0.1);
  CHECK(std::abs(next[0] - 2.0 * std::exp(-0.1)) < 2.5e-7);
}

TEST_CASE("rk4 error shrinks fourth order under step doubling") {
  auto model = pendulum();
  Vector u = Vector::Zero(1);

  auto integrate = [&](double dt, int steps) {
    Vector x(2);
    x << 1.2, 0.0;
    for (int k = 0; k < steps; ++k) x = rk4_step(*model, x, u, dt);
    return x;
  };

  Vector reference = integrate(1.0 / 1024.0, 1024);
  const double coarse = (integrate(0.05, 20) - reference).norm();
  const double fine = (integrate(0.025, 40) - reference).norm();
  CHECK(coarse / fine > 10.0);
  CHECK(coarse / fine < 24.0);
}

TEST_CASE("rk4 jacobians match finite differences") {
  auto model = pendulum();
  Vector x(2), u(1);
  x << 0.7, -0.2;
  u << 0.4;
  const double dt = 0.05;
  gpbas::Rk4Result result = rk4_step_with_jacobians(*model, x, u, dt);
  CHECK((result.x_next - rk4_step(*model, x, u, dt)).cwiseAbs().maxCoeff() < 1e-14);

  const double step = 1e-6;
  for (int d = 0; d < 2; ++d) {
    Vector lo = x, hi = x;
    lo[d] -= step;
    hi[d] += step;
    Vector fd = (rk4_step(*model, hi, u, dt) - rk4_step(*model, lo, u, dt)) / (2.0 * step);
    CHECK((result.dx.col(d) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
  Vector lo = u, hi = u;
  lo[0] -= step;
  hi[0] += step;
  Vector fd = (rk4_step(*model, x, hi, dt) - rk4_step(*model, x, lo, dt)) / (2.0 * step);
  CHECK((result.du.col(0) - fd).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("delta wrapper returns one-step differences with matching jacobians") {
  auto model = pendulum();
  gpbas::Rk4DeltaDynamics delta(model, 0.02);
  CHECK(delta.target_mode() == TargetMode::kDelta);

  Vector x(2), u(1);
  x << 0.4, 0.1;
  u << -0.3;
  DynamicsEval eval = delta.eval(x, u);
  Vector expected = rk4_step(*model, x, u, 0.02) - x;
  CHECK((eval.mean - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(eval.variance.isZero(0.0));

  gpbas::Rk4Result chained = rk4_step_with_jacobians(*model, x, u, 0.02);
  DynamicsJacobians jac = delta.jacobians(x, u);
  CHECK((jac.dx - (chained.dx - Matrix::Identity(2, 2))).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((jac.du - chained.du).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rk4 refuses delta-mode dynamics") {
  auto model = pendulum();
  auto delta = std::make_shared<gpbas::Rk4DeltaDynamics>(model, 0.02);
  Vector x = Vector::Zero(2);
  Vector u = Vector::Zero(1);
  CHECK_THROWS_AS(rk4_step(*delta, x, u, 0.02), std::invalid_argument);
}
