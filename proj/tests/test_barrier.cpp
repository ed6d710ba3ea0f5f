#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "gpbas/barrier.hpp"
#include "gpbas/dynamics.hpp"
#include "gpbas/rng.hpp"
#include "gpbas/types.hpp"

using gpbas::BarrierCombine;
using gpbas::BarrierConfig;
using gpbas::BarrierKind;
using gpbas::BarrierStateGradients;
using gpbas::BoundaryViolation;
using gpbas::Constraint;
using gpbas::DynamicsEval;
using gpbas::DynamicsJacobians;
using gpbas::EmbeddedModel;
using gpbas::EmbeddedState;
using gpbas::Matrix;
using gpbas::Rng;
using gpbas::RowVector;
using gpbas::SafetyFunction;
using gpbas::TargetMode;
using gpbas::Vector;

namespace {

// h(x) = x over a scalar state, safe on x > 0.
SafetyFunction half_line() {
  Constraint c;
  c.value = [](const Vector& x) { return x[0]; };
  c.gradient = [](const Vector&) -> RowVector { return RowVector::Ones(1); };
  c.description = "half line";
  SafetyFunction s;
  s.constraints.push_back(c);
  return s;
}

BarrierConfig shifted_config(double gamma, const Vector& shift) {
  BarrierConfig config;
  config.gamma = gamma;
  config.shift_point = shift;
  return config;
}

// Dynamics with a constant mean and constant predictive variance, for moment
// checks where the answer must be known in closed form.
class FixedNoise : public gpbas::MeanDynamics {
 public:
  FixedNoise(double mean, double variance) : mean_(mean), variance_(variance) {}
  int state_dim() const override { return 1; }
  int control_dim() const override { return 1; }
  TargetMode target_mode() const override { return TargetMode::kDerivative; }
  DynamicsEval eval(const Vector&, const Vector&) const override {
    return {Vector::Constant(1, mean_), Vector::Constant(1, variance_)};
  }
  DynamicsJacobians jacobians(const Vector&, const Vector&) const override {
    return {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  }

 private:
  double mean_;
  double variance_;
};

}  // namespace

TEST_CASE("inverse barrier closed form and round trip") {
  CHECK(barrier_value(BarrierKind::kInverse, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(barrier_value(BarrierKind::kInverse, 0.5) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(barrier_deriv(BarrierKind::kInverse, 1.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(barrier_inverse(BarrierKind::kInverse,
                        barrier_value(BarrierKind::kInverse, 0.37)) ==
        doctest::Approx(0.37).epsilon(1e-12));
  CHECK(barrier_value(BarrierKind::kInverse, 1e-3) == doctest::Approx(1000.0));
  CHECK(barrier_value(BarrierKind::kInverse, 1e-3) >
        barrier_value(BarrierKind::kInverse, 1e-2));
}

TEST_CASE("ball constraint measures squared clearance") {
  Vector center(2);
  center << 2.0, 2.2;
  Constraint ball = gpbas::ball_constraint(center, 1.0, {0, 1});
  CHECK(ball.value(center) == doctest::Approx(-1.0).epsilon(1e-12));

  Vector x(2);
  x << 4.0, 2.2;
  CHECK(ball.value(x) == doctest::Approx(3.0).epsilon(1e-12));
  RowVector grad = ball.gradient(x);
  CHECK(grad(0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(grad(1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("safety function reports the first violated constraint") {
  Vector center = Vector::Zero(2);
  SafetyFunction safety;
  safety.constraints.push_back(gpbas::ball_constraint(center, 0.5, {0, 1}, "inner"));
  Vector safe(2), unsafe(2);
  safe << 1.0, 1.0;
  unsafe << 0.1, 0.0;
  CHECK(safety.is_safe(safe));
  CHECK(!safety.is_safe(unsafe));
  try {
    check_safe(unsafe, safety, 7);
    CHECK(false);
  } catch (const BoundaryViolation& v) {
    CHECK(v.constraint_index == 0);
    CHECK(v.step == 7);
    CHECK(v.h_value < 0.0);
  }
}

TEST_CASE("barrier config validation enforces the decay range") {
  SafetyFunction safety = half_line();
  BarrierConfig config = shifted_config(1.0, Vector::Constant(1, 1.0));
  CHECK_THROWS_AS(validate_barrier_config(safety, config, true), std::invalid_argument);
  config.gamma = 0.5;
  CHECK_NOTHROW(validate_barrier_config(safety, config, true));
  config.shift_point = Vector::Constant(1, -1.0);
  CHECK_THROWS_AS(validate_barrier_config(safety, config, false), BoundaryViolation);
}

TEST_CASE("combine modes set the barrier dimension") {
  SafetyFunction safety;
  safety.constraints.push_back(gpbas::ball_constraint(Vector::Zero(2), 0.3, {0, 1}, "a"));
  safety.constraints.push_back(gpbas::ball_constraint(Vector::Ones(2) * 3.0, 0.3, {0, 1}, "b"));

  BarrierConfig summed;
  CHECK(barrier_state_dim(safety, summed) == 1);
  BarrierConfig split;
  split.combine = BarrierCombine::kPerConstraint;
  CHECK(barrier_state_dim(safety, split) == 2);

  Vector x(2);
  x << 1.5, 1.5;
  Vector beta_sum = barrier_composite(x, safety, summed);
  Vector beta_split = barrier_composite(x, safety, split);
  REQUIRE(beta_sum.size() == 1);
  REQUIRE(beta_split.size() == 2);
  CHECK(beta_sum[0] == doctest::Approx(beta_split.sum()).epsilon(1e-12));
}

TEST_CASE("continuous barrier dynamics hold still at a consistent rest point") {
  SafetyFunction safety = half_line();
  BarrierConfig config = shifted_config(0.7, Vector::Constant(1, 1.0));
  Vector x = Vector::Constant(1, 2.0);
  Vector beta0 = barrier_shift_offset(safety, config);
  Vector z = barrier_composite(x, safety, config) - beta0;
  Vector zdot = barrier_state_rhs(x, z, Vector::Zero(1), safety, config);
  CHECK(std::abs(zdot[0]) < 1e-14);
}

TEST_CASE("zero decay drops the consistency correction") {
  SafetyFunction safety = half_line();
  BarrierConfig config = shifted_config(0.0, Vector::Constant(1, 1.0));
  Vector x = Vector::Constant(1, 2.0);
  Vector z = Vector::Constant(1, 0.8);
  Vector xdot = Vector::Constant(1, 0.6);
  Matrix b = barrier_input_matrix(x, z, safety, config);
  Vector zdot = barrier_state_rhs(x, z, xdot, safety, config);
  CHECK(zdot[0] == doctest::Approx(b(0, 0) * 0.6).epsilon(1e-12));
}

TEST_CASE("continuous barrier dynamics match the hand-computed slope") {
  SafetyFunction safety = half_line();
  BarrierConfig config = shifted_config(0.4, Vector::Constant(1, 1.0));
  Vector x = Vector::Constant(1, 2.0);
  Vector beta0 = barrier_shift_offset(safety, config);
  CHECK(beta0[0] == doctest::Approx(1.0).epsilon(1e-12));
  Vector z = barrier_composite(x, safety, config) - beta0;
  Vector zdot = barrier_state_rhs(x, z, Vector::Ones(1), safety, config);
  CHECK(zdot[0] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("discrete barrier recursion fixes its consistent point") {
  SafetyFunction safety;
  safety.constraints.push_back(gpbas::ball_constraint(Vector::Zero(2), 0.5, {0, 1}));
  BarrierConfig config;
  config.gamma = 0.6;
  Vector x(2);
  x << 1.2, -0.7;
  Vector w = barrier_composite(x, safety, config);
  Vector w_next = barrier_state_step(x, w, x, safety, config);
  CHECK((w_next - w).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("discrete barrier recursion matches the hand-computed step") {
  SafetyFunction safety = half_line();
  BarrierConfig config;
  config.gamma = 0.5;
  Vector x = Vector::Constant(1, 2.0);
  Vector x_next = Vector::Constant(1, 1.0);
  Vector w = Vector::Constant(1, 0.5);
  Vector w_next = barrier_state_step(x, w, x_next, safety, config);
  CHECK(w_next[0] == doctest::Approx(1.0).epsilon(1e-12));

  config.gamma = 0.0;
  Vector recomputed = barrier_state_step(x, Vector::Constant(1, 123.0), x_next, safety, config);
  CHECK(recomputed[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discrete barrier gradients have the fixed decay block") {
  SafetyFunction safety;
  safety.constraints.push_back(gpbas::ball_constraint(Vector::Zero(2), 0.5, {0, 1}));
  Vector x(2), x_next(2);
  x << 1.0, 0.8;
  x_next << 0.9, 0.9;
  Matrix fx = Matrix::Identity(2, 2) * 0.95;
  Matrix fu = Matrix::Identity(2, 2) * 0.1;

  BarrierConfig frozen;
  frozen.gamma = 0.0;
  BarrierStateGradients g0 = barrier_state_gradients(x, x_next, fx, fu, safety, frozen);
  CHECK(g0.dw.cwiseAbs().maxCoeff() == 0.0);

  BarrierConfig decayed;
  decayed.gamma = 0.35;
  BarrierStateGradients g = barrier_state_gradients(x, x_next, fx, fu, safety, decayed);
  CHECK((g.dw + 0.35 * Matrix::Identity(1, 1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discrete barrier gradients match finite differences") {
  Rng rng(19);
  SafetyFunction safety;
  safety.constraints.push_back(gpbas::ball_constraint(Vector::Zero(2), 0.5, {0, 1}, "a"));
  safety.constraints.push_back(
      gpbas::ball_constraint(Vector::Constant(2, 2.0), 0.4, {0, 1}, "b"));
  BarrierConfig config;
  config.gamma = 0.3;

  Matrix a(2, 2), b(2, 1);
  a << 0.9, 0.05, -0.1, 0.97;
  b << 0.0, 0.2;
  auto next_state = [&](const Vector& x, const Vector& u) { return Vector(a * x + b * u); };

  for (int trial = 0; trial < 20; ++trial) {
    Vector x(2);
    x << rng.uniform(0.8, 1.4), rng.uniform(-1.4, -0.8);
    if (!safety.is_safe(x)) continue;
    Vector u = Vector::Constant(1, rng.uniform(-0.5, 0.5));
    Vector x_next = next_state(x, u);
    if (!safety.is_safe(x_next)) continue;

    Vector w = barrier_composite(x, safety, config) + Vector::Constant(1, rng.uniform(-0.1, 0.1));
    BarrierStateGradients g =
        barrier_state_gradients(x, x_next, a, b, safety, config);

    const double step = 1e-6;
    auto w_of = [&](const Vector& xx, const Vector& ww, const Vector& uu) {
      return barrier_state_step(xx, ww, next_state(xx, uu), safety, config);
    };
    for (int d = 0; d < 2; ++d) {
      Vector hi = x, lo = x;
      hi[d] += step;
      lo[d] -= step;
      Vector fd = (w_of(hi, w, u) - w_of(lo, w, u)) / (2.0 * step);
      CHECK(std::abs(g.dx(0, d) - fd[0]) / std::max(std::abs(fd[0]), 1e-4) < 1e-4);
    }
    {
      Vector hi = w, lo = w;
      hi[0] += step;
      lo[0] -= step;
      Vector fd = (w_of(x, hi, u) - w_of(x, lo, u)) / (2.0 * step);
      CHECK(std::abs(g.dw(0, 0) - fd[0]) / std::max(std::abs(fd[0]), 1e-4) < 1e-4);
    }
    {
      Vector hi = u, lo = u;
      hi[0] += step;
      lo[0] -= step;
      Vector fd = (w_of(x, w, hi) - w_of(x, w, lo)) / (2.0 * step);
      CHECK(std::abs(g.du(0, 0) - fd[0]) / std::max(std::abs(fd[0]), 1e-4) < 1e-4);
    }
  }
}

TEST_CASE("barrier moments collapse when the prediction is exact") {
  auto dyn = std::make_shared<FixedNoise>(0.5, 0.0);
  EmbeddedModel model = gpbas::make_embedded_model(
      dyn, half_line(), shifted_config(0.3, Vector::Constant(1, 1.0)), 0.1);
  Vector x = Vector::Constant(1, 2.0);
  Vector z = model.make_state(x).z;
  gpbas::BasMoments m = barrier_state_moments(x, z, Vector::Zero(1), model);
  CHECK(m.cov.cwiseAbs().maxCoeff() < 1e-14);
  Vector rhs = barrier_state_rhs(x, z, Vector::Constant(1, 0.5), model.safety, model.config);
  CHECK(std::abs(m.mean[0] - rhs[0]) < 1e-14);
}

TEST_CASE("barrier moments match the scalar quadratic form and Monte Carlo") {
  const double h = std::sqrt(1.0 / 0.3);
  auto dyn = std::make_shared<FixedNoise>(0.5, 4.0);
  EmbeddedModel model = gpbas::make_embedded_model(
      dyn, half_line(), shifted_config(0.2, Vector::Constant(1, 1.0)), 0.1);
  Vector x = Vector::Constant(1, h);
  Vector z = model.make_state(x).z;
  gpbas::BasMoments m = barrier_state_moments(x, z, Vector::Zero(1), model);
  CHECK(m.cov(0, 0) == doctest::Approx(0.36).epsilon(1e-9));

  const int samples = 100000;
  Rng rng(101);
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < samples; ++i) {
    Vector xdot = Vector::Constant(1, 0.5 + 2.0 * rng.normal());
    double zdot = barrier_state_rhs(x, z, xdot, model.safety, model.config)[0];
    sum += zdot;
    sumsq += zdot * zdot;
  }
  const double mc_mean = sum / samples;
  const double mc_var = (sumsq - samples * mc_mean * mc_mean) / (samples - 1);
  const double mean_se = std::sqrt(mc_var / samples);
  const double var_se = mc_var * std::sqrt(2.0 / (samples - 1));
  CHECK(std::abs(mc_mean - m.mean[0]) < 3.0 * mean_se);
  CHECK(std::abs(mc_var - m.cov(0, 0)) < 3.0 * var_se);
}

TEST_CASE("barrier moments vanish where the constraint gradient is flat") {
  Constraint flat;
  flat.value = [](const Vector& x) { return 1.0 + x[0] * x[0]; };
  flat.gradient = [](const Vector& x) -> RowVector {
    return RowVector::Constant(1, 2.0 * x[0]);
  };
  SafetyFunction safety;
  safety.constraints.push_back(flat);
  auto dyn = std::make_shared<FixedNoise>(0.5, 9.0);
  EmbeddedModel model =
      gpbas::make_embedded_model(dyn, safety, shifted_config(0.2, Vector::Zero(1)), 0.1);
  Vector x = Vector::Zero(1);
  gpbas::BasMoments m = barrier_state_moments(x, model.make_state(x).z, Vector::Zero(1), model);
  CHECK(m.cov.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("normal quantile hits tabulated points") {
  CHECK(gpbas::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(gpbas::normal_quantile(0.9772) - 1.9991) < 5e-4);
  CHECK(std::abs(gpbas::normal_quantile(0.8413) - 0.9998) < 5e-4);
  for (double rho : {0.6, 0.8, 0.95, 0.99}) {
    const double phi = gpbas::normal_quantile(rho);
    CHECK(0.5 * (1.0 + std::erf(phi / std::sqrt(2.0))) == doctest::Approx(rho).epsilon(1e-10));
  }
}

TEST_CASE("barrier bound adds scaled standard deviations") {
  Vector mu = Vector::Constant(1, 1.0);
  Matrix cov = Matrix::Constant(1, 1, 4.0);
  CHECK(gpbas::barrier_state_bound(mu, cov, 0.0)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gpbas::barrier_state_bound(mu, cov, 2.0)[0] == doctest::Approx(5.0).epsilon(1e-12));

  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    Vector m = rng.normal_vector(3);
    Matrix c = Matrix::Zero(3, 3);
    c.diagonal() << rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0);
    Vector lo = gpbas::barrier_state_bound(m, c, 0.5);
    Vector hi = gpbas::barrier_state_bound(m, c, 1.5);
    CHECK(((hi - lo).array() >= -1e-14).all());
  }
}

TEST_CASE("embedded step keeps a shifted state consistent") {
  auto dyn = std::make_shared<FixedNoise>(0.0, 0.0);
  EmbeddedModel model = gpbas::make_embedded_model(
      dyn, half_line(), shifted_config(0.4, Vector::Constant(1, 1.0)), 0.1);
  EmbeddedState s = model.make_state(Vector::Constant(1, 1.0));
  CHECK(std::abs(s.z[0]) < 1e-14);
  EmbeddedState next = embedded_step(s, Vector::Zero(1), model, true);
  CHECK(std::abs(next.x[0] - 1.0) < 1e-14);
  CHECK(std::abs(next.z[0]) < 1e-14);
}

TEST_CASE("stochastic bound only raises the barrier state") {
  auto dyn = std::make_shared<FixedNoise>(-0.2, 0.5);
  BarrierConfig config = shifted_config(0.3, Vector::Constant(1, 1.0));
  config.quantile_phi = 1.5;
  EmbeddedModel model = gpbas::make_embedded_model(dyn, half_line(), config, 0.1);

  EmbeddedState s = model.make_state(Vector::Constant(1, 2.0));
  EmbeddedState bounded = s, plain = s;
  for (int k = 0; k < 5; ++k) {
    bounded = embedded_step(bounded, Vector::Zero(1), model, true);
    plain = embedded_step(plain, Vector::Zero(1), model, false);
    CHECK((bounded.x - plain.x).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(bounded.z[0] >= plain.z[0] - 1e-14);
  }
  CHECK(bounded.z[0] > plain.z[0]);
}

TEST_CASE("embedded step jacobians match finite differences") {
  Matrix a(2, 2), b(2, 1);
  a << 0.0, 1.0, -1.0, -0.4;
  b << 0.0, 1.0;
  auto dyn = std::make_shared<gpbas::AnalyticDynamics>(
      2, 1, TargetMode::kDerivative,
      [a, b](const Vector& x, const Vector& u) { return Vector(a * x + b * u); },
      [a, b](const Vector&, const Vector&) {
        return DynamicsJacobians{a, b};
      });
  SafetyFunction safety;
  safety.constraints.push_back(gpbas::ball_constraint(Vector::Constant(2, 2.0), 0.5, {0, 1}));
  BarrierConfig config = shifted_config(0.25, Vector::Zero(2));
  EmbeddedModel model = gpbas::make_embedded_model(dyn, safety, config, 0.05);

  EmbeddedState s;
  s.x = Vector::Zero(2);
  s.x << 0.4, -0.3;
  s.z = model.make_state(s.x).z + Vector::Constant(1, 0.05);
  Vector u = Vector::Constant(1, 0.2);
  gpbas::EmbeddedJacobians jac = embedded_step_jacobians(s, u, model);

  const double step = 1e-6;
  const int dim = model.embedded_dim();
  auto step_from = [&](const Vector& stacked, const Vector& uu) {
    return embedded_step(model.unstack(stacked), uu, model, false).stacked();
  };
  Vector stacked = s.stacked();
  for (int d = 0; d < dim; ++d) {
    Vector hi = stacked, lo = stacked;
    hi[d] += step;
    lo[d] -= step;
    Vector fd = (step_from(hi, u) - step_from(lo, u)) / (2.0 * step);
    CHECK((jac.a.col(d) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
  Vector hi = u, lo = u;
  hi[0] += step;
  lo[0] -= step;
  Vector fd = (step_from(stacked, hi) - step_from(stacked, lo)) / (2.0 * step);
  CHECK((jac.b.col(0) - fd).cwiseAbs().maxCoeff() < 1e-6);
}
