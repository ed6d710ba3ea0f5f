#include "gpbas/gp.hpp"

#include <Eigen/Cholesky>

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace gpbas {

namespace {

std::atomic<long> g_variance_clamps{0};

void check_hyper(const KernelHyperparameters& hyper, int input_dim) {
  require(hyper.signal_variance > 0.0, "signal variance must be positive");
  require(hyper.noise_variance >= 0.0, "noise variance must be nonnegative");
  require(hyper.lengthscales.size() == input_dim,
          "lengthscale count does not match input dimension");
  require((hyper.lengthscales.array() > 0.0).all(), "lengthscales must be positive");
  require_finite(hyper.lengthscales, "lengthscales");
}

void check_dataset(const Dataset& data) {
  require(data.size() >= 1, "dataset is empty");
  require(data.input_dim() >= 1, "dataset has no input columns");
  require(data.output_dim() >= 1, "dataset has no target columns");
  require(data.targets.rows() == data.inputs.rows(),
          "input and target row counts differ");
  require_finite(data.inputs, "dataset inputs");
  require_finite(data.targets, "dataset targets");
}

// Squared distance scaled by the ARD lengthscales. Works on row or column
// vector expressions.
template <typename A, typename B>
double scaled_sqdist(const A& a, const B& b, const Vector& lengthscales) {
  double s = 0.0;
  for (int d = 0; d < lengthscales.size(); ++d) {
    const double diff = (a(d) - b(d)) / lengthscales[d];
    s += diff * diff;
  }
  return s;
}

// Kernel between a query point and training row i of one output's GP.
double kernel_to_row(const GpModel& model, int e, const Vector& query, int i) {
  return model.hyper[e].signal_variance *
         std::exp(-0.5 * scaled_sqdist(query, model.data.inputs.row(i),
                                       model.hyper[e].lengthscales));
}

struct DimFit {
  Matrix chol;
  Vector alpha;
  double jitter = 0.0;
};

// Factor K + (sn^2 + jitter) I for one output, escalating jitter on failure.
DimFit factor_dim(const Matrix& kernel, const Vector& centered_targets,
                  const KernelHyperparameters& hyper) {
  const int n = static_cast<int>(kernel.rows());
  const double scale = kernel.trace() / n;
  const double levels[] = {0.0, 1e-10, 1e-8, 1e-6};
  for (double level : levels) {
    const double jitter = level * scale;
    Matrix shifted = kernel;
    shifted.diagonal().array() += hyper.noise_variance + jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Vector alpha = llt.solve(centered_targets);
    if (!alpha.allFinite()) continue;
    DimFit fit;
    fit.chol = llt.matrixL();
    fit.alpha = std::move(alpha);
    fit.jitter = jitter;
    return fit;
  }
  std::ostringstream what;
  what << "kernel matrix is not positive definite; tried jitter levels";
  for (double level : levels) what << ' ' << level * scale;
  throw NumericalError(what.str());
}

// Log marginal likelihood of one output plus its gradient over
// [log sf2, log l_1..D, log sn2]. Shared by the public op and the optimizer.
void lml_dim(const GpModel& model, int dim, double* value, Vector* gradient) {
  const Dataset& data = model.data;
  const KernelHyperparameters& hyper = model.hyper[dim];
  const int n = data.size();
  const int d_in = data.input_dim();
  const Matrix& chol = model.chol[dim];
  const Vector& alpha = model.alpha[dim];
  const Vector centered = data.targets.col(dim).array() - model.target_offsets[dim];

  if (value) {
    double log_det_half = chol.diagonal().array().log().sum();
    *value = -0.5 * centered.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * M_PI);
  }
  if (!gradient) return;

  // A = alpha alpha^T - K_hat^-1; each gradient entry is 1/2 tr(A dK/dtheta).
  Matrix kinv = Matrix::Identity(n, n);
  chol.triangularView<Eigen::Lower>().solveInPlace(kinv);
  chol.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv);
  Matrix a = alpha * alpha.transpose() - kinv;

  Matrix noiseless = kernel_matrix(data.inputs, data.inputs, hyper);
  gradient->resize(d_in + 2);

  double g_signal = 0.0;
  Vector g_length = Vector::Zero(d_in);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double ak = a(i, j) * noiseless(i, j);
      g_signal += ak;
      for (int d = 0; d < d_in; ++d) {
        const double diff = data.inputs(i, d) - data.inputs(j, d);
        g_length[d] += ak * diff * diff /
                       (hyper.lengthscales[d] * hyper.lengthscales[d]);
      }
    }
  }
  (*gradient)[0] = 0.5 * g_signal;
  gradient->segment(1, d_in) = 0.5 * g_length;
  (*gradient)[d_in + 1] = 0.5 * hyper.noise_variance * a.trace();
}

KernelHyperparameters hyper_from_log(const Vector& theta, int d_in) {
  KernelHyperparameters hyper;
  hyper.signal_variance = std::exp(theta[0]);
  hyper.lengthscales = theta.segment(1, d_in).array().exp();
  hyper.noise_variance = std::exp(theta[d_in + 1]);
  return hyper;
}

Vector log_from_hyper(const KernelHyperparameters& hyper) {
  const int d_in = static_cast<int>(hyper.lengthscales.size());
  Vector theta(d_in + 2);
  theta[0] = std::log(hyper.signal_variance);
  theta.segment(1, d_in) = hyper.lengthscales.array().log();
  theta[d_in + 1] = std::log(hyper.noise_variance);
  return theta;
}

}  // namespace

double kernel_eval(const Vector& a, const Vector& b, const KernelHyperparameters& hyper) {
  require(a.size() == b.size(), "kernel arguments have different sizes");
  check_hyper(hyper, static_cast<int>(a.size()));
  require_finite(a, "kernel argument");
  require_finite(b, "kernel argument");
  return hyper.signal_variance * std::exp(-0.5 * scaled_sqdist(a, b, hyper.lengthscales));
}

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelHyperparameters& hyper) {
  Matrix k(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.rows(); ++j) {
      k(i, j) = hyper.signal_variance *
                std::exp(-0.5 * scaled_sqdist(a.row(i), b.row(j), hyper.lengthscales));
    }
  }
  return k;
}

GpModel gp_fit(const Dataset& data, const std::vector<KernelHyperparameters>& hyper,
               const FitOptions& options) {
  check_dataset(data);
  require(static_cast<int>(hyper.size()) == data.output_dim(),
          "hyperparameter count does not match output dimension");
  for (const auto& h : hyper) check_hyper(h, data.input_dim());

  GpModel model;
  model.data = data;
  model.hyper = hyper;
  model.target_offsets = options.center_targets
                             ? Vector(data.targets.colwise().mean())
                             : Vector(Vector::Zero(data.output_dim()));

  for (int e = 0; e < data.output_dim(); ++e) {
    Matrix kernel = kernel_matrix(data.inputs, data.inputs, hyper[e]);
    Vector centered = data.targets.col(e).array() - model.target_offsets[e];
    DimFit fit = factor_dim(kernel, centered, hyper[e]);
    model.chol.push_back(std::move(fit.chol));
    model.alpha.push_back(std::move(fit.alpha));
    model.jitter.push_back(fit.jitter);
  }
  return model;
}

GpPrediction gp_posterior(const GpModel& model, const Vector& query) {
  require(query.size() == model.input_dim(), "query dimension mismatch");
  require_finite(query, "query");

  const int n = model.data.size();
  GpPrediction out;
  out.mean.resize(model.output_dim());
  out.variance.resize(model.output_dim());
  for (int e = 0; e < model.output_dim(); ++e) {
    Vector k_star(n);
    for (int i = 0; i < n; ++i) {
      k_star[i] = kernel_to_row(model, e, query, i);
    }
    out.mean[e] = k_star.dot(model.alpha[e]) + model.target_offsets[e];
    Vector v = model.chol[e].triangularView<Eigen::Lower>().solve(k_star);
    double var = model.hyper[e].signal_variance - v.squaredNorm();
    if (var < 0.0) {
      ++g_variance_clamps;
      var = 0.0;
    }
    out.variance[e] = var;
  }
  return out;
}

Matrix gp_posterior_mean_gradient(const GpModel& model, const Vector& query) {
  require(query.size() == model.input_dim(), "query dimension mismatch");
  require_finite(query, "query");

  const int n = model.data.size();
  const int d_in = model.input_dim();
  Matrix grad = Matrix::Zero(model.output_dim(), d_in);
  for (int e = 0; e < model.output_dim(); ++e) {
    const Vector& ls = model.hyper[e].lengthscales;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d_in);
    for (int i = 0; i < n; ++i) {
      const double w = model.alpha[e][i] * kernel_to_row(model, e, query, i);
      acc -= w * (query.transpose() - model.data.inputs.row(i));
    }
    grad.row(e) = acc.array() / ls.array().square().transpose();
  }
  return grad;
}

LogMarginalLikelihood log_marginal_likelihood(const GpModel& model) {
  LogMarginalLikelihood out;
  out.gradient.resize(model.output_dim());
  for (int e = 0; e < model.output_dim(); ++e) {
    double value = 0.0;
    lml_dim(model, e, &value, &out.gradient[e]);
    out.value += value;
  }
  return out;
}

std::vector<KernelHyperparameters> optimize_hyperparameters(
    const Dataset& data, const std::vector<KernelHyperparameters>& init,
    const HyperOptOptions& options, const FitOptions& fit_options) {
  check_dataset(data);
  require(options.max_iters >= 1, "max_iters must be at least 1");
  require(static_cast<int>(init.size()) == data.output_dim(),
          "hyperparameter count does not match output dimension");
  for (const auto& h : init) check_hyper(h, data.input_dim());

  const int d_in = data.input_dim();

  // One output dimension is optimized independently of the others.
  auto optimize_one = [&](int e, KernelHyperparameters* result) {
    Dataset single;
    single.inputs = data.inputs;
    single.targets = data.targets.col(e);

    auto evaluate = [&](const Vector& theta, double* value, Vector* grad) -> bool {
      KernelHyperparameters hyper = hyper_from_log(theta, d_in);
      try {
        GpModel model = gp_fit(single, {hyper}, fit_options);
        lml_dim(model, 0, value, grad);
        return std::isfinite(*value);
      } catch (const std::exception&) {
        return false;
      }
    };

    Vector theta = log_from_hyper(init[e]);
    theta = theta.cwiseMax(-options.log_bound).cwiseMin(options.log_bound);
    double value = 0.0;
    Vector grad;
    if (!evaluate(theta, &value, &grad)) {
      // Initial point must be valid; gp_fit of the caller-provided init
      // would have thrown the same way.
      *result = init[e];
      return;
    }

    double step = options.initial_step;
    for (int iter = 0; iter < options.max_iters; ++iter) {
      bool accepted = false;
      double trial_value = 0.0;
      Vector trial_theta;
      for (int backtrack = 0; backtrack < 30; ++backtrack) {
        trial_theta = (theta + step * grad)
                          .cwiseMax(-options.log_bound)
                          .cwiseMin(options.log_bound);
        if (evaluate(trial_theta, &trial_value, nullptr) && trial_value > value) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const double gain = trial_value - value;
      theta = trial_theta;
      value = trial_value;
      if (!evaluate(theta, &value, &grad)) break;
      step = std::min(step * 1.5, 10.0);
      if (gain < options.tolerance) break;
    }
    *result = hyper_from_log(theta, d_in);
  };

  std::vector<KernelHyperparameters> out(data.output_dim());
  if (options.parallel && data.output_dim() > 1) {
    std::vector<std::thread> workers;
    for (int e = 0; e < data.output_dim(); ++e) {
      workers.emplace_back(optimize_one, e, &out[e]);
    }
    for (auto& w : workers) w.join();
  } else {
    for (int e = 0; e < data.output_dim(); ++e) optimize_one(e, &out[e]);
  }
  return out;
}

long variance_clamp_count() { return g_variance_clamps.load(); }

void verify_model(const GpModel& model, double rel_tol) {
  for (int e = 0; e < model.output_dim(); ++e) {
    Matrix kernel = kernel_matrix(model.data.inputs, model.data.inputs, model.hyper[e]);
    kernel.diagonal().array() += model.hyper[e].noise_variance + model.jitter[e];
    Matrix reconstructed = model.chol[e] * model.chol[e].transpose();
    const double rel = (reconstructed - kernel).norm() / kernel.norm();
    if (rel > rel_tol) {
      throw NumericalError("Cholesky reconstruction drifted: relative error " +
                           std::to_string(rel));
    }
    Vector centered = model.data.targets.col(e).array() - model.target_offsets[e];
    const double resid =
        (kernel * model.alpha[e] - centered).norm() / std::max(1.0, centered.norm());
    if (resid > 1e-6) {
      throw NumericalError("alpha does not solve the kernel system: residual " +
                           std::to_string(resid));
    }
  }
}

}  // namespace gpbas
