#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "snesep/affinity.hpp"
#include "snesep/core.hpp"
#include "snesep/kernels.hpp"
#include "snesep/objective.hpp"

namespace snesep {

enum class OptimizerMethod { adam, gd_momentum };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::adam;
  double step_size = 0.05;
  double beta1 = 0.9;  // also the momentum coefficient for gd_momentum
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  double init_scale = 1e-2;
  double early_stop_grad_norm = 1e-7;

  void validate() const {
    if (!(step_size > 0.0)) throw ValidationError("optimizer: step_size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("optimizer: beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("optimizer: beta2 must be in [0,1)");
    if (!(epsilon > 0.0)) throw ValidationError("optimizer: epsilon must be positive");
    if (iterations < 1) throw ValidationError("optimizer: iterations must be >= 1");
    if (!(init_scale > 0.0)) throw ValidationError("optimizer: init_scale must be positive");
    if (!(early_stop_grad_norm >= 0.0)) {
      throw ValidationError("optimizer: early_stop_grad_norm must be nonnegative");
    }
  }
};

inline OptimizerConfig default_config() { return {}; }

inline const char* to_string(OptimizerMethod m) {
  return m == OptimizerMethod::adam ? "adam" : "gd_momentum";
}

inline OptimizerMethod parse_method(const std::string& s) {
  if (s == "adam") return OptimizerMethod::adam;
  if (s == "gd_momentum") return OptimizerMethod::gd_momentum;
  throw ValidationError("optimizer: unknown method '" + s + "'");
}

struct OptimizationTrace {
  std::vector<double> loss_history;
  std::vector<double> grad_norm_history;
  std::vector<double> best_loss_history;
  std::size_t iterations_run = 0;
  std::size_t best_iteration = 0;
  bool converged = false;
  bool degenerate = false;
};

/// Thrown when the loss or gradient stops being finite; carries the trace up
/// to the failing step.
struct DivergenceError : NumericalError {
  DivergenceError(const std::string& what, OptimizationTrace t)
      : NumericalError(what), trace(std::move(t)) {}
  OptimizationTrace trace;
};

/// i.i.d. N(0, scale^2) coordinates, reproducible from `seed`.
inline Embedding init_embedding(std::size_t k, std::size_t d, double scale, std::uint64_t seed) {
  if (k < 2) throw ValidationError("init_embedding: k must be >= 2");
  if (d < 1) throw ValidationError("init_embedding: d must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ValidationError("init_embedding: scale must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) y(i, c) = normal(rng);
  }
  return Embedding(std::move(y));
}

struct MinimizeResult {
  /// Lowest-loss iterate seen.
  Embedding embedding;
  OptimizationTrace trace;
};

inline MinimizeResult minimize(const AffinityMatrix& p, const Embedding& init,
                               const KernelSpec& kern, const OptimizerConfig& cfg) {
  cfg.validate();
  if (p.k() != init.k()) throw ValidationError("minimize: affinity size does not match embedding");

  Matrix y = init.coords();
  Matrix m = Matrix::Zero(y.rows(), y.cols());
  Matrix v = Matrix::Zero(y.rows(), y.cols());
  Matrix best = y;
  double best_loss = std::numeric_limits<double>::infinity();
  double b1_pow = 1.0;
  double b2_pow = 1.0;

  OptimizationTrace trace;
  ObjectiveWorkspace ws;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    // The Embedding constructor would reject non-finite coordinates; the
    // divergence check below reports them with the trace instead.
    if (!y.allFinite()) {
      throw DivergenceError("minimize: non-finite coordinates at iteration " + std::to_string(it),
                            trace);
    }
    const ObjectiveValue obj = evaluate_objective(p, Embedding(y), kern, ws);
    const double loss_val = obj.loss.total;
    const double gnorm = obj.gradient.norm();
    if (!std::isfinite(loss_val) || !std::isfinite(gnorm)) {
      throw DivergenceError("minimize: non-finite loss or gradient at iteration " +
                                std::to_string(it),
                            trace);
    }
    trace.degenerate = trace.degenerate || obj.degenerate;
    trace.loss_history.push_back(loss_val);
    trace.grad_norm_history.push_back(gnorm);
    ++trace.iterations_run;
    if (loss_val < best_loss) {
      best_loss = loss_val;
      best = y;
      trace.best_iteration = it;
    }
    trace.best_loss_history.push_back(best_loss);
    if (gnorm <= cfg.early_stop_grad_norm) {
      trace.converged = true;
      break;
    }

    const Matrix& g = obj.gradient;
    if (cfg.method == OptimizerMethod::adam) {
      b1_pow *= cfg.beta1;
      b2_pow *= cfg.beta2;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 / (1.0 - b1_pow);
      const double c2 = 1.0 / (1.0 - b2_pow);
      y.array() -= cfg.step_size * (m.array() * c1) / ((v.array() * c2).sqrt() + cfg.epsilon);
    } else {
      m = cfg.beta1 * m - cfg.step_size * g;
      y += m;
    }
  }
  return {Embedding(std::move(best)), std::move(trace)};
}

}  // namespace snesep
