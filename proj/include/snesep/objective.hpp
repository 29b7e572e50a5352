#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "snesep/affinity.hpp"
#include "snesep/core.hpp"
#include "snesep/kernels.hpp"

namespace snesep {

struct LossValue {
  double total = 0.0;
  /// sum_{j != i} p_ij log(1/q_ij) for each i.
  std::vector<double> per_point;
};

/// Scratch buffers reused across objective evaluations.
struct ObjectiveWorkspace {
  Matrix sq;       // squared distances
  Matrix logits;   // log f(|psi_i - psi_j|), zero diagonal
  Matrix q;
  Matrix weights;  // symmetric gradient weights
  std::vector<double> log_norm;
};

struct ObjectiveValue {
  LossValue loss;
  Matrix gradient;
  /// Set when coincident points met a kernel with f'(0) != 0.
  bool degenerate = false;
};

namespace detail {

// Per-family row operations on squared distances: log f, and the gradient
// weight f'(r) / (r f(r)) applied to a row of coefficients.
struct GaussianOps {
  template <typename In, typename Out>
  void log_f(const In& r2, Out&& out) const {
    out = -r2;
  }
  template <typename In, typename Out>
  bool scale_by_weight(const In&, Out&& coef) const {
    coef *= -2.0;
    return false;
  }
};

struct CauchyOps {
  template <typename In, typename Out>
  void log_f(const In& r2, Out&& out) const {
    out = -(1.0 + r2).log();
  }
  template <typename In, typename Out>
  bool scale_by_weight(const In& r2, Out&& coef) const {
    coef *= -2.0 / (1.0 + r2);
    return false;
  }
};

struct ExponentialOps {
  double rate;
  template <typename In, typename Out>
  void log_f(const In& r2, Out&& out) const {
    out = -rate * r2.sqrt();
  }
  /// Coincident pairs get weight 0 and report degeneracy.
  template <typename In, typename Out>
  bool scale_by_weight(const In& r2, Out&& coef) const {
    bool degenerate = false;
    for (Eigen::Index j = 0; j < r2.size(); ++j) {
      if (r2(j) == 0.0) {
        degenerate = true;
        coef(j) = 0.0;
      } else {
        coef(j) *= -rate / std::sqrt(r2(j));
      }
    }
    return degenerate;
  }
};

/// Calls fn with the per-family operations so inner loops avoid dispatch.
template <typename Fn>
decltype(auto) with_kernel_ops(const KernelSpec& kern, Fn&& fn) {
  switch (kern.family) {
    case KernelFamily::cauchy:
      return fn(CauchyOps{});
    case KernelFamily::exponential:
      return fn(ExponentialOps{kern.rate});
    case KernelFamily::gaussian:
      break;
  }
  return fn(GaussianOps{});
}

/// Fills ws.sq, ws.logits, ws.q and ws.log_norm for the embedding `y`.
/// Rows are computed independently.
inline void compute_output_affinities(const Matrix& y, const KernelSpec& kern,
                                      ObjectiveWorkspace& ws) {
  const Eigen::Index k = y.rows();
  ws.sq.resize(k, k);
  ws.logits.resize(k, k);
  ws.q.resize(k, k);
  ws.log_norm.assign(static_cast<std::size_t>(k), 0.0);
  // Column-major copy so each coordinate is contiguous across points.
  const Eigen::MatrixXd cols = y;
  with_kernel_ops(kern, [&](const auto& ops) {
    for (Eigen::Index i = 0; i < k; ++i) {
      auto sr = ws.sq.row(i).array();
      sr = (cols.col(0).array() - y(i, 0)).square().transpose();
      for (Eigen::Index c = 1; c < y.cols(); ++c) {
        sr += (cols.col(c).array() - y(i, c)).square().transpose();
      }
      ops.log_f(ws.sq.row(i).array(), ws.logits.row(i).array());
      ws.logits(i, i) = -std::numeric_limits<double>::infinity();
      ws.log_norm[static_cast<std::size_t>(i)] = softmax_row(ws.logits, ws.q, i);
      ws.logits(i, i) = 0.0;
    }
  });
}

/// Rows of p sum to one, so row i contributes sum_j p_ij (log Z_i - logit_ij).
/// Relies on zero diagonals in both p and the logits.
inline LossValue loss_from_logits(const Matrix& p, const ObjectiveWorkspace& ws) {
  const Eigen::Index k = p.rows();
  LossValue out;
  out.per_point.assign(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double mass = p.row(i).sum();
    const double dot = p.row(i).dot(ws.logits.row(i));
    const double s = mass * ws.log_norm[static_cast<std::size_t>(i)] - dot;
    out.per_point[static_cast<std::size_t>(i)] = s;
    out.total += s;
  }
  return out;
}

inline void check_sizes(const AffinityMatrix& p, const Embedding& emb, const char* what) {
  if (emb.k() < 2) throw ValidationError(std::string(what) + ": need at least 2 points");
  if (p.k() != emb.k()) {
    throw ValidationError(std::string(what) + ": affinity size does not match embedding");
  }
}

}  // namespace detail

inline AffinityMatrix output_affinities(const Embedding& emb, const KernelSpec& kern) {
  if (emb.k() < 2) throw ValidationError("output_affinities: need at least 2 points");
  ObjectiveWorkspace ws;
  detail::compute_output_affinities(emb.coords(), kern, ws);
  return {std::move(ws.q), AffinityKind::output};
}

/// -sum_i sum_{j != i} p_ij log q_ij.
inline LossValue loss(const AffinityMatrix& p, const AffinityMatrix& q) {
  if (p.k() != q.k() || p.values.cols() != q.values.cols()) {
    throw ValidationError("loss: affinity matrices differ in size");
  }
  const auto k = p.k();
  LossValue out;
  out.per_point.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double pij = p(i, j);
      if (pij == 0.0) continue;
      const double qij = q(i, j);
      if (!(qij > 0.0)) {
        throw NumericalError("loss: q underflowed to 0 where p > 0 (row " + std::to_string(i) +
                             ", column " + std::to_string(j) + ")");
      }
      s -= pij * std::log(qij);
    }
    out.per_point[i] = s;
    out.total += s;
  }
  return out;
}

/// Loss and analytic gradient in one pass. With H_ij = (q_ij - p_ij) w_ij and
/// w_ij = f'(r_ij) / (r_ij f(r_ij)) symmetric, the gradient of row i is
///   sum_j (H_ij + H_ji) (psi_i - psi_j).
inline ObjectiveValue evaluate_objective(const AffinityMatrix& p, const Embedding& emb,
                                         const KernelSpec& kern, ObjectiveWorkspace& ws) {
  detail::check_sizes(p, emb, "evaluate_objective");
  const Matrix& y = emb.coords();
  const Eigen::Index k = y.rows();
  detail::compute_output_affinities(y, kern, ws);

  ObjectiveValue out;
  out.loss = detail::loss_from_logits(p.values, ws);

  ws.weights.resize(k, k);
  out.degenerate = detail::with_kernel_ops(kern, [&](const auto& ops) {
    bool degenerate = false;
    for (Eigen::Index i = 0; i < k; ++i) {
      ws.weights.row(i) = ws.q.row(i) - p.values.row(i);
      ws.weights(i, i) = 0.0;
      ws.sq(i, i) = 1.0;  // keeps the diagonal out of the degeneracy test
      if (ops.scale_by_weight(ws.sq.row(i).array(), ws.weights.row(i).array())) degenerate = true;
      ws.sq(i, i) = 0.0;
      ws.weights(i, i) = 0.0;
    }
    return degenerate;
  });
  const Vector sums = ws.weights.rowwise().sum() + ws.weights.colwise().sum().transpose();
  out.gradient = sums.asDiagonal() * y;
  out.gradient.noalias() -= ws.weights * y;
  out.gradient.noalias() -= ws.weights.transpose() * y;
  return out;
}

inline Matrix loss_gradient(const AffinityMatrix& p, const Embedding& emb,
                            const KernelSpec& kern) {
  ObjectiveWorkspace ws;
  return evaluate_objective(p, emb, kern, ws).gradient;
}

/// #{l != center : |psi_l - psi_center| <= radius}, with multiplicity.
inline std::size_t ball_count_excl_center(const Embedding& emb, std::size_t center,
                                          double radius) {
  std::size_t count = 0;
  for (std::size_t l = 0; l < emb.k(); ++l) {
    if (l != center && emb.distance(center, l) <= radius) ++count;
  }
  return count;
}

namespace detail {

/// Distances from `center` to every other point, sorted ascending.
inline std::vector<double> sorted_distances_from(const Embedding& emb, std::size_t center) {
  std::vector<double> d;
  d.reserve(emb.k());
  for (std::size_t l = 0; l < emb.k(); ++l) {
    if (l != center) d.push_back(emb.distance(center, l));
  }
  std::sort(d.begin(), d.end());
  return d;
}

inline std::size_t count_within(const std::vector<double>& sorted, double radius) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), radius) -
                                  sorted.begin());
}

}  // namespace detail

struct CheckReport {
  std::size_t pairs_checked = 0;
  /// min over pairs of 1/q_ij - (center-excluded count)
  double worst_slack = std::numeric_limits<double>::infinity();
  std::size_t worst_i = 0;
  std::size_t worst_j = 0;
  /// min over pairs of 1/q_ij - (center-inclusive count); may be negative.
  double worst_slack_inclusive = std::numeric_limits<double>::infinity();
  bool passed = false;
};

inline constexpr double kBallSlackTolerance = 1e-9;

/// Verifies 1/q_ij >= #{l != i : |psi_i - psi_l| <= |psi_i - psi_j|} for all
/// ordered pairs, which holds for any positive decreasing f.
inline CheckReport inverse_q_ball_check(const Embedding& emb, const KernelSpec& kern) {
  if (emb.k() < 2) throw ValidationError("inverse_q_ball_check: need at least 2 points");
  ObjectiveWorkspace ws;
  detail::compute_output_affinities(emb.coords(), kern, ws);
  CheckReport rep;
  for (std::size_t i = 0; i < emb.k(); ++i) {
    const auto sorted = detail::sorted_distances_from(emb, i);
    const double lz = ws.log_norm[i];
    for (std::size_t j = 0; j < emb.k(); ++j) {
      if (j == i) continue;
      const double inv_q = std::exp(lz - ws.logits(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(j)));
      const double count = static_cast<double>(detail::count_within(sorted, emb.distance(i, j)));
      const double slack = inv_q - count;
      ++rep.pairs_checked;
      if (slack < rep.worst_slack) {
        rep.worst_slack = slack;
        rep.worst_i = i;
        rep.worst_j = j;
      }
      rep.worst_slack_inclusive = std::min(rep.worst_slack_inclusive, slack - 1.0);
    }
  }
  rep.passed = rep.worst_slack >= -kBallSlackTolerance;
  return rep;
}

}  // namespace snesep
