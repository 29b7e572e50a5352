#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "snesep/core.hpp"

namespace snesep {

enum class AffinityKind { input, output };

/// Row-stochastic k x k matrix with zero diagonal.
struct AffinityMatrix {
  Matrix values;
  AffinityKind kind = AffinityKind::input;

  std::size_t k() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// Per-point gaussian bandwidths.
class Scales {
 public:
  explicit Scales(std::vector<double> sigma) : sigma_(std::move(sigma)) {
    if (sigma_.empty()) throw ValidationError("scales: empty");
    for (double s : sigma_) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("scales: sigma must be positive");
    }
  }
  const std::vector<double>& sigma() const { return sigma_; }
  std::size_t size() const { return sigma_.size(); }
  double operator[](std::size_t i) const { return sigma_[i]; }

 private:
  std::vector<double> sigma_;
};

/// The theorem's bandwidth, 2^{-1/2}, so that 2 sigma^2 = 1.
inline const double kTheoremSigma = 1.0 / std::sqrt(2.0);

inline Scales uniform_scales(std::size_t k, double sigma) {
  if (k == 0) throw ValidationError("uniform_scales: k must be >= 1");
  if (!(sigma > 0.0)) throw ValidationError("uniform_scales: sigma must be positive");
  return Scales(std::vector<double>(k, sigma));
}

namespace detail {

/// Normalizes row i of `logits` into probabilities after subtracting the
/// row maximum. The diagonal entry of `logits` must be -inf. Returns the log
/// of the row normalizer relative to the unshifted logits.
inline double softmax_row(const Matrix& logits, Matrix& out, Eigen::Index i) {
  const auto row = logits.row(i).array();
  const double mx = row.maxCoeff();
  auto dst = out.row(i).array();
  dst = (row - mx).exp();
  dst(i) = 0.0;
  const double sum = dst.sum();
  dst /= sum;
  return mx + std::log(sum);
}

}  // namespace detail

inline AffinityMatrix input_affinities(const Dataset& ds, const Scales& scales) {
  const auto k = ds.k();
  if (k < 2) throw ValidationError("input_affinities: need at least 2 points");
  if (scales.size() != k) {
    throw ValidationError("input_affinities: " + std::to_string(scales.size()) +
                          " scales for " + std::to_string(k) + " points");
  }
  const Matrix d2 = pairwise_sq_dists(ds.points());
  Matrix logits(d2.rows(), d2.cols());
  for (Eigen::Index i = 0; i < d2.rows(); ++i) {
    const double s = scales[static_cast<std::size_t>(i)];
    logits.row(i) = -d2.row(i) / (2.0 * s * s);
    logits(i, i) = -std::numeric_limits<double>::infinity();
  }
  AffinityMatrix p{Matrix(d2.rows(), d2.cols()), AffinityKind::input};
  for (Eigen::Index i = 0; i < d2.rows(); ++i) detail::softmax_row(logits, p.values, i);
  return p;
}

/// One inequality with its observed worst case.
struct BoundCheck {
  std::string name;
  double observed = 0.0;
  double bound = 0.0;
  bool upper = true;  // observed <= bound when true, observed >= bound otherwise
  bool passed = false;

  double slack() const { return upper ? bound - observed : observed - bound; }
};

struct BoundReport {
  std::vector<BoundCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }
};

/// Checks the three entrywise bounds on p that hold for well-separated data at
/// sigma = 2^{-1/2}: same-cluster p in [1/(6a), 2e/a], cross-cluster
/// p <= 2 e^{1-c^2} / a.
inline BoundReport affinity_bounds_check(const AffinityMatrix& p, const Dataset& ds,
                                         const SeparationCertificate& cert) {
  if (!cert.satisfied) {
    throw PreconditionError("affinity_bounds_check: separation hypotheses not satisfied");
  }
  const double needed = separation_threshold(ds.n());
  if (cert.threshold < needed * (1.0 - 1e-12)) {
    throw PreconditionError("affinity_bounds_check: certificate threshold below sqrt(5 ln n)");
  }
  if (p.k() != ds.k()) throw ValidationError("affinity_bounds_check: size mismatch");

  const double a = static_cast<double>(ds.a());
  const double c = cert.min_separation;
  const auto& labels = ds.labels();

  double same_max = 0.0;
  double same_min = std::numeric_limits<double>::infinity();
  double cross_max = 0.0;
  for (std::size_t i = 0; i < p.k(); ++i) {
    for (std::size_t j = 0; j < p.k(); ++j) {
      if (i == j) continue;
      const double v = p(i, j);
      if (labels[i] == labels[j]) {
        same_max = std::max(same_max, v);
        same_min = std::min(same_min, v);
      } else {
        cross_max = std::max(cross_max, v);
      }
    }
  }

  const double e = std::exp(1.0);
  // With one cluster c = +inf and the cross bound degenerates to 0 >= 0.
  const double cross_bound = std::isinf(c) ? 0.0 : 2.0 * std::exp(1.0 - c * c) / a;

  BoundReport rep;
  rep.checks.push_back({"same_cluster_upper", same_max, 2.0 * e / a, true, false});
  rep.checks.push_back({"same_cluster_lower", same_min, 1.0 / (6.0 * a), false, false});
  rep.checks.push_back({"cross_cluster_upper", cross_max, cross_bound, true, false});
  for (auto& chk : rep.checks) chk.passed = chk.slack() >= 0.0;
  return rep;
}

}  // namespace snesep
