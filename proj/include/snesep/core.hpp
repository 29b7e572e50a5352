#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace snesep {

/// Row-major so that each point is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using ClusterId = int;

inline constexpr const char* kVersion = "1.0.0";

// Error taxonomy. The CLI maps each class to its own exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Summed in coordinate order so that sq_dist(i, j) == sq_dist(j, i) bitwise.
inline double sq_dist(const Matrix& m, Eigen::Index i, Eigen::Index j) {
  const Eigen::Index d = m.cols();
  const double* x = m.data() + i * d;
  const double* y = m.data() + j * d;
  double s = 0.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double t = x[c] - y[c];
    s += t * t;
  }
  return s;
}

}  // namespace detail

/// Squared Euclidean distances between all rows of `points`.
inline Matrix pairwise_sq_dists(const Matrix& points) {
  if (!detail::all_finite(points)) {
    throw ValidationError("pairwise_sq_dists: non-finite coordinate in input");
  }
  const Eigen::Index k = points.rows();
  Matrix out = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double v = detail::sq_dist(points, i, j);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

/// k points in R^D with cluster labels; n clusters of exactly a points each.
class Dataset {
 public:
  Dataset() = default;

  /// Validating constructor. Labels must cover [0, n) with equal multiplicity
  /// a >= 2, coordinates must be finite and no two points may coincide.
  Dataset(Matrix points, std::vector<ClusterId> labels)
      : points_(std::move(points)), labels_(std::move(labels)) {
    const auto k = static_cast<std::size_t>(points_.rows());
    if (k == 0) throw ValidationError("dataset: no points");
    if (labels_.size() != k) {
      throw ValidationError("dataset: " + std::to_string(labels_.size()) + " labels for " +
                            std::to_string(k) + " points");
    }
    if (points_.cols() < 1) throw ValidationError("dataset: dimension must be >= 1");
    if (!points_.allFinite()) throw ValidationError("dataset: non-finite coordinate");

    const auto [lo, hi] = std::minmax_element(labels_.begin(), labels_.end());
    if (*lo < 0) throw ValidationError("dataset: negative cluster id");
    n_ = static_cast<std::size_t>(*hi) + 1;
    std::vector<std::size_t> counts(n_, 0);
    for (auto l : labels_) ++counts[static_cast<std::size_t>(l)];
    a_ = counts.front();
    for (std::size_t m = 0; m < n_; ++m) {
      if (counts[m] != a_) {
        throw ValidationError("dataset: cluster " + std::to_string(m) + " has " +
                              std::to_string(counts[m]) + " points, expected " +
                              std::to_string(a_));
      }
    }
    if (a_ < 2) throw ValidationError("dataset: clusters need at least 2 points");
    reject_duplicates();

    members_.assign(n_, {});
    for (std::size_t i = 0; i < k; ++i) {
      members_[static_cast<std::size_t>(labels_[i])].push_back(i);
    }
  }

  const Matrix& points() const { return points_; }
  const std::vector<ClusterId>& labels() const { return labels_; }
  std::size_t k() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t n() const { return n_; }
  std::size_t a() const { return a_; }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }

  /// Row indices belonging to cluster m, ascending.
  const std::vector<std::size_t>& members(std::size_t m) const { return members_.at(m); }

 private:
  void reject_duplicates() const {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(points_.rows()));
    std::iota(order.begin(), order.end(), 0);
    auto row_less = [this](Eigen::Index x, Eigen::Index y) {
      for (Eigen::Index c = 0; c < points_.cols(); ++c) {
        if (points_(x, c) != points_(y, c)) return points_(x, c) < points_(y, c);
      }
      return false;
    };
    std::sort(order.begin(), order.end(), row_less);
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (points_.row(order[i - 1]) == points_.row(order[i])) {
        throw ValidationError("dataset: points " + std::to_string(order[i - 1]) + " and " +
                              std::to_string(order[i]) + " are identical");
      }
    }
  }

  Matrix points_;
  std::vector<ClusterId> labels_;
  std::size_t n_ = 0;
  std::size_t a_ = 0;
  std::vector<std::vector<std::size_t>> members_;
};

struct SeparationCertificate {
  double max_diameter = 0.0;
  /// +inf when there is only one cluster.
  double min_separation = std::numeric_limits<double>::infinity();
  double threshold = 0.0;
  bool satisfied = false;
};

/// The blanket separation threshold sqrt(5 ln n); zero for a single cluster.
inline double separation_threshold(std::size_t n) {
  return n <= 1 ? 0.0 : std::sqrt(5.0 * std::log(static_cast<double>(n)));
}

inline SeparationCertificate validate_dataset(const Dataset& ds, double threshold) {
  SeparationCertificate cert;
  cert.threshold = threshold;
  const Matrix& x = ds.points();
  const auto& labels = ds.labels();
  double max_d2 = 0.0;
  double min_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double d2 = detail::sq_dist(x, i, j);
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        max_d2 = std::max(max_d2, d2);
      } else {
        min_d2 = std::min(min_d2, d2);
      }
    }
  }
  cert.max_diameter = std::sqrt(max_d2);
  cert.min_separation = std::sqrt(min_d2);
  cert.satisfied = cert.max_diameter <= 1.0 && cert.min_separation >= threshold;
  return cert;
}

/// k points in R^d, row i is the image of dataset point i.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(Matrix coords) : coords_(std::move(coords)) {
    if (coords_.cols() < 1) throw ValidationError("embedding: dimension must be >= 1");
    if (!coords_.allFinite()) throw ValidationError("embedding: non-finite coordinate");
  }

  const Matrix& coords() const { return coords_; }
  std::size_t k() const { return static_cast<std::size_t>(coords_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(coords_.cols()); }

  double distance(std::size_t i, std::size_t j) const {
    return std::sqrt(detail::sq_dist(coords_, static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(j)));
  }

 private:
  Matrix coords_;
};

inline void require_matching(const Embedding& emb, const Dataset& ds, const char* what) {
  if (emb.k() != ds.k()) {
    throw ValidationError(std::string(what) + ": embedding has " + std::to_string(emb.k()) +
                          " points, dataset has " + std::to_string(ds.k()));
  }
}

}  // namespace snesep
