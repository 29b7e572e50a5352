#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "snesep/core.hpp"
#include "snesep/objective.hpp"

namespace snesep {

/// #{l : |psi_l - psi_center| <= radius}, the center included.
inline std::size_t ball_count_incl_center(const Embedding& emb, std::size_t center,
                                          double radius) {
  if (!(radius >= 0.0)) throw ValidationError("ball_count: radius must be nonnegative");
  return ball_count_excl_center(emb, center, radius) + 1;
}

enum class BallCount { inclusive, exclusive };

namespace detail {

/// Average over clusters and ordered same-cluster pairs (x, y) of the log ball
/// count around x with radius |psi_y - psi_x|.
inline double mean_log_ball_count(const Embedding& emb, const Dataset& ds, BallCount mode) {
  require_matching(emb, ds, "quality");
  const std::size_t extra = mode == BallCount::inclusive ? 1 : 0;
  double total = 0.0;
  for (std::size_t m = 0; m < ds.n(); ++m) {
    const auto& members = ds.members(m);
    double cluster_sum = 0.0;
    for (std::size_t x : members) {
      const auto sorted = sorted_distances_from(emb, x);
      for (std::size_t y : members) {
        if (y == x) continue;
        const std::size_t c = count_within(sorted, emb.distance(x, y)) + extra;
        cluster_sum += std::log(static_cast<double>(c));
      }
    }
    const double a = static_cast<double>(members.size());
    total += cluster_sum / (a * (a - 1.0));
  }
  return total / static_cast<double>(ds.n());
}

}  // namespace detail

/// Q(psi): expected log of the number of embedded points in the closed ball
/// centered at a random cluster member and touching another member.
inline double quality_exact(const Embedding& emb, const Dataset& ds) {
  return detail::mean_log_ball_count(emb, ds, BallCount::inclusive);
}

/// Same average with the center left out of every count.
inline double quality_exact_excl(const Embedding& emb, const Dataset& ds) {
  return detail::mean_log_ball_count(emb, ds, BallCount::exclusive);
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo estimate of Q by direct simulation of the sampling process.
inline McEstimate quality_mc(const Embedding& emb, const Dataset& ds, std::size_t samples,
                             std::uint64_t seed) {
  require_matching(emb, ds, "quality_mc");
  if (samples < 1) throw ValidationError("quality_mc: samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, ds.n() - 1);
  std::uniform_int_distribution<std::size_t> pick_first(0, ds.a() - 1);
  std::uniform_int_distribution<std::size_t> pick_second(0, ds.a() - 2);

  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& members = ds.members(pick_cluster(rng));
    const std::size_t xi = pick_first(rng);
    std::size_t yi = pick_second(rng);
    if (yi >= xi) ++yi;
    const std::size_t x = members[xi];
    const std::size_t y = members[yi];
    const double val =
        std::log(static_cast<double>(ball_count_incl_center(emb, x, emb.distance(x, y))));
    const double delta = val - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (val - mean);
  }
  McEstimate out;
  out.estimate = mean;
  out.stderr_ = samples > 1 ? std::sqrt(m2 / static_cast<double>(samples - 1) /
                                        static_cast<double>(samples))
                            : 0.0;
  return out;
}

struct LemmaBounds {
  double lower = 0.0;    // ln a - 1
  double perfect = 0.0;  // (1/(a-1)) sum_{i=1}^{a-1} ln(i+1)
};

inline LemmaBounds lemma_bounds(std::size_t a) {
  if (a < 2) throw ValidationError("lemma_bounds: a must be >= 2");
  double s = 0.0;
  for (std::size_t i = 2; i <= a; ++i) s += std::log(static_cast<double>(i));
  return {std::log(static_cast<double>(a)) - 1.0, s / static_cast<double>(a - 1)};
}

inline double theorem_bound(std::size_t a) { return 200.0 * std::log(2.0 * static_cast<double>(a)); }
inline double improved_theorem_bound(std::size_t a) {
  return 15.0 * std::log(2.0 * static_cast<double>(a));
}

namespace detail {

inline bool is_prime(std::size_t v) {
  if (v < 2) return false;
  for (std::size_t d = 2; d * d <= v; ++d) {
    if (v % d == 0) return false;
  }
  return true;
}

}  // namespace detail

/// First `a` elements of the Erdos-Turan Sidon set 2pj + (j^2 mod p), p the
/// smallest odd prime >= a. All pairwise sums are distinct, so from every
/// element the distances to the others are distinct.
inline std::vector<std::int64_t> sidon_offsets(std::size_t a) {
  std::size_t p = std::max<std::size_t>(a, 3);
  while (!detail::is_prime(p)) ++p;
  std::vector<std::int64_t> out(a);
  for (std::size_t j = 0; j < a; ++j) {
    out[j] = static_cast<std::int64_t>(2 * p * j + (j * j) % p);
  }
  return out;
}

/// A one-dimensional embedding attaining Q = lemma_bounds(a).perfect: each
/// cluster is a scaled Sidon set (no tied radii) and clusters are spaced ten
/// spans apart (no foreign points in any ball).
inline Embedding perfect_embedding(const Dataset& ds) {
  const auto offsets = sidon_offsets(ds.a());
  const double delta = 1.0 / 1024.0;  // power of two keeps coordinates exact
  const double span = static_cast<double>(offsets.back());
  const double gap = 10.0 * span;
  Matrix y(static_cast<Eigen::Index>(ds.k()), 1);
  for (std::size_t m = 0; m < ds.n(); ++m) {
    const auto& members = ds.members(m);
    for (std::size_t j = 0; j < members.size(); ++j) {
      y(static_cast<Eigen::Index>(members[j]), 0) =
          (static_cast<double>(m) * gap + static_cast<double>(offsets[j])) * delta;
    }
  }
  return Embedding(std::move(y));
}

struct ContiguityReport {
  std::size_t mismatches = 0;
  /// Only defined for one-dimensional embeddings.
  std::optional<bool> contiguous;
};

inline ContiguityReport contiguity_report(const Embedding& emb, const Dataset& ds) {
  require_matching(emb, ds, "contiguity_report");
  const auto n = static_cast<Eigen::Index>(ds.n());
  const Matrix& y = emb.coords();
  Matrix centroids = Matrix::Zero(n, y.cols());
  for (Eigen::Index m = 0; m < n; ++m) {
    for (std::size_t i : ds.members(static_cast<std::size_t>(m))) {
      centroids.row(m) += y.row(static_cast<Eigen::Index>(i));
    }
    centroids.row(m) /= static_cast<double>(ds.a());
  }

  ContiguityReport rep;
  // Ties go to the point's own cluster.
  for (std::size_t i = 0; i < ds.k(); ++i) {
    const auto row = y.row(static_cast<Eigen::Index>(i));
    const auto own = static_cast<Eigen::Index>(ds.labels()[i]);
    const double own_d2 = (row - centroids.row(own)).squaredNorm();
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m != own && (row - centroids.row(m)).squaredNorm() < own_d2) {
        ++rep.mismatches;
        break;
      }
    }
  }

  if (emb.d() == 1) {
    std::vector<std::pair<double, double>> spans;
    for (std::size_t m = 0; m < ds.n(); ++m) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i : ds.members(m)) {
        lo = std::min(lo, y(static_cast<Eigen::Index>(i), 0));
        hi = std::max(hi, y(static_cast<Eigen::Index>(i), 0));
      }
      spans.emplace_back(lo, hi);
    }
    std::sort(spans.begin(), spans.end());
    bool ok = true;
    for (std::size_t m = 1; m < spans.size(); ++m) {
      if (!(spans[m - 1].second < spans[m].first)) ok = false;
    }
    rep.contiguous = ok;
  }
  return rep;
}

struct QualityReport {
  double q_exact = 0.0;
  double q_exact_excl = 0.0;
  double q_mc = 0.0;
  double q_mc_stderr = 0.0;
  std::size_t mc_samples = 0;
  double lemma_lower = 0.0;
  double lemma_perfect = 0.0;
  double theorem_upper = 0.0;
  std::size_t mismatches = 0;
  std::optional<bool> contiguous;
};

inline QualityReport make_quality_report(const Embedding& emb, const Dataset& ds,
                                         std::size_t mc_samples, std::uint64_t seed) {
  QualityReport r;
  r.q_exact = quality_exact(emb, ds);
  r.q_exact_excl = quality_exact_excl(emb, ds);
  if (mc_samples > 0) {
    const auto mc = quality_mc(emb, ds, mc_samples, seed);
    r.q_mc = mc.estimate;
    r.q_mc_stderr = mc.stderr_;
  }
  r.mc_samples = mc_samples;
  const auto lb = lemma_bounds(ds.a());
  r.lemma_lower = lb.lower;
  r.lemma_perfect = lb.perfect;
  r.theorem_upper = theorem_bound(ds.a());
  const auto cont = contiguity_report(emb, ds);
  r.mismatches = cont.mismatches;
  r.contiguous = cont.contiguous;
  return r;
}

}  // namespace snesep
