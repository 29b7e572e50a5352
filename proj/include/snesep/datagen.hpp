#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "snesep/affinity.hpp"
#include "snesep/core.hpp"
#include "snesep/kernels.hpp"
#include "snesep/optimizer.hpp"
#include "snesep/parallel.hpp"
#include "snesep/quality.hpp"

namespace snesep {

enum class GeneratorMode { satisfy, target };
enum class ClusterShape { uniform_ball, gaussian_clipped };

struct GeneratorSpec {
  std::size_t n = 10;
  std::size_t a = 100;
  std::size_t dim = 100;
  double margin = 2.0;
  GeneratorMode mode = GeneratorMode::satisfy;
  /// Desired minimum inter-cluster distance in target mode.
  double target_c = 0.0;
  ClusterShape shape = ClusterShape::gaussian_clipped;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1) throw ValidationError("generate: n must be >= 1");
    if (a < 2) throw ValidationError("generate: a must be >= 2");
    if (dim < 1) throw ValidationError("generate: dim must be >= 1");
    if (mode == GeneratorMode::satisfy && !(margin >= 1.0)) {
      throw ValidationError("generate: margin must be >= 1 in satisfy mode");
    }
    if (mode == GeneratorMode::target && !(target_c >= 0.0)) {
      throw ValidationError("generate: target_c must be >= 0");
    }
  }
};

inline const char* to_string(ClusterShape s) {
  return s == ClusterShape::uniform_ball ? "uniform_ball" : "gaussian_clipped";
}

inline ClusterShape parse_shape(const std::string& s) {
  if (s == "uniform_ball") return ClusterShape::uniform_ball;
  if (s == "gaussian_clipped") return ClusterShape::gaussian_clipped;
  throw ValidationError("generate: unknown cluster shape '" + s + "'");
}

/// Points stay within this distance of their cluster center, so every
/// cluster diameter is at most 1.
inline constexpr double kClusterRadius = 0.5 - 1e-9;
inline constexpr std::size_t kMaxCenterTrials = 1000000;

namespace detail {

inline Vector random_direction(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  double norm = 0.0;
  do {
    for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = normal(rng);
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

/// Offsets of a points from their cluster center.
inline Matrix cluster_offsets(std::mt19937_64& rng, std::size_t a, std::size_t dim,
                              ClusterShape shape) {
  Matrix out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(dim));
  if (shape == ClusterShape::uniform_ball) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const Vector dir = random_direction(rng, dim);
      const double r = kClusterRadius * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
      out.row(i) = r * dir.transpose();
    }
  } else {
    // Radial scale 1/6, i.e. per-coordinate sigma 1/(6 sqrt(D)); the clip at
    // radius 1/2 then rarely triggers in any dimension.
    std::normal_distribution<double> normal(0.0, 1.0 / (6.0 * std::sqrt(double(dim))));
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      do {
        for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) = normal(rng);
      } while (out.row(i).norm() > kClusterRadius);
    }
  }
  return out;
}

/// n centers whose pairwise distances are all >= spacing (up to rounding).
/// Each new center sits at exactly `spacing` from a randomly chosen existing
/// center in a random direction; candidates closer to any other are rejected.
inline Matrix place_centers(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                            double spacing) {
  Matrix centers = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::size_t trials = 0;
  for (std::size_t c = 1; c < n; ++c) {
    for (;;) {
      if (++trials > kMaxCenterTrials) {
        throw ValidationError("generate: could not place " + std::to_string(n) +
                              " separated centers in dimension " + std::to_string(dim) +
                              " after " + std::to_string(kMaxCenterTrials) +
                              " trials; increase dim or reduce n");
      }
      std::uniform_int_distribution<std::size_t> pick(0, c - 1);
      const Vector cand = centers.row(static_cast<Eigen::Index>(pick(rng))).transpose() +
                          spacing * random_direction(rng, dim);
      bool ok = true;
      for (std::size_t e = 0; e < c && ok; ++e) {
        ok = (centers.row(static_cast<Eigen::Index>(e)).transpose() - cand).norm() >=
             spacing * (1.0 - 1e-12);
      }
      if (ok) {
        centers.row(static_cast<Eigen::Index>(c)) = cand.transpose();
        break;
      }
    }
  }
  return centers;
}

inline Matrix assemble(const Matrix& centers, const std::vector<Matrix>& offsets, double scale) {
  const Eigen::Index a = offsets.front().rows();
  Matrix pts(centers.rows() * a, centers.cols());
  for (Eigen::Index m = 0; m < centers.rows(); ++m) {
    for (Eigen::Index j = 0; j < a; ++j) {
      pts.row(m * a + j) = scale * centers.row(m) + offsets[static_cast<std::size_t>(m)].row(j);
    }
  }
  return pts;
}

inline double min_cross_distance(const Matrix& pts, std::size_t a) {
  double best = std::numeric_limits<double>::infinity();
  const auto ai = static_cast<Eigen::Index>(a);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = (i / ai + 1) * ai; j < pts.rows(); ++j) {
      best = std::min(best, sq_dist(pts, i, j));
    }
  }
  return std::sqrt(best);
}

}  // namespace detail

/// Synthetic clustered data. Points of cluster m occupy rows m*a .. m*a+a-1.
/// Satisfy mode guarantees diameters <= 1 and minimum separation
/// >= margin * sqrt(5 ln n); target mode rescales the center layout so that
/// the measured minimum separation matches target_c.
inline Dataset generate(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Matrix> offsets;
  offsets.reserve(spec.n);
  for (std::size_t m = 0; m < spec.n; ++m) {
    offsets.push_back(detail::cluster_offsets(rng, spec.a, spec.dim, spec.shape));
  }

  std::vector<ClusterId> labels(spec.n * spec.a);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<ClusterId>(i / spec.a);

  if (spec.mode == GeneratorMode::satisfy) {
    const double thr = std::sqrt(5.0 * std::log(std::max<double>(double(spec.n), 2.0)));
    const double spacing = spec.margin * thr + 1.0 + 1e-9;
    const Matrix centers = detail::place_centers(rng, spec.n, spec.dim, spacing);
    Dataset ds(detail::assemble(centers, offsets, 1.0), std::move(labels));
    if (!validate_dataset(ds, separation_threshold(ds.n())).satisfied) {
      throw NumericalError("generate: satisfy-mode output failed its own certificate");
    }
    return ds;
  }

  const Matrix centers = detail::place_centers(rng, spec.n, spec.dim, 1.0);
  if (spec.n == 1) return Dataset(detail::assemble(centers, offsets, 1.0), std::move(labels));
  // Bisection on the center scale; min separation grows with it, at least
  // once the clusters stop overlapping.
  double lo = 0.0;
  double hi = spec.target_c + 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double c = detail::min_cross_distance(detail::assemble(centers, offsets, mid), spec.a);
    (c < spec.target_c ? lo : hi) = mid;
  }
  return Dataset(detail::assemble(centers, offsets, hi), std::move(labels));
}

struct SweepRow {
  double target_c = 0.0;
  double measured_c = 0.0;
  std::uint64_t seed = 0;
  double q = 0.0;
  std::size_t mismatches = 0;
  bool contiguous = false;
  double final_loss = 0.0;
};

struct SweepSummary {
  double target_c = 0.0;
  double mean_measured_c = 0.0;
  double mean_q = 0.0;
  double mean_mismatches = 0.0;
  double contiguous_fraction = 0.0;
  std::size_t runs = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summary;  // one per target, input order
};

struct SweepOptions {
  std::size_t d = 1;
  double sigma = kTheoremSigma;
  std::size_t threads = 1;
};

/// Runs generate -> embed -> score for every (target, seed) cell.
inline SweepReport separation_sweep(const GeneratorSpec& base, const std::vector<double>& targets,
                                    const std::vector<std::uint64_t>& seeds,
                                    const OptimizerConfig& opt, const KernelSpec& kern,
                                    const SweepOptions& options = {}) {
  if (targets.empty()) throw ValidationError("separation_sweep: no targets");
  if (seeds.empty()) throw ValidationError("separation_sweep: no seeds");
  opt.validate();

  SweepReport rep;
  rep.rows.resize(targets.size() * seeds.size());
  parallel_for(rep.rows.size(), options.threads, [&](std::size_t cell) {
    const double target = targets[cell / seeds.size()];
    const std::uint64_t seed = seeds[cell % seeds.size()];
    GeneratorSpec spec = base;
    spec.mode = GeneratorMode::target;
    spec.target_c = target;
    spec.seed = seed;
    const Dataset ds = generate(spec);
    const AffinityMatrix p = input_affinities(ds, uniform_scales(ds.k(), options.sigma));
    OptimizerConfig cfg = opt;
    cfg.seed = seed;
    const Embedding init = init_embedding(ds.k(), options.d, cfg.init_scale, seed);
    const MinimizeResult res = minimize(p, init, kern, cfg);
    const auto cont = contiguity_report(res.embedding, ds);

    SweepRow& row = rep.rows[cell];
    row.target_c = target;
    row.measured_c = validate_dataset(ds, 0.0).min_separation;
    row.seed = seed;
    row.q = quality_exact(res.embedding, ds);
    row.mismatches = cont.mismatches;
    row.contiguous = cont.contiguous.value_or(cont.mismatches == 0);
    row.final_loss = res.trace.best_loss_history.back();
  });

  for (std::size_t t = 0; t < targets.size(); ++t) {
    SweepSummary s;
    s.target_c = targets[t];
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      const SweepRow& row = rep.rows[t * seeds.size() + r];
      s.mean_measured_c += row.measured_c;
      s.mean_q += row.q;
      s.mean_mismatches += static_cast<double>(row.mismatches);
      s.contiguous_fraction += row.contiguous ? 1.0 : 0.0;
    }
    s.runs = seeds.size();
    const double cnt = static_cast<double>(seeds.size());
    s.mean_measured_c /= cnt;
    s.mean_q /= cnt;
    s.mean_mismatches /= cnt;
    s.contiguous_fraction /= cnt;
    rep.summary.push_back(s);
  }
  return rep;
}

}  // namespace snesep
