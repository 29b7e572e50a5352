#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "snesep/affinity.hpp"
#include "snesep/core.hpp"
#include "snesep/kernels.hpp"
#include "snesep/objective.hpp"
#include "snesep/quality.hpp"

namespace snesep {

inline constexpr double kCertificateTolerance = 1e-9;

/// `line` puts cluster i at (i+1, 0, ..., 0); `grid` puts the clusters on the
/// first n points of {0, ..., s-1}^d in lexicographic order, s = ceil(n^{1/d}).
enum class LatticeMode { line, grid };

namespace detail {

inline std::size_t grid_side(std::size_t n, std::size_t d) {
  std::size_t s = 1;
  for (;;) {
    double cap = 1.0;
    for (std::size_t i = 0; i < d; ++i) cap *= static_cast<double>(s);
    if (cap >= static_cast<double>(n)) return s;
    ++s;
  }
}

inline Matrix lattice_sites(std::size_t n, std::size_t d, LatticeMode mode) {
  Matrix sites = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  if (mode == LatticeMode::line) {
    for (std::size_t i = 0; i < n; ++i) sites(static_cast<Eigen::Index>(i), 0) = double(i + 1);
    return sites;
  }
  const std::size_t side = grid_side(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    for (std::size_t c = d; c-- > 0;) {
      sites(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = double(rem % side);
      rem /= side;
    }
  }
  return sites;
}

inline void require_hypotheses(const Dataset& ds, const char* what) {
  const auto cert = validate_dataset(ds, separation_threshold(ds.n()));
  if (!cert.satisfied) {
    throw PreconditionError(std::string(what) +
                            ": dataset violates the separation hypotheses (max_diameter=" +
                            std::to_string(cert.max_diameter) +
                            ", min_separation=" + std::to_string(cert.min_separation) +
                            ", threshold=" + std::to_string(cert.threshold) + ")");
  }
}

}  // namespace detail

/// Canonical row order: cluster m occupies rows m*a .. m*a+a-1.
inline Embedding lattice_embedding(std::size_t n, std::size_t a, std::size_t d,
                                   LatticeMode mode = LatticeMode::line) {
  if (n < 1 || a < 2 || d < 1) throw ValidationError("lattice_embedding: need n>=1, a>=2, d>=1");
  const Matrix sites = detail::lattice_sites(n, d, mode);
  Matrix y(static_cast<Eigen::Index>(n * a), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n * a; ++i) {
    y.row(static_cast<Eigen::Index>(i)) = sites.row(static_cast<Eigen::Index>(i / a));
  }
  return Embedding(std::move(y));
}

/// Lattice embedding following the dataset's labels.
inline Embedding lattice_embedding(const Dataset& ds, std::size_t d,
                                   LatticeMode mode = LatticeMode::line) {
  if (d < 1) throw ValidationError("lattice_embedding: d must be >= 1");
  const Matrix sites = detail::lattice_sites(ds.n(), d, mode);
  Matrix y(static_cast<Eigen::Index>(ds.k()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < ds.k(); ++i) {
    y.row(static_cast<Eigen::Index>(i)) = sites.row(ds.labels()[i]);
  }
  return Embedding(std::move(y));
}

/// sqrt((1 + 2/d) ln n); zero for a single cluster.
inline double relaxed_threshold(std::size_t n, std::size_t d) {
  if (n < 1) throw ValidationError("relaxed_threshold: n must be >= 1");
  if (d < 1) throw ValidationError("relaxed_threshold: d must be >= 1");
  if (n == 1) return 0.0;
  return std::sqrt((1.0 + 2.0 / static_cast<double>(d)) * std::log(static_cast<double>(n)));
}

inline AffinityMatrix theorem_affinities(const Dataset& ds) {
  return input_affinities(ds, uniform_scales(ds.k(), kTheoremSigma));
}

struct LatticeLossCertificate {
  double loss = 0.0;
  double bound = 0.0;  // 6e n a ln(2a)
  bool passed = false;
  double slack() const { return bound - loss; }
};

/// SNE loss of the lattice witness against 6e n a ln(2a).
inline LatticeLossCertificate certify_lattice_loss(const Dataset& ds, std::size_t d,
                                                   LatticeMode mode = LatticeMode::line) {
  detail::require_hypotheses(ds, "certify_lattice_loss");
  const AffinityMatrix p = theorem_affinities(ds);
  const Embedding lat = lattice_embedding(ds, d, mode);
  ObjectiveWorkspace ws;
  LatticeLossCertificate c;
  c.loss = evaluate_objective(p, lat, KernelSpec::gaussian(), ws).loss.total;
  const double n = static_cast<double>(ds.n());
  const double a = static_cast<double>(ds.a());
  c.bound = 6.0 * std::exp(1.0) * n * a * std::log(2.0 * a);
  c.passed = c.slack() >= -kCertificateTolerance;
  return c;
}

struct ChainCertificate {
  double lhs = 0.0;            // (na/12) Q with center-excluded counts
  double lhs_inclusive = 0.0;  // (na/12) Q with the inclusive counts of Q
  double rhs = 0.0;            // L(psi)
  bool passed = false;
  bool inclusive_passed = false;  // informational
  double slack() const { return rhs - lhs; }
  double slack_inclusive() const { return rhs - lhs_inclusive; }
};

/// (na/12) Q(psi) <= L(psi) for an arbitrary embedding, with p at the
/// theorem bandwidth. The hard check uses center-excluded counts, which is
/// what 1/q_ij bounds from below; the inclusive variant is reported.
inline ChainCertificate certify_chain(const Dataset& ds, const AffinityMatrix& p,
                                      const Embedding& emb) {
  require_matching(emb, ds, "certify_chain");
  ObjectiveWorkspace ws;
  const double factor = static_cast<double>(ds.n() * ds.a()) / 12.0;
  ChainCertificate c;
  c.rhs = evaluate_objective(p, emb, KernelSpec::gaussian(), ws).loss.total;
  c.lhs = factor * quality_exact_excl(emb, ds);
  c.lhs_inclusive = factor * quality_exact(emb, ds);
  c.passed = c.slack() >= -kCertificateTolerance;
  c.inclusive_passed = c.slack_inclusive() >= -kCertificateTolerance;
  return c;
}

inline ChainCertificate certify_chain(const Dataset& ds, const Embedding& emb) {
  detail::require_hypotheses(ds, "certify_chain");
  return certify_chain(ds, theorem_affinities(ds), emb);
}

struct TheoremCertificate {
  double lhs = 0.0;           // Q(psi*)
  double rhs = 0.0;           // 200 ln(2a)
  double improved_rhs = 0.0;  // 15 ln(2a)
  bool passed = false;
  bool improved_holds = false;  // informational only
};

inline TheoremCertificate certify_theorem(const Dataset& ds, const Embedding& optimized) {
  detail::require_hypotheses(ds, "certify_theorem");
  TheoremCertificate c;
  c.lhs = quality_exact(optimized, ds);
  c.rhs = theorem_bound(ds.a());
  c.improved_rhs = improved_theorem_bound(ds.a());
  c.passed = c.lhs <= c.rhs + kCertificateTolerance;
  c.improved_holds = c.lhs <= c.improved_rhs + kCertificateTolerance;
  return c;
}

/// Random embedding with coordinates N(0, scale^2), for "any embedding" checks.
inline Embedding random_embedding(std::size_t k, std::size_t d, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) y(i, c) = normal(rng);
  }
  return Embedding(std::move(y));
}

/// Scale of the r-th random test embedding, log-uniform over [1e-2, 10].
inline double random_embedding_scale(std::size_t r, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (r + 1)));
  std::uniform_real_distribution<double> u(std::log(1e-2), std::log(10.0));
  return std::exp(u(rng));
}

struct GeneralKernelReport {
  AdmissibilityEvidence admissibility;
  double lattice_loss = 0.0;
  double ratio = 0.0;  // L / (n a ln(2a)), the measured constant
  std::size_t ball_checks = 0;
  std::size_t ball_failures = 0;
  double worst_ball_slack = std::numeric_limits<double>::infinity();
  bool passed = false;
};

/// Lattice loss under an arbitrary admissible kernel and the ball inequality
/// on random embeddings.
inline GeneralKernelReport certify_general_kernel(const Dataset& ds, const KernelSpec& kern,
                                                  std::size_t d,
                                                  std::size_t random_embeddings = 10,
                                                  std::uint64_t seed = 0) {
  detail::require_hypotheses(ds, "certify_general_kernel");
  const Embedding lat = lattice_embedding(ds, d);
  std::vector<Embedding> randoms;
  double r_max = static_cast<double>(ds.n());
  for (std::size_t r = 0; r < random_embeddings; ++r) {
    randoms.push_back(random_embedding(ds.k(), d, random_embedding_scale(r, seed), seed + r));
    const Matrix& y = randoms.back().coords();
    const double diam = 2.0 * y.rowwise().norm().maxCoeff();
    r_max = std::max(r_max, diam);
  }

  GeneralKernelReport rep;
  rep.admissibility = admissibility(kern, linear_grid(r_max, 2001));
  if (!rep.admissibility.passed()) {
    throw ValidationError("certify_general_kernel: kernel " + kern.name() +
                          " failed the admissibility checks");
  }
  const AffinityMatrix p = theorem_affinities(ds);
  ObjectiveWorkspace ws;
  rep.lattice_loss = evaluate_objective(p, lat, kern, ws).loss.total;
  const double a = static_cast<double>(ds.a());
  rep.ratio = rep.lattice_loss / (static_cast<double>(ds.n()) * a * std::log(2.0 * a));
  for (const auto& emb : randoms) {
    const CheckReport chk = inverse_q_ball_check(emb, kern);
    ++rep.ball_checks;
    if (!chk.passed) ++rep.ball_failures;
    rep.worst_ball_slack = std::min(rep.worst_ball_slack, chk.worst_slack);
  }
  rep.passed = std::isfinite(rep.ratio) && rep.ball_failures == 0;
  return rep;
}

struct ChainSummary {
  std::size_t evaluated = 0;
  std::size_t failures = 0;
  std::size_t inclusive_failures = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  double worst_slack_inclusive = std::numeric_limits<double>::infinity();

  void add(const ChainCertificate& c) {
    ++evaluated;
    if (!c.passed) ++failures;
    if (!c.inclusive_passed) ++inclusive_failures;
    worst_slack = std::min(worst_slack, c.slack());
    worst_slack_inclusive = std::min(worst_slack_inclusive, c.slack_inclusive());
  }
};

struct CertificateOptions {
  std::size_t d = 1;
  std::size_t random_embeddings = 100;
  std::uint64_t seed = 0;
  KernelSpec kernel = KernelSpec::gaussian();
};

/// Every certificate of the proof chain on one dataset.
struct CertificateReport {
  SeparationCertificate separation;
  BoundReport p_bounds;
  LatticeLossCertificate lattice;
  std::optional<LatticeLossCertificate> lattice_grid;  // d >= 2 only
  ChainCertificate chain_optimized;
  ChainCertificate chain_perfect;
  ChainSummary chain_random;
  TheoremCertificate theorem;
  GeneralKernelReport kernel;
  bool all_passed = false;
};

inline CertificateReport certify_all(const Dataset& ds, const Embedding& optimized,
                                     const CertificateOptions& opt) {
  CertificateReport rep;
  rep.separation = validate_dataset(ds, separation_threshold(ds.n()));
  detail::require_hypotheses(ds, "certify_all");
  require_matching(optimized, ds, "certify_all");

  const AffinityMatrix p = theorem_affinities(ds);
  rep.p_bounds = affinity_bounds_check(p, ds, rep.separation);
  rep.lattice = certify_lattice_loss(ds, opt.d, LatticeMode::line);
  if (opt.d >= 2) rep.lattice_grid = certify_lattice_loss(ds, opt.d, LatticeMode::grid);
  rep.chain_optimized = certify_chain(ds, p, optimized);
  rep.chain_perfect = certify_chain(ds, p, perfect_embedding(ds));
  for (std::size_t r = 0; r < opt.random_embeddings; ++r) {
    const Embedding emb = random_embedding(ds.k(), opt.d, random_embedding_scale(r, opt.seed),
                                           opt.seed + 7919 * (r + 1));
    rep.chain_random.add(certify_chain(ds, p, emb));
  }
  rep.theorem = certify_theorem(ds, optimized);
  rep.kernel = certify_general_kernel(ds, opt.kernel, opt.d, 10, opt.seed);

  rep.all_passed = rep.p_bounds.all_passed() && rep.lattice.passed &&
                   (!rep.lattice_grid || rep.lattice_grid->passed) && rep.chain_optimized.passed &&
                   rep.chain_perfect.passed && rep.chain_random.failures == 0 &&
                   rep.theorem.passed && rep.kernel.passed;
  return rep;
}

}  // namespace snesep
