#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "snesep/certify.hpp"
#include "snesep/datagen.hpp"
#include "snesep/optimizer.hpp"
#include "test_util.hpp"

using namespace snesep;
using snesep::fixtures::line;

namespace {

Dataset generated(std::size_t n, std::size_t a, std::size_t dim, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.n = n;
  spec.a = a;
  spec.dim = dim;
  spec.seed = seed;
  return generate(spec);
}

}  // namespace

TEST(Lattice, LineLayout) {
  const Embedding e = lattice_embedding(3, 2, 1);
  EXPECT_EQ(e.coords(), line({1, 1, 2, 2, 3, 3}));
  const Embedding e3 = lattice_embedding(2, 2, 3);
  EXPECT_EQ(e3.coords().col(0), line({1, 1, 2, 2}));
  EXPECT_EQ(e3.coords().rightCols(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lattice, GridLayout) {
  const Embedding e = lattice_embedding(4, 2, 2, LatticeMode::grid);
  const Matrix expect = fixtures::rows({{0, 0}, {0, 0}, {0, 1}, {0, 1}, {1, 0}, {1, 0}, {1, 1}, {1, 1}});
  EXPECT_EQ(e.coords(), expect);
  // n = 5 in d = 2 needs side 3: (0,0),(0,1),(0,2),(1,0),(1,1).
  const Embedding e5 = lattice_embedding(5, 2, 2, LatticeMode::grid);
  EXPECT_EQ(e5.coords().row(8), Eigen::RowVector2d(1, 1));
}

TEST(Lattice, SingleCluster) {
  const Embedding e = lattice_embedding(1, 4, 2);
  for (Eigen::Index i = 1; i < 4; ++i) EXPECT_EQ(e.coords().row(i), e.coords().row(0));
  EXPECT_THROW(lattice_embedding(0, 2, 1), ValidationError);
  EXPECT_THROW(lattice_embedding(2, 1, 1), ValidationError);
}

TEST(Lattice, FollowsLabels) {
  const Dataset ds(line({0, 10, 0.5, 10.5}), {0, 1, 0, 1});
  EXPECT_EQ(lattice_embedding(ds, 1).coords(), line({1, 2, 1, 2}));
}

TEST(RelaxedThreshold, Values) {
  EXPECT_NEAR(relaxed_threshold(10, 2), 2.14596602628934723964, 1e-14);
  EXPECT_NEAR(relaxed_threshold(10, 1), 2.62826088487846598932, 1e-14);
  EXPECT_NEAR(relaxed_threshold(10, 1000000), 1.51742712938514635086, 1e-5);
  EXPECT_EQ(relaxed_threshold(1, 3), 0.0);
  EXPECT_THROW(relaxed_threshold(0, 1), ValidationError);
  EXPECT_THROW(relaxed_threshold(5, 0), ValidationError);
  for (std::size_t n = 2; n <= 200; n += 7) {
    for (std::size_t d = 1; d <= 10; ++d) {
      EXPECT_LT(relaxed_threshold(n, d), separation_threshold(n));
      EXPECT_LE(relaxed_threshold(n, d + 1), relaxed_threshold(n, d));
    }
  }
}

TEST(LatticeLoss, GeneratedTenByHundred) {
  const Dataset ds = generated(10, 100, 100, 1);
  const auto c = certify_lattice_loss(ds, 1);
  EXPECT_NEAR(c.bound, 86413.9189133790631916, 1e-8);
  EXPECT_TRUE(c.passed);
  EXPECT_LE(c.loss, c.bound);
}

TEST(LatticeLoss, TwoByTwo) {
  const Dataset ds = generated(2, 2, 3, 4);
  const auto c = certify_lattice_loss(ds, 1);
  EXPECT_NEAR(c.bound, 90.4401304974585652753, 1e-11);
  EXPECT_TRUE(c.passed);
}

TEST(LatticeLoss, RefusesViolatingData) {
  const Dataset ds(line({0, 0.5, 1, 1.5}), {0, 0, 1, 1});
  EXPECT_THROW(certify_lattice_loss(ds, 1), PreconditionError);
  EXPECT_THROW(certify_chain(ds, Embedding(line({0, 1, 2, 3}))), PreconditionError);
  EXPECT_THROW(certify_theorem(ds, Embedding(line({0, 1, 2, 3}))), PreconditionError);
}

TEST(Chain, HoldsForRandomEmbeddings) {
  const Dataset ds = generated(5, 10, 3, 2);
  const auto p = theorem_affinities(ds);
  for (std::size_t r = 0; r < 30; ++r) {
    const Embedding e =
        random_embedding(ds.k(), 1 + r % 2, random_embedding_scale(r, 9), 100 + r);
    const auto c = certify_chain(ds, p, e);
    EXPECT_TRUE(c.passed) << "lhs " << c.lhs << " rhs " << c.rhs;
    EXPECT_GE(c.lhs_inclusive, c.lhs);
  }
}

TEST(Chain, PerfectEmbeddingHasSlack) {
  const Dataset ds = generated(10, 100, 100, 1);
  const auto c = certify_chain(ds, perfect_embedding(ds));
  EXPECT_TRUE(c.passed);
  // (1000/12) * Q, with Q the perfect value 3.674.
  EXPECT_NEAR(c.lhs_inclusive, 1000.0 / 12.0 * 3.67413510662185343580, 1e-8);
  EXPECT_GT(c.slack(), 0.0);
}

TEST(Chain, AdversarialCollapsedEmbedding) {
  // Every point at one location: Q is maximal, L = sum_i ln(k-1).
  const Dataset ds = generated(3, 4, 3, 7);
  const Embedding e(Matrix::Zero(Eigen::Index(ds.k()), 1));
  const auto c = certify_chain(ds, e);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.rhs, 12.0 * std::log(11.0), 1e-10);
}

TEST(Theorem, BoundsAndImprovedConstant) {
  const Dataset ds = generated(2, 2, 3, 5);
  const auto c = certify_theorem(ds, perfect_embedding(ds));
  EXPECT_NEAR(c.rhs, 277.258872223978123767, 1e-10);
  EXPECT_TRUE(c.passed);
  EXPECT_TRUE(c.improved_holds);
  const Dataset big = generated(10, 100, 100, 1);
  const auto cb = certify_theorem(big, perfect_embedding(big));
  EXPECT_NEAR(cb.rhs, 1059.66347330960733549, 1e-9);
  EXPECT_NEAR(cb.improved_rhs, 79.4747604982205501618, 1e-10);
}

TEST(GeneralKernel, RatiosAndBallChecks) {
  const Dataset ds = generated(10, 100, 100, 1);
  const auto g = certify_general_kernel(ds, KernelSpec::gaussian(), 1, 3, 1);
  EXPECT_TRUE(g.passed);
  EXPECT_LE(g.ratio, 6.0 * std::exp(1.0));
  EXPECT_NEAR(g.lattice_loss, certify_lattice_loss(ds, 1).loss, 1e-9 * g.lattice_loss);

  const auto c = certify_general_kernel(ds, KernelSpec::cauchy(), 1, 10, 2);
  EXPECT_TRUE(c.passed);
  EXPECT_TRUE(std::isfinite(c.ratio));
  EXPECT_EQ(c.ball_checks, 10u);
  EXPECT_EQ(c.ball_failures, 0u);

  const auto e = certify_general_kernel(ds, KernelSpec::exponential(1.0), 1, 3, 3);
  EXPECT_TRUE(e.passed);
  EXPECT_NEAR(e.admissibility.tail_sum_upper(), 0.581976706869326424385, 1e-14);
}

TEST(GeneralKernel, RejectsInadmissibleKernel) {
  const Dataset ds = generated(2, 3, 3, 1);
  KernelSpec bad = KernelSpec::cauchy();
  bad.minorant_alpha = 1.0;
  bad.minorant_beta = 0.01;
  EXPECT_THROW(certify_general_kernel(ds, bad, 1, 2, 1), ValidationError);
}

TEST(CertifyAll, PassesAcrossGeneratorGrid) {
  std::uint64_t seed = 40;
  for (std::size_t n : {2u, 5u}) {
    for (std::size_t a : {2u, 10u}) {
      for (std::size_t dim : {3u, 20u}) {
        for (std::size_t d : {1u, 2u}) {
          const Dataset ds = generated(n, a, dim, ++seed);
          OptimizerConfig cfg;
          cfg.iterations = 300;
          const auto opt = minimize(theorem_affinities(ds),
                                    init_embedding(ds.k(), d, cfg.init_scale, seed),
                                    KernelSpec::gaussian(), cfg);
          CertificateOptions co;
          co.d = d;
          co.random_embeddings = 20;
          co.seed = seed;
          const auto rep = certify_all(ds, opt.embedding, co);
          EXPECT_TRUE(rep.all_passed) << n << "x" << a << " D=" << dim << " d=" << d;
          EXPECT_EQ(rep.lattice_grid.has_value(), d >= 2);
          EXPECT_EQ(rep.chain_random.evaluated, 20u);
        }
      }
    }
  }
}
