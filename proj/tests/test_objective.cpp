#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "snesep/objective.hpp"
#include "snesep/quality.hpp"
#include "test_util.hpp"

using namespace snesep;
using snesep::fixtures::line;
using snesep::fixtures::rows;

namespace {

AffinityMatrix random_p(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = i == j ? 0.0 : u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return {p, AffinityKind::input};
}

AffinityMatrix uniform_p(std::size_t k) {
  Matrix p = Matrix::Constant(Eigen::Index(k), Eigen::Index(k), 1.0 / double(k - 1));
  p.diagonal().setZero();
  return {p, AffinityKind::input};
}

}  // namespace

TEST(OutputAffinities, TwoPoints) {
  for (const auto& k : fixtures::all_kernels()) {
    const auto q = output_affinities(Embedding(line({0.3, -7})), k);
    EXPECT_EQ(q(0, 1), 1.0);
    EXPECT_EQ(q(1, 0), 1.0);
    EXPECT_EQ(q.kind, AffinityKind::output);
  }
}

TEST(OutputAffinities, EquilateralIsUniform) {
  const Embedding e(rows({{0, 0}, {2, 0}, {1, std::sqrt(3.0)}}));
  for (const auto& k : fixtures::all_kernels()) {
    const auto q = output_affinities(e, k);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        if (i != j) { EXPECT_NEAR(q(i, j), 0.5, 1e-12); }
      }
    }
  }
}

TEST(OutputAffinities, GaussianOnThreePoints) {
  const auto q = output_affinities(Embedding(line({0, 1, 2})), KernelSpec::gaussian());
  // e^-1 / (e^-1 + e^-4) at 30 digits.
  EXPECT_NEAR(q(0, 1), 0.952574126822433219121, 1e-15);
}

TEST(OutputAffinities, RowStochasticAndMatchesDefinition) {
  std::mt19937_64 rng(21);
  for (const auto& k : fixtures::all_kernels()) {
    for (int t = 0; t < 10; ++t) {
      const Matrix y = fixtures::gaussian_matrix(rng, 7, 1 + t % 3, 2.0);
      const auto q = output_affinities(Embedding(y), k);
      for (Eigen::Index i = 0; i < 7; ++i) {
        double z = 0.0;
        for (Eigen::Index l = 0; l < 7; ++l) {
          if (l != i) z += evaluate(k, fixtures::brute_dist(y, i, l));
        }
        EXPECT_EQ(q.values(i, i), 0.0);
        EXPECT_NEAR(q.values.row(i).sum(), 1.0, 1e-12);
        for (Eigen::Index j = 0; j < 7; ++j) {
          if (j == i) continue;
          EXPECT_NEAR(q.values(i, j), evaluate(k, fixtures::brute_dist(y, i, j)) / z, 1e-12);
        }
      }
    }
  }
}

TEST(OutputAffinities, NeedsTwoPoints) {
  EXPECT_THROW(output_affinities(Embedding(line({1.0})), KernelSpec::gaussian()),
               ValidationError);
}

TEST(Loss, TwoPointsIsZero) {
  const AffinityMatrix p{rows({{0, 1}, {1, 0}}), AffinityKind::input};
  const auto q = output_affinities(Embedding(line({0, 5})), KernelSpec::gaussian());
  EXPECT_EQ(loss(p, q).total, 0.0);
}

TEST(Loss, SymmetricTriangle) {
  const AffinityMatrix p = uniform_p(3);
  const auto l = loss(p, p);
  // 6 * (1/2) * ln 2.
  EXPECT_NEAR(l.total, 2.07944154167983592825, 1e-14);
  ASSERT_EQ(l.per_point.size(), 3u);
  for (double v : l.per_point) EXPECT_NEAR(v, std::log(2.0), 1e-15);
}

TEST(Loss, UnderflowedQIsAnError) {
  const AffinityMatrix p = uniform_p(3);
  AffinityMatrix q{rows({{0, 1, 0}, {0.5, 0, 0.5}, {0.5, 0.5, 0}}), AffinityKind::output};
  EXPECT_THROW(loss(p, q), NumericalError);
}

TEST(Loss, FusedEvaluationMatchesDefinition) {
  std::mt19937_64 rng(22);
  for (const auto& k : fixtures::all_kernels()) {
    for (int t = 0; t < 10; ++t) {
      const std::size_t n = 3 + t % 6;
      const auto p = random_p(rng, n);
      const Matrix y = fixtures::gaussian_matrix(rng, n, 1 + t % 3);
      ObjectiveWorkspace ws;
      const auto v = evaluate_objective(p, Embedding(y), k, ws);
      const double ref = fixtures::brute_loss(p.values, y, k);
      EXPECT_NEAR(v.loss.total, ref, 1e-10 * std::max(1.0, ref));
      EXPECT_NEAR(v.loss.total, loss(p, output_affinities(Embedding(y), k)).total, 1e-10);
      double sum = 0.0;
      for (double s : v.loss.per_point) sum += s;
      EXPECT_NEAR(sum, v.loss.total, 1e-9);
      EXPECT_GE(v.loss.total, -1e-12);
    }
  }
}

TEST(Gradient, TwoPointsIsZero) {
  const AffinityMatrix p{rows({{0, 1}, {1, 0}}), AffinityKind::input};
  for (const auto& k : fixtures::all_kernels()) {
    const Matrix g = loss_gradient(p, Embedding(rows({{0, 1}, {2, -3}})), k);
    EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> kd(2, 10);
  std::uniform_int_distribution<int> dd(1, 3);
  for (const auto& kern : fixtures::all_kernels()) {
    for (int t = 0; t < 20; ++t) {
      const auto k = std::size_t(kd(rng));
      const auto d = std::size_t(dd(rng));
      const auto p = random_p(rng, k);
      const Matrix y = fixtures::gaussian_matrix(rng, k, d);
      const Matrix an = loss_gradient(p, Embedding(y), kern);
      const Matrix fd = fixtures::fd_gradient(
          [&](const Matrix& yy) { return fixtures::brute_loss(p.values, yy, kern); }, y, 1e-4);
      EXPECT_LE(fixtures::rel_error(an, fd), 1e-5) << kern.name() << " k=" << k << " d=" << d;
    }
  }
}

TEST(Gradient, SymmetricConfigurationGivesEqualNorms) {
  // Square with uniform p: every vertex is equivalent.
  const Embedding sq(rows({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  for (const auto& k : fixtures::all_kernels()) {
    const Matrix g = loss_gradient(uniform_p(4), sq, k);
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(g.row(i).norm(), g.row(0).norm(), 1e-12);
  }
}

TEST(Gradient, TranslationInvariance) {
  std::mt19937_64 rng(24);
  for (const auto& k : fixtures::all_kernels()) {
    for (int t = 0; t < 10; ++t) {
      const auto p = random_p(rng, 8);
      const Matrix y = fixtures::gaussian_matrix(rng, 8, 2);
      Matrix moved = y;
      const Matrix shift = fixtures::gaussian_matrix(rng, 1, 2, 5.0);
      for (Eigen::Index i = 0; i < 8; ++i) moved.row(i) += shift;
      ObjectiveWorkspace ws;
      const auto a = evaluate_objective(p, Embedding(y), k, ws);
      const auto b = evaluate_objective(p, Embedding(moved), k, ws);
      EXPECT_NEAR(a.loss.total, b.loss.total, 1e-10);
      EXPECT_LE(a.gradient.colwise().sum().cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Gradient, CoincidentPointsUnderExponentialKernelAreFlagged) {
  const auto p = uniform_p(3);
  const Embedding e(line({0, 0, 1}));
  ObjectiveWorkspace ws;
  const auto v = evaluate_objective(p, e, KernelSpec::exponential(1.0), ws);
  EXPECT_TRUE(v.degenerate);
  EXPECT_TRUE(v.gradient.allFinite());
  EXPECT_FALSE(evaluate_objective(p, e, KernelSpec::gaussian(), ws).degenerate);
  EXPECT_FALSE(evaluate_objective(p, e, KernelSpec::cauchy(), ws).degenerate);
  EXPECT_FALSE(
      evaluate_objective(p, Embedding(line({0, 1, 3})), KernelSpec::exponential(1.0), ws)
          .degenerate);
}

TEST(BallCheck, ThreePointExamples) {
  const Embedding e(line({0, 1, 2}));
  EXPECT_EQ(ball_count_excl_center(e, 0, 1.0), 1u);
  EXPECT_EQ(ball_count_excl_center(e, 0, 2.0), 2u);
  const auto q = output_affinities(e, KernelSpec::gaussian());
  EXPECT_NEAR(1.0 / q(0, 1), 1.04978706836786394298, 1e-13);  // 1 + e^-3
  EXPECT_NEAR(1.0 / q(0, 2), 21.0855369231876677409, 1e-11);  // e^3 + 1
  const auto rep = inverse_q_ball_check(e, KernelSpec::gaussian());
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.pairs_checked, 6u);
  // The inclusive count is not bounded by 1/q: pair (0,1) has 1.0498 < 2.
  EXPECT_LT(rep.worst_slack_inclusive, 0.0);
}

TEST(BallCheck, TwoPointsIsTight) {
  const auto rep = inverse_q_ball_check(Embedding(line({0, 3})), KernelSpec::cauchy());
  EXPECT_TRUE(rep.passed);
  EXPECT_NEAR(rep.worst_slack, 0.0, 1e-15);
}

TEST(BallCheck, HoldsOnRandomEmbeddingsForAllKernels) {
  std::mt19937_64 rng(25);
  for (const auto& k : fixtures::all_kernels()) {
    for (int t = 0; t < 15; ++t) {
      const Matrix y = fixtures::gaussian_matrix(rng, 12, 1 + t % 3, 0.1 + t);
      const auto rep = inverse_q_ball_check(Embedding(y), k);
      EXPECT_TRUE(rep.passed) << k.name() << " slack " << rep.worst_slack;
      EXPECT_GE(rep.worst_slack, -kBallSlackTolerance);
    }
  }
}

TEST(BallCheck, CoincidentPointsCountWithMultiplicity) {
  const Embedding e(line({0, 0, 0, 1}));
  EXPECT_EQ(ball_count_excl_center(e, 0, 0.0), 2u);
  EXPECT_TRUE(inverse_q_ball_check(e, KernelSpec::gaussian()).passed);
}
