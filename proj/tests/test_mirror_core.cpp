#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mirrorlang/mirror_core.hpp"
#include "oracles.hpp"

using namespace mirrorlang;

namespace {

double h_of(const std::vector<double>& x) { return entropic_h(SimplexPoint(x)); }

}  // namespace

TEST(SimplexPoint, RejectsBoundaryAndExterior) {
  EXPECT_THROW(SimplexPoint({0.0, 0.5}), DomainError);
  EXPECT_THROW(SimplexPoint({-0.1, 0.5}), DomainError);
  EXPECT_THROW(SimplexPoint({0.5, 0.5}), DomainError);
  EXPECT_THROW(SimplexPoint({0.7, 0.5}), DomainError);
  EXPECT_THROW(SimplexPoint(std::vector<double>{}), DomainError);
  EXPECT_NO_THROW(SimplexPoint({0.4, 0.5}));
}

TEST(DualPoint, RejectsNonFinite) {
  EXPECT_THROW(DualPoint({1.0, std::nan("")}), DomainError);
  EXPECT_THROW(DualPoint({INFINITY}), DomainError);
}

TEST(EntropicH, Examples) {
  EXPECT_NEAR(entropic_h(SimplexPoint{1.0 / 3, 1.0 / 3}), -std::log(3.0), 1e-14);
  EXPECT_NEAR(entropic_h(SimplexPoint{0.5}), -std::log(2.0), 1e-14);
  // 0.5 log 0.5 + 2 * 0.25 log 0.25
  EXPECT_NEAR(entropic_h(SimplexPoint{0.5, 0.25}), -1.0397207708399180, 1e-14);
}

TEST(EntropicH, MinimizedAtUniform) {
  std::mt19937_64 rng(11);
  for (std::size_t d : {1u, 3u, 7u}) {
    const double uniform = -std::log(static_cast<double>(d + 1));
    for (int k = 0; k < 50; ++k) {
      const double v = h_of(oracle::random_simplex(rng, d));
      EXPECT_LE(v, 0.0);
      EXPECT_GE(v, uniform - 1e-12);
    }
  }
}

TEST(EntropicGradH, Examples) {
  const auto y0 = entropic_grad_h(SimplexPoint{1.0 / 3, 1.0 / 3});
  EXPECT_NEAR(y0[0], 0.0, 1e-15);
  EXPECT_NEAR(y0[1], 0.0, 1e-15);
  const auto y = entropic_grad_h(SimplexPoint{0.5, 0.25});
  EXPECT_NEAR(y[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  EXPECT_NEAR(entropic_grad_h(SimplexPoint{0.9})[0], 2.1972245773362196, 1e-14);
}

TEST(EntropicGradH, MatchesFiniteDifferences) {
  for (auto x : {std::vector<double>{0.5, 0.25}, std::vector<double>{0.9}}) {
    const auto fd = oracle::fd_gradient(h_of, x, 1e-6);
    const auto g = entropic_grad_h(SimplexPoint(x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], fd[i], 1e-8);
  }
}

TEST(EntropicHStar, Examples) {
  EXPECT_NEAR(entropic_h_star(DualPoint{0.0, 0.0}), std::log(3.0), 1e-15);
  const long double ref = oracle::log1p_sum_exp_ld({1000.0, 0.0});
  EXPECT_NEAR(entropic_h_star(DualPoint{1000.0, 0.0}), static_cast<double>(ref), 1e-6);
  EXPECT_NEAR(entropic_h_star(DualPoint{1000.0, 0.0}), 1000.0, 1e-6);
  const double tiny = entropic_h_star(DualPoint{-1000.0, -1000.0});
  EXPECT_GT(tiny, 0.0 - 1e-300);
  EXPECT_NEAR(tiny, 0.0, 1e-300);
}

TEST(EntropicGradHStar, Examples) {
  const auto u = entropic_grad_h_star(DualPoint{0.0, 0.0});
  EXPECT_NEAR(u[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(u[1], 1.0 / 3, 1e-15);
  const auto x = entropic_grad_h_star(DualPoint{std::log(2.0), 0.0});
  EXPECT_NEAR(x[0], 0.5, 1e-15);
  EXPECT_NEAR(x[1], 0.25, 1e-15);
  EXPECT_NEAR(x.implicit(), 0.25, 1e-15);
}

TEST(EntropicGradHStar, SaturationKeepsPositivity) {
  const auto x = entropic_grad_h_star(DualPoint{50.0, 0.0});
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_GT(x[1], 0.0);
  EXPECT_GT(x.implicit(), 0.0);
  EXPECT_NEAR(x[1] / x.implicit(), 1.0, 1e-12);
}

TEST(EntropicLogDetHess, Examples) {
  EXPECT_NEAR(entropic_log_det_hess_h(SimplexPoint{1.0 / 3, 1.0 / 3}), std::log(27.0), 1e-13);
  EXPECT_NEAR(oracle::log_det_lu(oracle::entropic_hessian({1.0 / 3, 1.0 / 3})), std::log(27.0), 1e-13);
  EXPECT_NEAR(entropic_log_det_hess_h(SimplexPoint{0.5}), 2 * std::log(2.0), 1e-14);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto x = oracle::random_simplex(rng, 3);
    EXPECT_NEAR(entropic_log_det_hess_h(SimplexPoint(x)), oracle::log_det_lu(oracle::entropic_hessian(x)), 1e-10);
  }
}

TEST(EntropicGradLogDetHess, Examples) {
  for (double v : entropic_grad_log_det_hess_h(SimplexPoint{0.25, 0.25, 0.25})) EXPECT_NEAR(v, 0.0, 1e-14);
  const auto g = entropic_grad_log_det_hess_h(SimplexPoint{0.5, 0.25});
  EXPECT_NEAR(g[0], 2.0, 1e-14);
  EXPECT_NEAR(g[1], 0.0, 1e-14);
  EXPECT_NEAR(entropic_grad_log_det_hess_h(SimplexPoint{0.25})[0], -4.0 + 4.0 / 3.0, 1e-14);

  auto logdet = [](const std::vector<double>& x) { return entropic_log_det_hess_h(SimplexPoint(x)); };
  for (auto x : {std::vector<double>{0.5, 0.25}, std::vector<double>{0.25}}) {
    const auto fd = oracle::fd_gradient(logdet, x, 1e-6);
    const auto a = entropic_grad_log_det_hess_h(SimplexPoint(x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a[i], fd[i], 1e-6);
  }
}

TEST(EntropicHessSolve, Examples) {
  const SimplexPoint u{1.0 / 3, 1.0 / 3};
  for (double v : entropic_hess_h_solve(u, std::vector<double>{0.0, 0.0})) EXPECT_EQ(v, 0.0);
  const auto s = entropic_hess_h_solve(u, std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(s[0], 2.0 / 9, 1e-15);
  EXPECT_NEAR(s[1], -1.0 / 9, 1e-15);
  const Eigen::Vector2d back = oracle::entropic_hessian({1.0 / 3, 1.0 / 3}) * Eigen::Vector2d(s[0], s[1]);
  EXPECT_NEAR(back(0), 1.0, 1e-14);
  EXPECT_NEAR(back(1), 0.0, 1e-14);
  EXPECT_THROW(entropic_hess_h_solve(u, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(EntropicHessSolve, MatchesDenseSolve) {
  std::mt19937_64 rng(5);
  for (std::size_t d : {1u, 2u, 5u, 10u}) {
    for (int k = 0; k < 10; ++k) {
      const auto x = oracle::random_simplex(rng, d);
      const auto v = oracle::random_vector(rng, d, -3, 3);
      const auto u = entropic_hess_h_solve(SimplexPoint(x), v);
      const Eigen::VectorXd ref =
          oracle::entropic_hessian(x).fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(v.data(), d));
      for (std::size_t i = 0; i < d; ++i)
        EXPECT_NEAR(u[i], ref(static_cast<Eigen::Index>(i)), 1e-10 * std::max(1.0, std::abs(ref(i))));
    }
  }
}

TEST(BlockMap, UniformBlocksMapToZero) {
  const auto map = MirrorMap::block({2, 2});
  EXPECT_EQ(map.dimension(), 4u);
  const std::vector<double> x{1.0 / 3, 1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (double v : block_map_apply(map, MapDirection::forward, x)) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(BlockMap, IdenticalBlocksGiveIdenticalOutputs) {
  const auto map = MirrorMap::block({3, 3});
  const std::vector<double> x{0.1, 0.2, 0.3, 0.1, 0.2, 0.3};
  const auto y = block_map_apply(map, MapDirection::forward, x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y[i], y[i + 3]);
}

TEST(BlockMap, MatchesPerBlockSingleMapAndRoundTrips) {
  std::mt19937_64 rng(21);
  const std::vector<std::size_t> dims{2, 4, 1};
  const auto map = MirrorMap::block(dims);
  std::vector<double> x;
  for (std::size_t d : dims) {
    const auto b = oracle::random_simplex(rng, d);
    x.insert(x.end(), b.begin(), b.end());
  }
  const auto y = block_map_apply(map, MapDirection::forward, x);
  std::size_t off = 0;
  for (std::size_t d : dims) {
    const auto ref = entropic_grad_h(SimplexPoint(std::vector<double>(x.begin() + off, x.begin() + off + d)));
    for (std::size_t i = 0; i < d; ++i) EXPECT_EQ(y[off + i], ref[i]);
    off += d;
  }
  const auto back = block_map_apply(map, MapDirection::inverse, y);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-14);
}

TEST(BlockMap, ShapeMismatchThrows) {
  const auto map = MirrorMap::block({2, 2});
  EXPECT_THROW(block_map_apply(map, MapDirection::forward, std::vector<double>{0.2, 0.2, 0.2}),
               std::invalid_argument);
  EXPECT_THROW(MirrorMap::block({}), std::invalid_argument);
  EXPECT_THROW(MirrorMap::block({2, 0}), std::invalid_argument);
}

TEST(BurgMap, ConjugatePairInvert) {
  for (double x : {0.1, 1.0, 7.5}) EXPECT_NEAR(burg_grad_h_star(burg_grad_h(x)), x, 1e-14 * x);
  EXPECT_NEAR(burg_h_star(-1.0), -1.0, 1e-15);
  EXPECT_THROW(burg_h(0.0), DomainError);
  EXPECT_THROW(burg_h_star(0.0), DomainError);
  const auto map = MirrorMap::burg();
  EXPECT_EQ(map.dimension(), 1u);
  EXPECT_NEAR(block_map_apply(map, MapDirection::forward, std::vector<double>{2.0})[0], -0.5, 1e-15);
}

TEST(BurgCalculus, Examples) {
  EXPECT_NEAR(burg_calculus(-1.0).second, 0.0, 1e-15);
  EXPECT_NEAR(burg_calculus(-2.0).second, -0.25, 1e-15);
  EXPECT_NEAR(burg_calculus(-0.5).second, 8.0, 1e-14);
  EXPECT_THROW(burg_calculus(0.0), DomainError);
  EXPECT_THROW(burg_calculus(0.5), DomainError);
  for (double y : {-2.0, -0.5}) {
    const double h = 1e-4;
    auto w = [](double v) { return burg_calculus(v).value; };
    const double fd2 = (w(y + h) - 2 * w(y) + w(y - h)) / (h * h);
    EXPECT_NEAR(fd2, burg_calculus(y).second, 1e-4);
    const double fd1 = (w(y + h) - w(y - h)) / (2 * h);
    EXPECT_NEAR(fd1, burg_calculus(y).first, 1e-6);
  }
}

TEST(BurgCalculus, GaussianSignChange) {
  const double c = 1.0 / 3;
  EXPECT_NEAR(burg_gaussian_calculus(-1.0, c).second, 0.0, 1e-14);
  EXPECT_LT(burg_gaussian_calculus(-1.5, c).second, 0.0);
  EXPECT_GT(burg_gaussian_calculus(-0.5, c).second, 0.0);
}

// Properties over d in {1, 2, 5, 10, 50}.

class EntropicProperties : public ::testing::TestWithParam<std::size_t> {};

TEST_P(EntropicProperties, FenchelRoundTrip) {
  const std::size_t d = GetParam();
  std::mt19937_64 rng(100 + d);
  for (int k = 0; k < 1000; ++k) {
    const auto x = oracle::random_simplex(rng, d, 1e-6);
    const auto back = entropic_grad_h_star(entropic_grad_h(SimplexPoint(x)));
    for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(back[i], x[i], 1e-10);
    const auto y = oracle::random_vector(rng, d, -30, 30);
    const auto yy = entropic_grad_h(entropic_grad_h_star(DualPoint(y)));
    for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(yy[i], y[i], 1e-10);
  }
}

TEST_P(EntropicProperties, StrongConvexityAndLipschitzDual) {
  const std::size_t d = GetParam();
  std::mt19937_64 rng(200 + d);
  for (int k = 0; k < 100; ++k) {
    const auto x = oracle::random_simplex(rng, d);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(oracle::random_vector(rng, d, -1, 1).data(), d);
    v.normalize();
    EXPECT_GE(v.dot(oracle::entropic_hessian(x) * v), 1.0 - 1e-8);
    const auto y = oracle::random_vector(rng, d, -20, 20);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::softmax_jacobian(y));
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-10);
  }
}

TEST_P(EntropicProperties, LogDetMatchesDenseFactorization) {
  const std::size_t d = GetParam();
  std::mt19937_64 rng(300 + d);
  for (int k = 0; k < 20; ++k) {
    const auto x = oracle::random_simplex(rng, d);
    EXPECT_NEAR(entropic_log_det_hess_h(SimplexPoint(x)), oracle::log_det_lu(oracle::entropic_hessian(x)), 1e-10);
  }
}

TEST_P(EntropicProperties, GradientsMatchFiniteDifferences) {
  const std::size_t d = GetParam();
  std::mt19937_64 rng(400 + d);
  auto hs = [](const std::vector<double>& y) { return entropic_h_star(DualPoint(y)); };
  for (int k = 0; k < 100; ++k) {
    const auto x = oracle::random_simplex(rng, d, 0.05);
    const auto fd = oracle::fd_gradient(h_of, x, 1e-6);
    const auto g = entropic_grad_h(SimplexPoint(x));
    for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(g[i], fd[i], 1e-6 * std::max(1.0, std::abs(fd[i])));
    const auto y = oracle::random_vector(rng, d, -5, 5);
    const auto fdy = oracle::fd_gradient(hs, y, 1e-6);
    const auto p = entropic_grad_h_star(DualPoint(y));
    for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(p[i], fdy[i], 1e-6 * std::max(1.0, std::abs(fdy[i])));
  }
}

TEST_P(EntropicProperties, OverflowSafety) {
  const std::size_t d = GetParam();
  std::mt19937_64 rng(500 + d);
  for (int k = 0; k < 100; ++k) {
    const auto y = oracle::random_vector(rng, d, -700, 700);
    EXPECT_TRUE(std::isfinite(entropic_h_star(DualPoint(y))));
    const auto x = entropic_grad_h_star(DualPoint(y));
    for (double p : x.full()) EXPECT_TRUE(std::isfinite(p));
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, EntropicProperties, ::testing::Values(1, 2, 5, 10, 50));

TEST(BurgProperties, NonConvexitySignMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10.0, -0.1);
  int checked = 0;
  while (checked < 100) {
    const double y = u(rng);
    if (std::abs(y + 1.0) < 1e-2) continue;
    const double h = 1e-4 * std::abs(y);
    auto w = [](double v) { return burg_calculus(v).value; };
    const double fd2 = (w(y + h) - 2 * w(y) + w(y - h)) / (h * h);
    EXPECT_EQ(std::signbit(fd2), std::signbit(burg_calculus(y).second)) << "y=" << y;
    ++checked;
  }
}

TEST(EntropicGradHStar, UnderflowIsReportedDownstreamNotClamped) {
  const auto x = entropic_grad_h_star(DualPoint{700.0, -700.0});
  EXPECT_EQ(x[1], 0.0);
  EXPECT_FALSE(x.strictly_interior());
  EXPECT_THROW(entropic_grad_h(x), DomainError);
  EXPECT_THROW(entropic_log_det_hess_h(x), DomainError);
}
