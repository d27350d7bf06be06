#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "nashsl/builtins.hpp"
#include "nashsl/game.hpp"

using namespace nashsl;

TEST(ControlGrid, UniformSpacing) {
  const std::array<ControlBounds, 2> b{ControlBounds{-10.0, 10.0}, ControlBounds{-1.0, 1.0}};
  const std::array<std::size_t, 2> n{101, 3};
  const ControlGrid g = ControlGrid::uniform(b, n);
  ASSERT_EQ(g.count(0), 101u);
  EXPECT_DOUBLE_EQ(g[0].front(), -10.0);
  EXPECT_DOUBLE_EQ(g[0].back(), 10.0);
  EXPECT_NEAR(g[0][50], 0.0, 1e-15);
  EXPECT_NEAR(g[0][51] - g[0][50], 0.2, 1e-12);
  EXPECT_EQ(g[1], (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_NO_THROW(g.validate(b));

  const std::array<std::size_t, 2> single{1, 1};
  EXPECT_DOUBLE_EQ(ControlGrid::uniform(b, single)[0][0], 0.0);
}

TEST(ControlGrid, ValidateRejectsBadSets) {
  const std::array<ControlBounds, 2> b{ControlBounds{-1.0, 1.0}, ControlBounds{-1.0, 1.0}};
  ControlGrid g{{{-1.0, 0.0, 1.0}, {0.0, 0.0}}};
  EXPECT_THROW(g.validate(b), ConfigError);
  g.values[1] = {2.0};
  EXPECT_THROW(g.validate(b), ConfigError);
  g.values[1] = {};
  EXPECT_THROW(g.validate(b), ConfigError);
}

TEST(ControlGrid, TupleOrderLastPlayerFastest) {
  const ControlGrid g{{{1.0, 2.0}, {10.0, 20.0, 30.0}}};
  std::vector<std::array<double, 2>> seen;
  for_each_control_tuple(g, [&](ControlTuple a) { seen.push_back({a[0], a[1]}); });
  ASSERT_EQ(seen.size(), 6u);
  EXPECT_EQ(seen[0], (std::array<double, 2>{1.0, 10.0}));
  EXPECT_EQ(seen[1], (std::array<double, 2>{1.0, 20.0}));
  EXPECT_EQ(seen[3], (std::array<double, 2>{2.0, 10.0}));
  EXPECT_EQ(seen[5], (std::array<double, 2>{2.0, 30.0}));
}

TEST(GameProblem, ValidateCatchesMissingPieces) {
  GameProblem g = builtin_problem("test1").problem;
  EXPECT_NO_THROW(g.validate());
  g.discounts[1] = 0.0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = builtin_problem("test1").problem;
  g.costs.pop_back();
  EXPECT_THROW(g.validate(), ConfigError);
  g = builtin_problem("test1").problem;
  g.dynamics = nullptr;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(FNorm, EstimatedMatchesAnalyticBounds) {
  for (const auto& [name, expected] :
       std::vector<std::pair<std::string, double>>{{"test1", 20.0}, {"test3", 1.0}, {"test4", 2.0}}) {
    const ProblemSetup s = builtin_problem(name);
    EXPECT_DOUBLE_EQ(estimate_f_norm(s.problem, s.grid, s.controls), expected) << name;
    ASSERT_TRUE(s.problem.f_inf_norm.has_value());
    EXPECT_DOUBLE_EQ(*s.problem.f_inf_norm, expected) << name;
  }
}

TEST(FNorm, VanishingDynamicsIsAnError) {
  ProblemSetup s = builtin_problem("test1");
  s.problem.dynamics = [](const Point&, ControlTuple) { return Point{0.0, 0.0}; };
  EXPECT_THROW(estimate_f_norm(s.problem, s.grid, s.controls), NumericalError);
}

// Under a* = (1, -2) the state moves as x - t, so the discounted integrals of
// psi_1 = -(x - t) + 1/2 and psi_2 = 2(x - t) + 2 are 3/2 - x and 2x.
TEST(DiscountedCost, ExplicitLinesOfTest2) {
  const ProblemSetup s = builtin_problem("test2");
  const std::array<FeedbackFn, 2> fb{[](const Point&) { return 1.0; },
                                     [](const Point&) { return -2.0; }};
  const double dt = 1e-3;
  const double horizon = 30.0;
  const double tol = 5.0 * dt + std::exp(-horizon) * 100.0;
  for (const auto& [x, j1, j2] : std::vector<std::array<double, 3>>{{0.0, 1.5, 0.0}, {1.0, 0.5, 2.0}}) {
    const auto J = discounted_cost(s.problem, Point{x, 0.0}, fb, horizon, dt);
    EXPECT_NEAR(J[0], j1, tol) << "x = " << x;
    EXPECT_NEAR(J[1], j2, tol) << "x = " << x;
  }
}

TEST(DiscountedCost, ExitFromBoxReportsTime) {
  const ProblemSetup s = builtin_problem("test2");
  const std::array<FeedbackFn, 2> fb{[](const Point&) { return 1.0; },
                                     [](const Point&) { return -2.0; }};
  const GridSpec box = GridSpec::line(-1.0, 1.0, 3);
  try {
    discounted_cost(s.problem, Point{0.0, 0.0}, fb, 10.0, 0.01, &box);
    FAIL() << "expected TrajectoryExitError";
  } catch (const TrajectoryExitError& e) {
    EXPECT_NEAR(e.exit_time(), 1.0, 0.02);
  }
}

TEST(DiscountedCost, RejectsBadSteps) {
  const ProblemSetup s = builtin_problem("test1");
  const std::array<FeedbackFn, 2> fb{[](const Point&) { return 0.0; },
                                     [](const Point&) { return 0.0; }};
  EXPECT_THROW(discounted_cost(s.problem, Point{0.0, 0.0}, fb, 10.0, 0.0), ConfigError);
  EXPECT_THROW(discounted_cost(s.problem, Point{0.0, 0.0}, fb, -1.0, 0.1), ConfigError);
}

TEST(Builtins, SetupsMatchTheirDefinitions) {
  const ProblemSetup t1 = builtin_problem("test1");
  EXPECT_EQ(t1.grid.size(), 51u);
  EXPECT_DOUBLE_EQ(t1.grid.lower()[0], -50.0);
  EXPECT_EQ(t1.controls.count(0), 101u);
  EXPECT_EQ(t1.references.size(), 3u);

  const ProblemSetup t2 = builtin_problem("test2");
  ASSERT_TRUE(t2.has_exact_solution);
  const auto& u = t2.references.front().values;
  EXPECT_DOUBLE_EQ(u[0](Point{0.0, 0.0}), 1.5);
  EXPECT_DOUBLE_EQ(u[1](Point{0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(u[0](Point{1.0, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(u[1](Point{1.0, 0.0}), 2.0);

  const ProblemSetup t3 = builtin_problem("test3");
  const std::array<double, 2> a{0.0, 0.0};
  EXPECT_DOUBLE_EQ(t3.problem.costs[0](Point{0.5, 0.5}, a), 0.0);
  EXPECT_DOUBLE_EQ(t3.problem.costs[0](Point{1.2, 1.6}, a), 2.0);
  EXPECT_EQ(t3.grid.size(), 2601u);
  EXPECT_EQ(t3.controls[0], (std::vector<double>{-1.0, 0.0, 1.0}));

  const ProblemSetup t4 = builtin_problem("test4");
  const std::array<double, 2> b{1.0, -1.0};
  const Point f = t4.problem.dynamics(Point{0.0, 0.0}, b);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[1], 2.0);
  EXPECT_DOUBLE_EQ(t4.problem.costs[1](Point{1.0, 2.0}, b), 5.0);

  EXPECT_THROW(builtin_problem("test9"), ConfigError);
  ProblemParams bad;
  bad.name = "test2";
  bad.k1 = 1.0;
  EXPECT_THROW(builtin_problem(bad), ConfigError);
}
