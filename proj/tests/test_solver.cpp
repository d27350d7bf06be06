#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "nashsl/builtins.hpp"
#include "nashsl/solver.hpp"

using namespace nashsl;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Textbook definition, checked pair by pair.
std::optional<std::array<std::size_t, 2>> brute_force_nash(const Matrix& q1, const Matrix& q2) {
  const std::size_t n1 = q1.size(), n2 = q1[0].size();
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      bool ok = true;
      for (std::size_t k = 0; k < n1 && ok; ++k) ok = q1[i][j] <= q1[k][j];
      for (std::size_t k = 0; k < n2 && ok; ++k) ok = q2[i][j] <= q2[i][k];
      if (ok) return std::array<std::size_t, 2>{i, j};
    }
  }
  return std::nullopt;
}

FieldPair random_fields(const GridSpec& g, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  FieldPair f{ValueField(g), ValueField(g)};
  for (auto& field : f) {
    for (double& v : field.values) v = u(rng);
  }
  return f;
}

Scheme scheme_for(const ProblemSetup& s) {
  const TimeStep ts = time_step(s.problem, s.grid, s.controls, s.config);
  return Scheme(s.problem, s.grid, s.controls, ts.h);
}

}  // namespace

TEST(TimeStep, BuiltinValues) {
  auto h_of = [](const char* name) {
    const ProblemSetup s = builtin_problem(name);
    return time_step(s.problem, s.grid, s.controls, s.config).h;
  };
  EXPECT_DOUBLE_EQ(h_of("test1"), 0.1);
  EXPECT_DOUBLE_EQ(h_of("test3"), 0.08);
  EXPECT_DOUBLE_EQ(h_of("test4"), 0.04);

  ProblemSetup s = builtin_problem("test3");
  s.config.f_norm_safety = 2.0;
  EXPECT_DOUBLE_EQ(time_step(s.problem, s.grid, s.controls, s.config).h, 0.04);
  s.config.time_step_override = 0.01;
  const TimeStep ts = time_step(s.problem, s.grid, s.controls, s.config);
  EXPECT_DOUBLE_EQ(ts.h, 0.01);
  EXPECT_TRUE(ts.overridden);
}

TEST(QValue, SingleTermOfTest1) {
  const ProblemSetup s = builtin_problem("test1");
  const FieldPair zero{ValueField(s.grid, 0.0), ValueField(s.grid, 0.0)};
  const double q = q_value(s.problem, 0, s.grid, 25, {1.0, 0.0}, zero, 0.1);
  EXPECT_NEAR(q, (0.1 / 1.1) * 0.5, 1e-15);
  EXPECT_NEAR(q, 0.0454545454545, 1e-12);
}

TEST(QValue, TabulatedSchemeMatchesDirectEvaluation) {
  for (const char* name : {"test1", "test2-perturbed", "test3", "test4"}) {
    const ProblemSetup s = builtin_problem(name);
    const Scheme sc = scheme_for(s);
    const FieldPair f = random_fields(s.grid, 11, -5.0, 5.0);
    const std::size_t n2 = sc.n2();
    for (std::size_t slot = 0; slot < sc.interior_nodes().size(); slot += 7) {
      const std::size_t j = sc.interior_nodes()[slot];
      for (std::size_t pair = 0; pair < sc.num_pairs(); pair += 13) {
        const std::array<double, 2> a{s.controls[0][pair / n2], s.controls[1][pair % n2]};
        for (std::size_t p = 0; p < 2; ++p) {
          const double direct = q_value(s.problem, p, s.grid, j, a, f, sc.h());
          EXPECT_NEAR(sc.q(p, slot, pair, f[p].values), direct, 1e-12 * (1.0 + std::abs(direct)))
              << name << " node " << j << " pair " << pair;
        }
      }
    }
  }
}

TEST(Nash, MatchingPenniesHasNoPureEquilibrium) {
  const Matrix q1{{0.0, 1.0}, {1.0, 0.0}};
  const Matrix q2{{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_FALSE(find_first_pure_nash(q1, q2).found);
}

TEST(Nash, FirstEquilibriumInLexicographicOrder) {
  const Matrix q{{0.0, 1.0}, {1.0, 0.0}};
  const auto r = find_first_pure_nash(q, q);
  ASSERT_TRUE(r.found);
  EXPECT_EQ(r.indices, (std::array<std::size_t, 2>{0, 0}));

  // All ties: every pair is an equilibrium, the first one wins.
  const Matrix flat(3, std::vector<double>(3, 2.0));
  const auto t = find_first_pure_nash(flat, flat);
  ASSERT_TRUE(t.found);
  EXPECT_EQ(t.indices, (std::array<std::size_t, 2>{0, 0}));
}

TEST(Nash, AgreesWithBruteForceOnRandomGames) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 3);  // many ties
  int found = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n1 = 1 + t % 4, n2 = 1 + (t / 4) % 5;
    Matrix q1(n1, std::vector<double>(n2)), q2 = q1;
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) {
        q1[i][j] = small(rng);
        q2[i][j] = small(rng);
      }
    }
    const auto expect = brute_force_nash(q1, q2);
    const auto got = find_first_pure_nash(q1, q2);
    ASSERT_EQ(got.found, expect.has_value());
    if (expect) {
      ++found;
      EXPECT_EQ(got.indices, *expect);
    }
  }
  EXPECT_GT(found, 0);
}

TEST(Nash, DenseOverloadRejectsRaggedInput) {
  EXPECT_THROW(find_first_pure_nash(Matrix{}, Matrix{}), ConfigError);
  EXPECT_THROW(find_first_pure_nash(Matrix{{1.0}}, Matrix{{1.0}, {2.0}}), ConfigError);
}

TEST(Sweep, IndependentOfNodeOrder) {
  for (const char* name : {"test1", "test3", "test4"}) {
    const ProblemSetup s = builtin_problem(name);
    const Scheme sc = scheme_for(s);
    const FieldPair prev = random_fields(s.grid, 5, 0.0, 3.0);
    FieldPair a = prev, b = prev, c = prev;
    FeedbackField fa(sc), fb(sc), fc(sc);
    sweep(sc, prev, a, fa, NoNashPolicy::FreezeAndFlag);

    std::vector<std::size_t> order(sc.interior_nodes().size());
    std::iota(order.begin(), order.end(), 0);
    sweep(sc, prev, b, fb, NoNashPolicy::FreezeAndFlag, 0, order);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(9));
    sweep(sc, prev, c, fc, NoNashPolicy::FreezeAndFlag, 0, order);
    for (std::size_t p = 0; p < 2; ++p) {
      EXPECT_EQ(a[p].values, b[p].values) << name;
      EXPECT_EQ(a[p].values, c[p].values) << name;
    }
  }
}

TEST(Sweep, BoundaryNodesAreUntouched) {
  const ProblemSetup s = builtin_problem("test3");
  const Scheme sc = scheme_for(s);
  const FieldPair prev = random_fields(s.grid, 1, 0.0, 1.0);
  FieldPair next = prev;
  FeedbackField fb(sc);
  sweep(sc, prev, next, fb, NoNashPolicy::FreezeAndFlag);
  for (std::size_t j = 0; j < s.grid.size(); ++j) {
    if (!s.grid.is_boundary(j)) continue;
    EXPECT_EQ(next[0][j], prev[0][j]);
    EXPECT_EQ(next[1][j], prev[1][j]);
    EXPECT_EQ(fb.status[j], FeedbackStatus::Boundary);
  }
}

TEST(Sweep, ZeroIsAFixedPointOfTest1) {
  const ProblemSetup s = builtin_problem("test1");
  const Scheme sc = scheme_for(s);
  const FieldPair zero{ValueField(s.grid, 0.0), ValueField(s.grid, 0.0)};
  FieldPair next = zero;
  FeedbackField fb(sc);
  const IterationReport r = sweep(sc, zero, next, fb, NoNashPolicy::Halt);
  EXPECT_EQ(r.increments[0], 0.0);
  EXPECT_EQ(r.increments[1], 0.0);
  EXPECT_EQ(fb.at(Point{3.0, 0.0}), (std::array<double, 2>{0.0, 0.0}));
}

TEST(OscillationTracker, ClassifiesSyntheticHistories) {
  const GridSpec g = GridSpec::line(0.0, 1.0, 4);
  OscillationTracker tr(g.size(), 4, {1e-6, 1e-6});
  EXPECT_FALSE(tr.ready());
  for (int k = 0; k < 8; ++k) {
    FieldPair f{ValueField(g, 0.0), ValueField(g, 0.0)};
    f[0][0] = 1.0;                       // constant
    f[0][1] = (k % 2) ? 1.0 : 2.0;       // period 2
    f[0][2] = 0.1 * k;                   // drift
    f[0][3] = (k % 2) ? 1.0 : 1.0 + 1e-9;
    tr.push(f);
  }
  ASSERT_TRUE(tr.ready());
  EXPECT_EQ(tr.classify(0), NodeBehavior::Stabilized);
  EXPECT_EQ(tr.classify(1), NodeBehavior::Oscillating);
  EXPECT_EQ(tr.classify(2), NodeBehavior::Drifting);
  EXPECT_EQ(tr.classify(3), NodeBehavior::Stabilized);
  EXPECT_TRUE(tr.any_oscillating());
}

TEST(OscillationTracker, UndeterminedBeforeWindowFills) {
  const GridSpec g = GridSpec::line(0.0, 1.0, 3);
  OscillationTracker tr(g.size(), 10, {1e-6, 1e-6});
  for (int k = 0; k < 5; ++k) tr.push({ValueField(g, double(k % 2)), ValueField(g, 0.0)});
  EXPECT_EQ(tr.classify(0), NodeBehavior::Undetermined);
  EXPECT_FALSE(tr.any_oscillating());
}

TEST(InitialFields, GuessesAndBoundaryData) {
  ProblemSetup s = builtin_problem("test2");
  SolverConfig c = s.config;
  c.initial_guess.kind = GuessKind::Constant;
  c.initial_guess.constant = 7.0;
  c.boundary.kind = BoundaryKind::Constant;
  c.boundary.values = {-1.0, 3.0};
  FieldPair f = make_initial_fields(s.grid, c, s.references);
  EXPECT_EQ(f[0][10], 7.0);
  EXPECT_EQ(f[0][0], -1.0);
  EXPECT_EQ(f[1][50], 3.0);

  c.boundary.kind = BoundaryKind::Exact;
  c.boundary.solution = "exact";
  f = make_initial_fields(s.grid, c, s.references);
  EXPECT_DOUBLE_EQ(f[0][0], 50.0 + 1.5);
  EXPECT_DOUBLE_EQ(f[1][50], 100.0);

  c.initial_guess.kind = GuessKind::PerturbedExact;
  c.initial_guess.solution = "exact";
  c.initial_guess.amplitude = 0.5;
  c.initial_guess.seed = 42;
  const FieldPair p1 = make_initial_fields(s.grid, c, s.references);
  const FieldPair p2 = make_initial_fields(s.grid, c, s.references);
  EXPECT_EQ(p1[0].values, p2[0].values);
  const FieldPair exact = project(s.grid, s.references[0]);
  double dev = 0.0;
  for (std::size_t j = 1; j + 1 < s.grid.size(); ++j) {
    dev = std::max(dev, std::abs(p1[0][j] - exact[0][j]));
  }
  EXPECT_GT(dev, 0.0);
  EXPECT_LE(dev, 0.5);

  c.initial_guess.solution = "nope";
  EXPECT_THROW(make_initial_fields(s.grid, c, s.references), ConfigError);
}

TEST(Solve, Test1ConvergesToZero) {
  const ProblemSetup s = builtin_problem("test1");
  const SolveResult r = solve(s.problem, s.grid, s.controls, s.config, s.references);
  ASSERT_EQ(r.status, SolveStatus::Converged);
  for (std::size_t j = 1; j + 1 < s.grid.size(); ++j) {
    EXPECT_LE(std::abs(r.fields[0][j]), 1e-5) << j;
    EXPECT_LE(std::abs(r.fields[1][j]), 1e-5) << j;
  }
  EXPECT_EQ(r.fields[0][0], 150.0);
  EXPECT_EQ(r.history.size(), static_cast<std::size_t>(r.iterations));
  EXPECT_DOUBLE_EQ(r.time_step.h, 0.1);
}

TEST(Solve, ExactStartOfTest2IsImmediate) {
  const ProblemSetup s = builtin_problem("test2");
  SolverConfig c = s.config;
  c.initial_guess.kind = GuessKind::Exact;
  c.initial_guess.solution = "exact";
  const SolveResult r = solve(s.problem, s.grid, s.controls, c, s.references);
  EXPECT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(r.iterations, 2);
}

TEST(Solve, Test2IncrementsShrinkFromConstantGuess) {
  ProblemSetup s = builtin_problem("test2");
  s.config.max_iterations = 10;
  const SolveResult r = solve(s.problem, s.grid, s.controls, s.config, s.references);
  ASSERT_EQ(r.history.size(), 10u);
  for (std::size_t k = 1; k < r.history.size(); ++k) {
    for (std::size_t p = 0; p < 2; ++p) {
      EXPECT_LT(r.history[k].increments[p], r.history[k - 1].increments[p]) << "k = " << k;
    }
  }
}

TEST(Solve, Test4MixesStableAndOscillatingNodes) {
  const ProblemSetup s = builtin_problem("test4");
  const SolveResult r = solve(s.problem, s.grid, s.controls, s.config, s.references);
  EXPECT_EQ(r.status, SolveStatus::MaxIterations);
  EXPECT_EQ(r.iterations, 1000);
  EXPECT_TRUE(r.history.back().oscillation_detected);
  EXPECT_GT(r.count(NodeBehavior::Stabilized), 0u);
  EXPECT_GT(r.count(NodeBehavior::Oscillating), 0u);
}

TEST(Solve, HaltPolicyStopsAtMissingEquilibrium) {
  const ProblemSetup s = builtin_problem("test2");
  SolverConfig c = s.config;
  c.on_no_nash = NoNashPolicy::Halt;
  const SolveResult r = solve(s.problem, s.grid, s.controls, c, s.references);
  ASSERT_EQ(r.status, SolveStatus::Halted);
  ASSERT_TRUE(r.halted_node.has_value());
  EXPECT_FALSE(s.grid.is_boundary(*r.halted_node));
  EXPECT_EQ(r.policy, NoNashPolicy::Halt);
}

TEST(Solve, TracesStartWithInitialGuess) {
  ProblemSetup s = builtin_problem("test3");
  s.config.max_iterations = 5;
  s.config.trace_indices = {1300, 2601 + 1300};
  const SolveResult r = solve(s.problem, s.grid, s.controls, s.config, s.references);
  ASSERT_EQ(r.traces.size(), 2u);
  EXPECT_EQ(r.traces[0].size(), 6u);
  EXPECT_EQ(r.traces[0][0], 150.0);
  // Inside the unit ball the cost vanishes and staying put gives beta U.
  EXPECT_NEAR(r.traces[0][1], 150.0 / 1.08, 1e-9);
}

TEST(Trajectory, StartOutsideIsRejected) {
  const ProblemSetup s = builtin_problem("test1");
  const Scheme sc = scheme_for(s);
  const FeedbackField fb(sc);
  EXPECT_THROW(synthesize_trajectory(s.problem, fb, Point{60.0, 0.0}, 10.0, 0.1),
               OutOfDomainError);
}

TEST(Trajectory, Test1FeedbackIsStationary) {
  const ProblemSetup s = builtin_problem("test1");
  const SolveResult r = solve(s.problem, s.grid, s.controls, s.config, s.references);
  const Trajectory t = synthesize_trajectory(s.problem, r.feedback, Point{3.0, 0.0}, 20.0, 0.1);
  EXPECT_FALSE(t.exited);
  EXPECT_NEAR(t.states.back()[0], 3.0, 1e-12);
  EXPECT_NEAR(t.costs[0], 0.0, 1e-12);
  EXPECT_NEAR(t.costs[1], 0.0, 1e-12);
}
