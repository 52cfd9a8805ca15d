#include <gtest/gtest.h>

#include <cmath>

#include "bubblekit/closedform.hpp"
#include "bubblekit/errors.hpp"
#include "bubblekit/pathlab.hpp"
#include "support.hpp"

using namespace bubblekit;
using bktest::joint_z;

namespace {

McEstimate terminal_moment(std::size_t n, int power, const std::function<PathBundle(std::size_t)>& sim,
                           double shift = 0.0) {
  const auto samples = run_paths(n, [&](std::size_t i) {
    const auto p = sim(i);
    return std::pow(p.x.back() - shift, power);
  });
  return summarize(samples);
}

void expect_reflected_invariants(const PathBundle& p) {
  ASSERT_EQ(p.contact.size(), p.x.size() - 1);
  for (std::size_t n = 0; n < p.x.size(); ++n) {
    EXPECT_GE(p.x[n], p.jstar[n]) << "node " << n;
    if (n == 0) continue;
    EXPECT_GE(p.jstar[n], p.jstar[n - 1]) << "node " << n;
    if (p.jstar[n] > p.jstar[n - 1]) {
      EXPECT_LT(p.contact[n - 1], 0.0) << "contact rule at step " << n;
    }
  }
}

SimOptions monitored(Monitoring m) {
  SimOptions o;
  o.monitoring = m;
  return o;
}

}  // namespace

TEST(TimeGrid, Construction) {
  EXPECT_THROW(TimeGrid(std::vector<double>{0.0}), ConfigError);
  EXPECT_THROW(TimeGrid(std::vector<double>{0.0, 0.5, 0.5}), ConfigError);
  EXPECT_THROW(TimeGrid::uniform(1.0, 0), ConfigError);
  const auto g = TimeGrid::uniform(2.0, 4);
  EXPECT_EQ(g.steps(), 4u);
  EXPECT_DOUBLE_EQ(g.dt(1), 0.5);
  EXPECT_EQ(g[4], 2.0);
  const std::vector<double> extra = {0.3, 1.0, 1.0 + 1e-14};
  const auto h = TimeGrid::uniform_with(2.0, 4, extra);
  EXPECT_EQ(h.size(), 6u);
  EXPECT_EQ(*h.find(0.3), 1u);
}

TEST(Wiener, DegenerateStream) {
  ScriptedNoise zero;
  const auto p = simulate_wiener(0.7, TimeGrid::uniform(1.0, 1), zero);
  ASSERT_EQ(p.x.size(), 2u);
  EXPECT_EQ(p.x[1], 0.7);
}

TEST(Wiener, MomentsAndDeterminism) {
  const auto grid = TimeGrid::uniform(1.5, 8);
  const std::size_t n = 100000;
  const auto sim = [&](std::size_t i) { return simulate_wiener(0.3, grid, 42, i); };
  const auto m1 = terminal_moment(n, 1, sim);
  EXPECT_LE(std::abs(m1.mean - 0.3), 3 * std::sqrt(1.5 / n));
  const auto m2 = terminal_moment(n, 2, sim, 0.3);
  EXPECT_NEAR(m2.mean, 1.5, 0.05 * 1.5);
  const auto a = simulate_wiener(0.3, grid, 42, 17), b = simulate_wiener(0.3, grid, 42, 17);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(a.x, simulate_wiener(0.3, grid, 42, 18).x);
  EXPECT_NE(a.x, simulate_wiener(0.3, grid, 43, 17).x);
}

TEST(Bessel3Dual, DegenerateStreamAndPreconditions) {
  ScriptedNoise zero;
  const auto p = simulate_bessel3_dual(1.5, 0.5, TimeGrid::uniform(1.0, 16), zero);
  for (std::size_t n = 0; n < p.x.size(); ++n) {
    EXPECT_DOUBLE_EQ(p.x[n], 1.5);
    EXPECT_DOUBLE_EQ(p.jstar[n], 0.5);
  }
  EXPECT_THROW(simulate_bessel3_dual(1.0, 1.5, TimeGrid::uniform(1.0, 4), 1), ConfigError);
  EXPECT_THROW(simulate_bessel3_dual(1.0, 0.0, TimeGrid::uniform(1.0, 4), 1), ConfigError);
}

TEST(Bessel3Dual, SecondMomentFromZero) {
  const auto grid = TimeGrid::uniform(2.0, 256);
  const auto m = terminal_moment(40000, 2, [&](std::size_t i) {
    return simulate_bessel3_dual(1e-9, 1e-9, grid, 5, i);
  });
  EXPECT_LE(std::abs(joint_z(m.mean, m.std_error, 6.0)), 3.0) << m.mean << " +- " << m.std_error;
}

TEST(Bessel3Dual, FutureInfimumAndReflectionInvariants) {
  const auto grid = TimeGrid::uniform(4.0, 1024);
  const double slack = 2.0 * std::sqrt(4.0 / 1024);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto p = simulate_bessel3_dual(1.0, 0.4, grid, 21, i);
    const auto inf = future_infimum(p);
    for (std::size_t n = 0; n < p.x.size(); ++n) {
      ASSERT_GE(p.x[n], p.jstar[n]);
      if (n) {
        ASSERT_GE(p.jstar[n], p.jstar[n - 1]);
      }
      ASSERT_GE(inf[n], p.jstar[n] - slack) << "path " << i << " node " << n;
    }
  }
}

TEST(CrossSimulator, BesselMomentsAgree) {
  const auto grid = TimeGrid::uniform(1.0, 1024);
  const std::size_t n = 20000;
  const auto dual = [&](std::size_t i) { return simulate_bessel3(1.0, grid, 7, i); };
  const auto drift = [&](std::size_t i) { return simulate_drifted(reciprocal_map(), 1.0, grid, 8, i); };
  for (int k : {1, 2}) {
    const auto a = terminal_moment(n, k, dual), b = terminal_moment(n, k, drift);
    EXPECT_LE(std::abs(joint_z(a.mean, a.std_error, b.mean, b.std_error)), 3.0) << "moment " << k;
    // E[X_T^2] = x0^2 + 3T.
    if (k == 2) {
      EXPECT_LE(std::abs(joint_z(a.mean, a.std_error, 4.0)), 3.0);
    }
  }
}

TEST(Drifted, AffineIsWiener) {
  const auto grid = TimeGrid::uniform(1.0, 64);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto a = simulate_drifted(affine_map(2.0, 1.0), 0.5, grid, 3, i);
    const auto b = simulate_wiener(0.5, grid, 3, i);
    EXPECT_EQ(a.x, b.x);
  }
}

TEST(Drifted, AbsorptionAtDomainEdge) {
  // Identity price map: Brownian motion absorbed when it reaches 0.
  const auto grid = TimeGrid::uniform(1.0, 256);
  const std::size_t n = 40000;
  const auto hits = run_paths(n, [&](std::size_t i) {
    const auto p = simulate_drifted(power_law_map(1.0, 0.0), 1.0, grid, 13, i);
    if (p.truncated()) {
      EXPECT_NEAR(p.x.back(), 0.0, 1e-9);
    }
    return p.truncated() ? 1.0 : 0.0;
  });
  const auto est = summarize(hits);
  EXPECT_LE(std::abs(joint_z(est.mean, est.std_error, 2.0 * normal_cdf(-1.0))), 3.0) << est.mean;
}

TEST(Skorokhod, DegenerateStream) {
  ScriptedNoise zero;
  const auto p = simulate_skorokhod(affine_map(1.0, 0.0), 1.0, 0.25, TimeGrid::uniform(1.0, 8), zero,
                                    monitored(Monitoring::Discrete));
  for (std::size_t n = 0; n < p.x.size(); ++n) {
    EXPECT_DOUBLE_EQ(p.x[n] - p.jstar[n], 0.75);
    EXPECT_DOUBLE_EQ(p.jstar[n], 0.25);
  }
}

TEST(Skorokhod, InvariantsBothMonitorings) {
  const auto grid = TimeGrid::uniform(1.0, 512);
  for (auto mon : {Monitoring::Discrete, Monitoring::Bridge}) {
    for (std::uint64_t i = 0; i < 200; ++i) {
      expect_reflected_invariants(simulate_skorokhod(reciprocal_map(), 1.0, 0.6, grid, 2, i, monitored(mon)));
      expect_reflected_invariants(simulate_skorokhod(power_law_map(1, 0), 0.5, 0.5, grid, 2, i, monitored(mon)));
    }
  }
}

TEST(Skorokhod, DiscreteMatchesRunningMaxRecipe) {
  // With zero drift, the per-step projection equals l_n = max_{i<=n}(-w_i) ∨ 0 from (0, 0).
  const auto grid = TimeGrid::uniform(1.0, 300);
  const auto p = simulate_skorokhod(affine_map(1.0, 0.0), 0.0, 0.0, grid, 4, 1, monitored(Monitoring::Discrete));
  double w = 0.0, l = 0.0;
  for (std::size_t n = 1; n < p.x.size(); ++n) {
    w += p.increments[n - 1];
    l = std::max(l, -w);
    EXPECT_NEAR(p.jstar[n], l, 1e-12);
    EXPECT_NEAR(p.x[n], w + 2 * l, 1e-12);
  }
}

TEST(Skorokhod, FloorStartIsBessel3FromZero) {
  // Identity price map: X - j0 = 2 sup(-β) + β is a three-dimensional Bessel process.
  const auto grid = TimeGrid::uniform(1.0, 1024);
  const auto m = terminal_moment(40000, 2, [&](std::size_t i) {
    return simulate_skorokhod(power_law_map(1, 0), 0.7, 0.7, grid, 6, i);
  }, 0.7);
  EXPECT_LE(std::abs(joint_z(m.mean, m.std_error, 3.0)), 3.0) << m.mean;
}

TEST(Skorokhod, WeakConvergenceUnderRefinement) {
  const auto h = [](double x) { return std::exp(-x); };
  std::vector<McEstimate> est;
  for (std::size_t steps : {64, 128}) {
    const auto grid = TimeGrid::uniform(1.0, steps);
    est.push_back(summarize(run_paths(100000, [&](std::size_t i) {
      return h(simulate_skorokhod(reciprocal_map(), 1.0, 0.5, grid, 31, i).x.back());
    })));
  }
  EXPECT_LE(std::abs(joint_z(est[0].mean, est[0].std_error, est[1].mean, est[1].std_error)), 3.0);
}

TEST(Stepper, PreconditionsAndContact) {
  const auto f = reciprocal_map();
  EXPECT_THROW(ReflectedStepper(f, 1.0, 1.5, Monitoring::Bridge), ConfigError);
  EXPECT_THROW(ReflectedStepper(f, 1.0, 0.0, Monitoring::Bridge), ConfigError);
  ReflectedStepper s(f, 1.0, 1.0, Monitoring::Bridge);
  ScriptedNoise noise({-3.0, 1.0});
  ASSERT_TRUE(s.step(0.01, noise));
  EXPECT_TRUE(s.touched());
  EXPECT_GE(s.x(), s.floor());
}

TEST(Functionals, FirstHitting) {
  PathBundle p;
  p.grid = TimeGrid::uniform(3.0, 3);
  p.x = {1.0, 0.8, 0.2, 0.1};
  EXPECT_EQ(*first_hitting(p, 1.0), 0.0);
  const double t = *first_hitting(p, 0.5);
  EXPECT_GT(t, 1.0);
  EXPECT_LT(t, 2.0);
  EXPECT_NEAR(t, 1.5, 1e-12);
  EXPECT_FALSE(first_hitting(p, 0.0).has_value());
}

TEST(Functionals, FirstHittingFrequency) {
  const auto grid = TimeGrid::uniform(1.0, 8192);
  const std::size_t n = 4000;
  const auto est = summarize(run_paths(n, [&](std::size_t i) {
    return first_hitting(simulate_wiener(1.0, grid, 77, i), 0.0) ? 1.0 : 0.0;
  }));
  EXPECT_LE(std::abs(joint_z(est.mean, est.std_error, 2.0 * normal_cdf(-1.0))), 3.0) << est.mean;
}

TEST(Functionals, FutureInfimum) {
  PathBundle up;
  up.grid = TimeGrid::uniform(1.0, 3);
  up.x = {0.0, 1.0, 2.0, 3.0};
  EXPECT_EQ(future_infimum(up), up.x);
  PathBundle down = up;
  down.x = {3.0, 2.0, 2.5, 1.0};
  for (double v : future_infimum(down)) EXPECT_EQ(v, 1.0);
}

TEST(Ensembles, BlockAccumulationIsOrderFixed) {
  const std::size_t n = 5000;
  const auto a = accumulate_paths(n, 2, [](std::size_t i, std::span<double> row) {
    row[0] = std::sin(double(i));
    row[1] = 1.0;
  });
  EXPECT_EQ(a.n, n);
  EXPECT_DOUBLE_EQ(a.mean[1], 1.0);
  EXPECT_DOUBLE_EQ(a.std_error[1], 0.0);
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = std::sin(double(i));
  const auto ref = summarize(xs);
  EXPECT_NEAR(a.mean[0], ref.mean, 1e-14);
  EXPECT_NEAR(a.std_error[0], ref.std_error, 1e-12);
  const auto b = accumulate_paths(n, 2, [](std::size_t i, std::span<double> row) {
    row[0] = std::sin(double(i));
    row[1] = 1.0;
  });
  EXPECT_EQ(a.mean[0], b.mean[0]);
}

TEST(ChangeOfMeasure, DensityHasUnitMean) {
  const auto grid = TimeGrid::uniform(0.5, 256);
  const auto one = [](const PathBundle&) { return 1.0; };
  const auto est = change_of_measure_expectation(reciprocal_map(), one, 1.0, grid, 20000, 3, {0.25, 4.0});
  EXPECT_LE(std::abs(est.mean - 1.0), 3.0 * est.std_error + 1e-12) << est.mean << " +- " << est.std_error;
  const auto flat = change_of_measure_expectation(affine_map(1.0, 0.0), one, 1.0, grid, 1000, 3, {0.25, 4.0});
  EXPECT_DOUBLE_EQ(flat.mean, 1.0);
  EXPECT_DOUBLE_EQ(flat.std_error, 0.0);
}

TEST(ChangeOfMeasure, StoppedBesselFunctional) {
  // E^{P^s}[X_{T ∧ exit}] for s = 1/x against direct Bessel-3 paths stopped at the band.
  const Interval band{0.25, 3.0};
  const auto grid = TimeGrid::uniform(0.5, 512);
  const auto stopped = [](const PathBundle& p) { return p.x.back(); };
  const auto is = change_of_measure_expectation(reciprocal_map(), stopped, 1.0, grid, 40000, 12, band);
  SimOptions opt;
  opt.band = band;
  const auto direct = summarize(run_paths(40000, [&](std::size_t i) {
    return simulate_drifted(reciprocal_map(), 1.0, grid, 14, i, opt).x.back();
  }));
  EXPECT_LE(std::abs(joint_z(is.mean, is.std_error, direct.mean, direct.std_error)), 3.0)
      << is.mean << " vs " << direct.mean;
}
