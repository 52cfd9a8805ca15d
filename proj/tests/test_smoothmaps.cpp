#include <gtest/gtest.h>

#include <random>

#include "bubblekit/errors.hpp"
#include "bubblekit/pathlab.hpp"
#include "bubblekit/smoothmaps.hpp"
#include "support.hpp"

using namespace bubblekit;
using bktest::close_rel;

TEST(PowerLaw, PreSchwarzianAndSchwarzian) {
  EXPECT_DOUBLE_EQ(pre_schwarzian(power_law_map(-1, 0), 2.0), -1.0);
  EXPECT_DOUBLE_EQ(pre_schwarzian(power_law_map(1, 0), 3.7), 0.0);
  EXPECT_NEAR(schwarzian(power_law_map(-1, 0), 0.3), 0.0, 1e-12);
  EXPECT_NEAR(schwarzian(power_law_map(0.5, 0), 1.0), 0.375, 1e-14);
  EXPECT_NEAR(schwarzian(log_map(0), 2.0), 0.125, 1e-14);
  const auto f = power_law_map(2.5, -0.5);
  for (double x : {0.1, 1.0, 7.0}) {
    EXPECT_NEAR(pre_schwarzian(f, x), 1.5 / (x + 0.5), 1e-12);
    EXPECT_NEAR(schwarzian(f, x), (1 - 6.25) / (2 * (x + 0.5) * (x + 0.5)), 1e-10);
  }
}

TEST(PowerLaw, DomainErrors) {
  const auto f = power_law_map(-1, 0.5);
  EXPECT_THROW(pre_schwarzian(f, 0.5), DomainError);
  EXPECT_THROW(schwarzian(f, -1.0), DomainError);
  EXPECT_EQ(f.sign(), -1);
  EXPECT_EQ(power_law_map(3, 0).sign(), 1);
}

TEST(Mobius, SchwarzianVanishes) {
  const auto id = mobius_map({1, 0, 0, 1});
  EXPECT_NEAR(pre_schwarzian(id, 0.7), 0.0, 1e-15);
  EXPECT_NEAR(schwarzian(mobius_map({0, 1, 1, 0}), 3.0), 0.0, 1e-14);
  EXPECT_NEAR(schwarzian(mobius_map({2, 3, 1, 1}), 5.0), 0.0, 1e-14);
  EXPECT_THROW(mobius_map({1, 2, 2, 4}), ConfigError);
  const auto left = mobius_map({2, 3, 1, 1}, PoleSide::Left);
  EXPECT_TRUE(left.in_domain(-3.0));
  EXPECT_FALSE(left.in_domain(0.0));
}

TEST(Compose, ChainRuleCases) {
  const auto r = reciprocal_map();
  const auto rr = compose(r, r);
  for (double x : {0.2, 1.0, 4.0}) {
    EXPECT_NEAR(rr(x), x, 1e-14 * x);
    EXPECT_NEAR(schwarzian(rr, x), 0.0, 1e-10);
  }
  const auto g = power_law_map(3, 0);
  const auto a = affine_map(2.0, 1.0);
  const auto ga = compose(g, a);
  for (double x : {0.1, 0.5, 2.0}) EXPECT_NEAR(schwarzian(ga, x), schwarzian(g, a(x)) * 4.0, 1e-10);
  const auto lhs = compose(power_law_map(2, 0), power_law_map(-1, 0));
  EXPECT_NEAR(schwarzian(lhs, 1.5), -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(schwarzian(power_law_map(-2, 0), 1.5), -2.0 / 3.0, 1e-12);
  // Partial overlap restricts the domain; no overlap is rejected.
  const auto cut = compose(power_law_map(0.5, 0), affine_map(1.0, -10.0));
  EXPECT_DOUBLE_EQ(cut.domain().lo, 10.0);
  const auto negative = compose(affine_map(-1.0, 0.0), power_law_map(2, 0));
  EXPECT_THROW(compose(power_law_map(0.5, 0), negative), ConfigError);
}

TEST(Derivatives, FiniteDifferenceCrossCheck) {
  const std::vector<SmoothMap> maps = {
      power_law_map(-1, 0),  power_law_map(0.5, -1), power_law_map(3, 0),
      log_map(0.2),          mobius_map({2, 3, 1, 1}), reciprocal_map(),
      affine_map(-2.0, 1.0), compose(log_map(0), power_law_map(2, 0)),
      shifted(power_law_map(-1, 0), 0.3)};
  for (const auto& f : maps) {
    for (double x : {0.25, 1.0, 3.0}) {
      if (!f.in_domain(x)) continue;
      EXPECT_LT(derivative_mismatch(f, x), kDerivativeTolerance) << f.descriptor() << " at " << x;
      EXPECT_GT(f.sign() * f.d1(x), 0.0) << f.descriptor();
    }
  }
}

TEST(Maps, InverseAndDescriptor) {
  const auto f = compose(mobius_map({2, 3, 1, 1}), power_law_map(-1.5, 0));
  for (double x : {0.3, 1.0, 2.5}) EXPECT_NEAR(f.inverse(f(x)), x, 1e-10 * (1 + x));
  EXPECT_EQ(power_law_map(-1, 0).descriptor(), "power_law{alpha=-1,xi=0}");
  EXPECT_EQ(log_map(0.5).descriptor(), "log{xi=0.5}");
  EXPECT_NE(f.descriptor().find("compose{outer=mobius"), std::string::npos);
}

// ---------------------------------------------------------------------------------------
// Identities at random points

namespace {

struct Sampler {
  std::mt19937_64 rng{20240901};
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
  double alpha() {
    double a = 0.0;
    while (std::abs(a) < 0.1 || std::abs(std::abs(a) - 1.0) < 0.05) a = uniform(-3.0, 3.0);
    return a;
  }
  /// Point in (lo, lo + e^2), biased toward moderate distances from the edge.
  double point(double lo) { return lo + std::exp(uniform(-1.5, 1.5)); }
  /// Decreasing Möbius map with pole below 0: its range on (pole, ∞) is (a/c, ∞).
  MobiusCoeffs decreasing_mobius() {
    const double c = uniform(0.5, 2.0), d = uniform(0.2, 2.0), a = uniform(-1.0, 1.0);
    const double b = a * d / c + uniform(0.5, 2.0);  // ad - bc < 0
    return {a, b, c, d};
  }
};

constexpr double kRel = 1e-7;
constexpr int kPoints = 100;

}  // namespace

TEST(Identities, T1AffineHasZeroPreSchwarzian) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = affine_map(s.uniform(-3, 3) + 3.5, s.uniform(-2, 2));
    EXPECT_EQ(pre_schwarzian(f, s.uniform(-10, 10)), 0.0);
  }
}

TEST(Identities, T2ChainRule) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = power_law_map(s.alpha(), 0.0);
    const auto g = power_law_map(s.alpha(), s.uniform(-1.0, 0.0));
    const auto gf = compose(g, f);
    const double x = s.point(0.0);
    const double lhs = pre_schwarzian(gf, x);
    const double rhs = pre_schwarzian(g, f(x)) * f.d1(x) + pre_schwarzian(f, x);
    EXPECT_TRUE(close_rel(lhs, rhs, kRel)) << lhs << " vs " << rhs;
  }
}

TEST(Identities, T3AffineComposition) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = power_law_map(s.alpha(), 0.0);
    const auto g = affine_map(s.uniform(0.5, 3.0) * (k % 2 ? 1 : -1), s.uniform(-1, 1));
    const double x = s.point(0.0);
    EXPECT_TRUE(close_rel(pre_schwarzian(compose(g, f), x), pre_schwarzian(f, x), kRel));
    const auto g2 = affine_map(s.uniform(0.5, 3.0), s.uniform(0.0, 1.0));
    const auto fg = compose(f, g2);
    EXPECT_TRUE(close_rel(pre_schwarzian(fg, x), pre_schwarzian(f, g2(x)) * g2.d1(x), kRel));
  }
}

TEST(Identities, T4EqualPreSchwarzianMeansAffinelyRelated) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = compose(power_law_map(s.alpha(), -0.5), power_law_map(s.alpha(), 0.0));
    const double A = s.uniform(0.5, 2.0) * (k % 2 ? 1 : -1), B = s.uniform(-1, 1);
    const auto g = compose(affine_map(A, B), f);
    const double x = s.point(0.0), y = s.point(0.0);
    EXPECT_TRUE(close_rel(pre_schwarzian(g, x), pre_schwarzian(f, x), kRel));
    // Converse direction: g' / f' is the same constant at two unrelated points.
    EXPECT_TRUE(close_rel(g.d1(x) / f.d1(x), g.d1(y) / f.d1(y), kRel));
  }
}

TEST(Identities, T5Reciprocal) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = power_law_map(s.alpha(), s.uniform(-1.0, 0.0));
    const auto inv = compose(reciprocal_map(), f);
    const double x = s.point(0.0);
    const double rhs = pre_schwarzian(f, x) - 2.0 * f.d1(x) / f(x);
    EXPECT_TRUE(close_rel(pre_schwarzian(inv, x), rhs, kRel));
  }
  // The documented instance: f = x^2 at x = 1.
  const auto f = power_law_map(2, 0);
  EXPECT_NEAR(pre_schwarzian(compose(reciprocal_map(), f), 1.0), 1.0 - 4.0, 1e-12);
}

TEST(Identities, S1MobiusHasZeroSchwarzian) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto c = s.decreasing_mobius();
    const auto m = mobius_map(c);
    const double x = s.point(-c.d / c.c);
    EXPECT_LE(std::abs(schwarzian(m, x)), 1e-9 * (1.0 + 1.0 / (x * x)));
  }
}

TEST(Identities, S2ChainRule) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = power_law_map(s.alpha(), 0.0);
    const auto g = k % 2 ? power_law_map(s.alpha(), s.uniform(-1.0, 0.0)) : log_map(s.uniform(-1.0, 0.0));
    const auto gf = compose(g, f);
    const double x = s.point(0.0);
    const double d = f.d1(x);
    const double rhs = schwarzian(g, f(x)) * d * d + schwarzian(f, x);
    EXPECT_TRUE(close_rel(schwarzian(gf, x), rhs, kRel, 1e-10)) << schwarzian(gf, x) << " vs " << rhs;
  }
}

TEST(Identities, S3MobiusComposition) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    // Möbius outside: S_{m∘f} = S_f.
    const auto f = power_law_map(s.alpha(), 0.0);
    const auto c = s.decreasing_mobius();
    const auto m = mobius_map(c);
    const double x = s.point(0.0);
    EXPECT_TRUE(close_rel(schwarzian(compose(m, f), x), schwarzian(f, x), kRel, 1e-10));
    // Möbius inside: S_{f∘m} = (S_f∘m) m'^2, with f defined on m's range (a/c, ∞).
    const auto g = power_law_map(s.alpha(), c.a / c.c - s.uniform(0.1, 1.0));
    const auto gm = compose(g, m);
    const double z = s.point(-c.d / c.c);
    const double d = m.d1(z);
    EXPECT_TRUE(close_rel(schwarzian(gm, z), schwarzian(g, m(z)) * d * d, kRel, 1e-10));
  }
}

TEST(Identities, S4EqualSchwarzianMeansMobiusRelated) {
  Sampler s;
  for (int k = 0; k < kPoints; ++k) {
    const auto f = power_law_map(s.alpha(), 0.0);
    const auto c = s.decreasing_mobius();
    const auto g = compose(mobius_map(c), f);
    const double x = s.point(0.0);
    EXPECT_TRUE(close_rel(schwarzian(g, x), schwarzian(f, x), kRel, 1e-10));
    // g is recovered from f by the fixed Möbius map at every point.
    EXPECT_TRUE(close_rel(g(x), (c.a * f(x) + c.b) / (c.c * f(x) + c.d), kRel));
  }
}

// ---------------------------------------------------------------------------------------
// Schwarzian process

TEST(SchwarzianProcess, ConstantPathAndStart) {
  const std::vector<double> t = {0, 0.5, 1.0}, x = {2, 2, 2};
  const auto s = schwarzian_process(mobius_map({2, 3, 1, 1}), t, x);
  for (double v : s.values) EXPECT_NEAR(v, 1.0, 1e-15);
  const auto p = schwarzian_process(power_law_map(3, 0), std::vector<double>{0, 1}, std::vector<double>{1, 2});
  EXPECT_EQ(p.values.front(), 1.0);
}

TEST(SchwarzianProcess, TruncatesAtDomainExit) {
  const std::vector<double> t = {0, 1, 2, 3}, x = {1.0, 0.5, -0.1, 0.4};
  const auto s = schwarzian_process(power_law_map(-1, 0), t, x);
  ASSERT_TRUE(s.truncated());
  EXPECT_EQ(*s.exit_index, 2u);
  EXPECT_EQ(s.values.size(), 2u);
}

TEST(SchwarzianProcess, MobiusClosedFormOnSimulatedPaths) {
  const MobiusCoeffs c{2, 3, 1, 1};
  const auto m = mobius_map(c);
  const auto grid = TimeGrid::uniform(1.0, 512);
  int checked = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto path = simulate_wiener(2.0, grid, 11, i);
    const auto s = schwarzian_process(m, path);
    for (std::size_t n = 0; n < s.values.size(); ++n) {
      EXPECT_NEAR(s.values[n], (c.c * path.x[n] + c.d) / (c.c * path.x[0] + c.d), 1e-9 * (1 + s.values[n]));
      ++checked;
    }
  }
  EXPECT_GT(checked, 100 * 400);
}

TEST(SchwarzianProcess, PowerLawClosedForm) {
  const double alpha = -2.0, xi = -0.5;
  const auto f = power_law_map(alpha, xi);
  const auto grid = TimeGrid::uniform(0.5, 256);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto path = simulate_wiener(1.0, grid, 3, i);
    const auto s = schwarzian_process(f, path);
    double integral = 0.0;
    for (std::size_t n = 0; n < s.values.size(); ++n) {
      if (n > 0) {
        const double a = path.x[n - 1] - xi, b = path.x[n] - xi;
        integral += 0.5 * grid.dt(n) * (1 / (a * a) + 1 / (b * b));
      }
      const double expect = std::pow((path.x[0] - xi) / (path.x[n] - xi), alpha / 2 - 0.5) *
                            std::exp((1 - alpha * alpha) / 8 * integral);
      EXPECT_NEAR(s.values[n], expect, 1e-10 * expect);
    }
  }
}

TEST(SchwarzianProcess, CompositionIsMultiplicative) {
  // S^{f∘g}(X) = S^f(g(X)) S^g(X), where g(X) has quadratic variation rate g'(X)^2.
  const auto f = power_law_map(-1.5, 0.0);
  const auto g = power_law_map(0.5, 0.0);
  const auto fg = compose(f, g);
  const auto grid = TimeGrid::uniform(0.25, 2048);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto path = simulate_wiener(2.0, grid, 5, i);
    const auto lhs = schwarzian_process(fg, path);
    const std::size_t n = lhs.values.size();
    std::vector<double> gx(n), rate(n);
    for (std::size_t k = 0; k < n; ++k) {
      gx[k] = g(path.x[k]);
      rate[k] = g.d1(path.x[k]) * g.d1(path.x[k]);
    }
    const auto sg = schwarzian_process(g, std::span(path.grid.nodes()).first(n), std::span<const double>(path.x).first(n));
    const auto sf = schwarzian_process(f, std::span(path.grid.nodes()).first(n), gx, rate);
    ASSERT_EQ(sf.values.size(), n);
    ASSERT_EQ(sg.values.size(), n);
    for (std::size_t k = 0; k < n; ++k) {
      const double rhs = sf.values[k] * sg.values[k];
      worst = std::max(worst, std::abs(lhs.values[k] - rhs) / rhs);
    }
  }
  // Both sides use the trapezoid rule on the same nodes; the integrands agree exactly.
  EXPECT_LT(worst, 1e-9);
}

TEST(SchwarzianProcess, SupermartingaleOnStoppedEnsemble) {
  for (const auto& s : {power_law_map(-2.0, 0.0), log_map(0.0), power_law_map(0.5, 0.0)}) {
    const auto est = change_of_measure_expectation(
        s, [](const PathBundle&) { return 1.0; }, 2.0, TimeGrid::uniform(0.2, 256), 20000, 9,
        Interval{0.5, 4.0});
    EXPECT_LE(est.mean, 1.0 + 3.0 * est.std_error + 1e-12) << s.descriptor();
  }
}
