// End-to-end acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bubblekit/boundary.hpp"
#include "bubblekit/closedform.hpp"
#include "bubblekit/pathlab.hpp"
#include "bubblekit/pdesolve.hpp"
#include "bubblekit/runner.hpp"
#include "bubblekit/smoothmaps.hpp"

using namespace bubblekit;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double joint_se(double a, double b = 0.0) { return std::sqrt(a * a + b * b); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

McOptions full_mc(std::uint64_t seed) {
  McOptions mc;
  mc.n_paths = 100000;
  mc.steps = 2048;
  mc.seed = seed;
  return mc;
}

const SmoothMap kRecip = power_law_map(-1.0, 0.0);
const SigmaSpec kSquare = SigmaSpec::power(1.0, 2.0);
constexpr std::size_t kIntervals = 800;
constexpr std::size_t kSteps = 2048;

std::vector<double> unit_taus(double T, std::size_t n) {
  std::vector<double> taus(n + 1);
  for (std::size_t k = 0; k <= n; ++k) taus[k] = T * static_cast<double>(k) / static_cast<double>(n);
  return taus;
}

struct PdeAt {
  double value;
  double std_error;
  double seconds;
};

PdeAt pde_value(const SchemeKind& s, const SigmaSpec& sigma, const PayoffSpec& payoff, double y) {
  const auto t0 = Clock::now();
  GridPolicy pol;
  pol.intervals = kIntervals;
  pol.steps = kSteps;
  pol.snap = {y};
  const auto sol = solve(sigma, payoff, 1.0, s, grid_for(s, sigma, pol), TimeGrid::uniform(1.0, kSteps));
  return {sol.initial_value(y), sol.initial_stderr(y), seconds_since(t0)};
}

// Θ tables for the reciprocal forward benchmark, estimated once per floor.
struct ThetaCache {
  std::map<double, std::pair<ThetaTable, double>> tables;
  const std::pair<ThetaTable, double>& get(double j) {
    auto it = tables.find(j);
    if (it != tables.end()) return it->second;
    const auto t0 = Clock::now();
    auto t = estimate_theta(kRecip, j, unit_taus(1.0, kSteps), PayoffSpec::forward(),
                            full_mc(1000 + static_cast<std::uint64_t>(std::lround(j * 1000))));
    return tables.emplace(j, std::pair{std::move(t), seconds_since(t0)}).first->second;
  }
};

ThetaCache theta_cache;

Outcome investor_forward_pde() {
  Outcome o;
  const double j = 0.02, target = forward_recip_bessel_investor(1.0, 1.0);
  const auto& [theta, theta_s] = theta_cache.get(j);
  const auto v = pde_value(scheme::Fundraiser{j, theta}, kSquare, PayoffSpec::forward(), 1.0);
  const double rel = std::abs(v.value - target) / target;
  o.require(rel <= 0.01, fmt("PDE %.6f vs %.7f, rel err %.4f%%", v.value, target, 100 * rel));
  o.require(theta_s + v.seconds < 60.0, fmt("runtime %.1fs (MC boundary %.1fs, PDE %.1fs)",
                                            theta_s + v.seconds, theta_s, v.seconds));
  return o;
}

Outcome recip_fundraiser_mc() {
  Outcome o;
  const double cases[3][3] = {{1, 0.5, 1}, {1, 0.25, 1}, {2, 1, 0.5}};
  for (const auto& c : cases) {
    const auto t0 = Clock::now();
    const auto r = price_fundraiser_mc(kRecip, c[0], c[1], c[2], PayoffSpec::forward(), full_mc(7));
    const double secs = seconds_since(t0);
    const auto split = forward_recip_bessel_fundraiser_split(c[0], c[1], c[2]);
    const double z = (r.price.mean - split.total()) / r.price.std_error;
    o.require(std::abs(z) <= 3.0 && secs < 120.0,
              fmt("(%g,%g,%g) MC %.5f+-%.5f vs %.6f z=%.2f %.0fs", c[0], c[1], c[2], r.price.mean,
                  r.price.std_error, split.total(), z, secs));
  }
  return o;
}

Outcome bm_fundraiser_mc() {
  Outcome o;
  const auto id = power_law_map(1.0, 0.0);
  const auto r = price_fundraiser_mc(id, 1, 1, 1, PayoffSpec::forward(), full_mc(11));
  const double target = forward_bm_fundraiser(1, 1, 1);
  const double z = (r.price.mean - target) / r.price.std_error;
  o.require(std::abs(z) <= 3.0, fmt("MC %.5f+-%.5f vs %.7f z=%.2f", r.price.mean, r.price.std_error, target, z));
  McOptions dmc = full_mc(12);
  dmc.n_paths = 40000;
  dmc.steps = 1024;
  const auto d = fundraiser_delta_mc(id, 1, 1, 1, PayoffSpec::forward(), 0.05, dmc);
  o.require(std::abs(d.mean + 1.0) <= 0.1, fmt("delta %.4f+-%.4f vs -1", d.mean, d.std_error));
  return o;
}

Outcome bm_investor_bond() {
  Outcome o;
  const auto r = price_investor_mc(power_law_map(1.0, 0.0), 1, 1, PayoffSpec::bond(), full_mc(13));
  const double target = bond_bm(1, 1);
  const double z = (r.mean - target) / r.std_error;
  o.require(std::abs(z) <= 3.0, fmt("MC %.5f+-%.5f vs %.7f z=%.2f", r.mean, r.std_error, target, z));
  o.require(r.mean + 3 * r.std_error < 1.0, "bond below 1");
  return o;
}

Outcome bubble_detector() {
  Outcome o;
  o.require(is_strict_local_martingale(kSquare), "sigma=y^2 strict");
  o.require(!is_strict_local_martingale(SigmaSpec::power(1.0, 1.0)), "sigma=y true martingale");
  GridPolicy pol;
  pol.intervals = kIntervals;
  pol.steps = kSteps;
  const double n = 50.0;
  const SchemeKind naive = scheme::NaiveCap{n};
  const auto sol = solve(kSquare, PayoffSpec::forward(), 1.0, naive, grid_for(naive, kSquare, pol),
                         TimeGrid::uniform(1.0, kSteps));
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.grid.size(); ++i) worst = std::max(worst, std::abs(sol.values.front()[i] - sol.grid[i]));
  o.require(worst < 1e-9, fmt("naive cap max|v-y| %.2e", worst));
  const auto& [theta, s] = theta_cache.get(0.02);
  const auto fr = pde_value(scheme::Fundraiser{0.02, theta}, kSquare, PayoffSpec::forward(), 1.0);
  o.require(fr.value < 1.0 - 0.05, fmt("fundraiser v(0,1) %.5f", fr.value));
  return o;
}

Outcome ordering_suite() {
  Outcome o;
  const double oracle = forward_recip_bessel_investor(1.0, 1.0);
  const std::vector<double> js = {0.4, 0.2, 0.1, 0.05, 0.02};
  std::vector<PdeAt> fr;
  for (double j : js) {
    const auto& [theta, s] = theta_cache.get(j);
    fr.push_back(pde_value(scheme::Fundraiser{j, theta}, kSquare, PayoffSpec::forward(), 1.0));
    const auto sy = pde_value(scheme::TaperedTerminal{1.0 / j}, kSquare, PayoffSpec::forward(), 1.0);
    const auto& f = fr.back();
    o.require(sy.value <= f.value && f.value <= oracle + 3 * f.std_error,
              fmt("j=%g taper %.5f <= fundraiser %.5f+-%.5f <= %.5f", j, sy.value, f.value, f.std_error, oracle));
  }
  for (std::size_t k = 1; k < fr.size(); ++k) {
    const double se = joint_se(fr[k].std_error, fr[k - 1].std_error);
    o.require(fr[k].value >= fr[k - 1].value - 2 * se,
              fmt("step %g->%g %+.5f (2se %.5f)", js[k - 1], js[k], fr[k].value - fr[k - 1].value, 2 * se));
  }
  return o;
}

bool close_rel(double a, double b, double rel = 1e-7, double abs_floor = 1e-10) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

Outcome schwarzian_suite() {
  Outcome o;
  std::mt19937_64 rng(777);
  auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto alpha = [&] {
    double a = 0.0;
    while (std::abs(a) < 0.1 || std::abs(std::abs(a) - 1.0) < 0.05) a = u(-3, 3);
    return a;
  };
  auto point = [&](double lo) { return lo + std::exp(u(-1.5, 1.5)); };
  auto mobius = [&] {
    const double c = u(0.5, 2), d = u(0.2, 2), a = u(-1, 1);
    return MobiusCoeffs{a, a * d / c + u(0.5, 2), c, d};
  };
  std::map<std::string, int> bad;
  auto check = [&](const std::string& id, bool ok) { bad[id] += ok ? 0 : 1; };
  for (int k = 0; k < 100; ++k) {
    const double x = point(0.0);
    const auto f = power_law_map(alpha(), 0.0);
    const auto g = power_law_map(alpha(), u(-1, 0));
    const auto gf = compose(g, f);
    check("T1", pre_schwarzian(affine_map(u(0.5, 3), u(-2, 2)), u(-10, 10)) == 0.0);
    check("T2", close_rel(pre_schwarzian(gf, x), pre_schwarzian(g, f(x)) * f.d1(x) + pre_schwarzian(f, x)));
    const auto A = affine_map(u(0.5, 3) * (k % 2 ? 1 : -1), u(-1, 1));
    check("T3", close_rel(pre_schwarzian(compose(A, f), x), pre_schwarzian(f, x)));
    const auto h = compose(A, gf);
    const double y = point(0.0);
    check("T4", close_rel(pre_schwarzian(h, x), pre_schwarzian(gf, x)) &&
                    close_rel(h.d1(x) / gf.d1(x), h.d1(y) / gf.d1(y)));
    check("T5", close_rel(pre_schwarzian(compose(reciprocal_map(), g), x),
                          pre_schwarzian(g, x) - 2 * g.d1(x) / g(x)));
    const auto c = mobius();
    const auto m = mobius_map(c);
    const double z = point(-c.d / c.c);
    check("S1", std::abs(schwarzian(m, z)) <= 1e-9 * (1 + 1 / (z * z)));
    const double d = f.d1(x);
    check("S2", close_rel(schwarzian(gf, x), schwarzian(g, f(x)) * d * d + schwarzian(f, x)));
    check("S3", close_rel(schwarzian(compose(m, f), x), schwarzian(f, x)));
  }
  for (const auto& [id, n] : bad) o.require(n == 0, fmt("%s %d/100 off", id.c_str(), n));

  const auto grid = TimeGrid::uniform(1.0, 1024);
  const MobiusCoeffs mc{2, 3, 1, 1};
  const auto fmob = power_law_map(-1.5, 0.0), gsq = power_law_map(0.5, 0.0);
  const auto fg = compose(fmob, gsq);
  double mob_err = 0.0, comp_err = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto p = simulate_wiener(2.0, grid, 31, i);
    const auto s = schwarzian_process(mobius_map(mc), p);
    for (std::size_t n = 0; n < s.values.size(); ++n) {
      const double want = (mc.c * p.x[n] + mc.d) / (mc.c * p.x[0] + mc.d);
      mob_err = std::max(mob_err, std::abs(s.values[n] - want) / want);
    }
    const auto lhs = schwarzian_process(fg, p);
    const std::size_t n = lhs.values.size();
    std::vector<double> gx(n), rate(n);
    for (std::size_t k = 0; k < n; ++k) {
      gx[k] = gsq(p.x[k]);
      rate[k] = gsq.d1(p.x[k]) * gsq.d1(p.x[k]);
    }
    const auto times = std::span(p.grid.nodes()).first(n);
    const auto sg = schwarzian_process(gsq, times, std::span<const double>(p.x).first(n));
    const auto sf = schwarzian_process(fmob, times, gx, rate);
    for (std::size_t k = 0; k < n; ++k) {
      const double rhs = sf.values[k] * sg.values[k];
      comp_err = std::max(comp_err, std::abs(lhs.values[k] - rhs) / rhs);
    }
  }
  o.require(mob_err < 1e-9, fmt("Mobius pathwise max rel %.1e", mob_err));
  o.require(comp_err < 1e-9, fmt("composition max rel %.1e", comp_err));
  return o;
}

Outcome dual_construction_suite() {
  Outcome o;
  const auto grid = TimeGrid::uniform(1.0, kSteps);
  const double slack = 2 * std::sqrt(grid.dt(1));
  std::size_t violations = 0, checked = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto p = simulate_bessel3_dual(1.0, 0.5, grid, 41, i);
    const auto inf = future_infimum(p);
    for (std::size_t n = 0; n < p.x.size(); ++n, ++checked) {
      const bool ok = p.x[n] >= p.jstar[n] && (n == 0 || p.jstar[n] >= p.jstar[n - 1]) &&
                      inf[n] >= p.jstar[n] - slack;
      violations += ok ? 0 : 1;
    }
  }
  o.require(violations == 0, fmt("%zu violations over %zu nodes", violations, checked));
  const auto mgrid = TimeGrid::uniform(1.0, 1024);
  for (int k : {1, 2}) {
    auto moment = [&](const std::function<PathBundle(std::size_t)>& sim) {
      return summarize(run_paths(20000, [&](std::size_t i) { return std::pow(sim(i).x.back(), k); }));
    };
    const auto a = moment([&](std::size_t i) { return simulate_bessel3(1.0, mgrid, 42, i); });
    const auto b = moment([&](std::size_t i) { return simulate_drifted(reciprocal_map(), 1.0, mgrid, 43, i); });
    const double z = (a.mean - b.mean) / joint_se(a.std_error, b.std_error);
    o.require(std::abs(z) <= 3.0, fmt("E[X^%d] dual %.4f drifted %.4f z=%.2f", k, a.mean, b.mean, z));
  }
  return o;
}

Outcome bond_invariance() {
  Outcome o;
  const double j = 0.5;
  struct Model {
    const char* name;
    SmoothMap f;
    SigmaSpec sigma;
    double far;
  };
  const Model models[] = {{"recip", kRecip, kSquare, 0.0}, {"bm", power_law_map(1.0, 0.0), SigmaSpec::from_map(power_law_map(1.0, 0.0)), 8.0}};
  for (const auto& m : models) {
    McOptions mc = full_mc(51);
    mc.n_paths = 20000;
    const auto r = price_fundraiser_mc(m.f, 1.0, j, 1.0, PayoffSpec::bond(), mc);
    o.require(std::abs(r.price.mean - 1.0) <= std::max(3 * r.price.std_error, 1e-6),
              fmt("%s MC %.9f", m.name, r.price.mean));
    mc.n_paths = 2000;
    const auto theta = estimate_theta(m.f, j, unit_taus(1.0, kSteps), PayoffSpec::bond(), mc);
    const auto v = pde_value(scheme::Fundraiser{j, theta, m.far}, m.sigma, PayoffSpec::bond(), m.f(1.0));
    o.require(std::abs(v.value - 1.0) <= std::max(3 * v.std_error, 1e-6), fmt("%s PDE %.9f", m.name, v.value));
    const auto oracle = model_oracle(m.f, PayoffSpec::bond(), 1.0, j, 1.0);
    o.require(oracle && std::abs(*oracle->fundraiser - 1.0) <= 1e-6,
              fmt("%s oracle %.9f", m.name, oracle ? *oracle->fundraiser : NAN));
  }
  return o;
}

}  // namespace

// Optional arguments select criteria by number; default is all of them.
int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"investor forward by the fundraiser PDE (sigma=y^2, j=0.02)", investor_forward_pde},
      {"reciprocal-Bessel fundraiser forward by MC", recip_fundraiser_mc},
      {"Brownian fundraiser forward and delta by MC", bm_fundraiser_mc},
      {"Brownian investor bond by MC", bm_investor_bond},
      {"bubble detector and non-uniqueness", bubble_detector},
      {"scheme ordering and floor sequence", ordering_suite},
      {"Schwarzian identities and process laws", schwarzian_suite},
      {"dual Bessel-3 construction and cross-simulator moments", dual_construction_suite},
      {"zero-coupon invariance", bond_invariance},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const auto k = std::strtoul(argv[a], nullptr, 10);
    if (k >= 1 && k <= criteria.size()) selected[k - 1] = true;
  }
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected[k]) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failed += out.pass ? 0 : 1;
    std::printf("%s %zu: %s (%.1fs) | %s\n", out.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                seconds_since(t0), out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
