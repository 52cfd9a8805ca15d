#include "bubblekit/pdesolve.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include "bubblekit/errors.hpp"
#include "bubblekit/io.hpp"
#include "json.hpp"

namespace bubblekit {

namespace {

double gk(const std::function<double(double)>& fn, double a, double b, double* err = nullptr) {
  double e = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fn, a, b, 20, 1e-13, &e);
  if (err) *err = e;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// σ and f

SigmaSpec SigmaSpec::power(double c, double p) {
  if (!(c > 0.0) || !std::isfinite(c) || !std::isfinite(p))
    throw ConfigError("sigma power: need c > 0 and finite p");
  SigmaSpec s;
  s.descriptor_ = "power{c=" + format_double(c) + ",p=" + format_double(p) + "}";
  s.sigma_ = [c, p](double y) { return c * std::pow(y, p); };
  s.d1_ = [c, p](double y) { return c * p * std::pow(y, p - 1.0); };
  s.d2_ = [c, p](double y) { return c * p * (p - 1.0) * std::pow(y, p - 2.0); };
  s.power_ = std::pair{c, p};
  return s;
}

SigmaSpec SigmaSpec::custom(std::string descriptor, Fn sigma, Fn d1, Fn d2) {
  if (!sigma) throw ConfigError("sigma custom: missing evaluator");
  SigmaSpec s;
  s.descriptor_ = "custom{" + descriptor + "}";
  s.sigma_ = std::move(sigma);
  s.d1_ = std::move(d1);
  s.d2_ = std::move(d2);
  return s;
}

SigmaSpec SigmaSpec::from_map(const SmoothMap& f) {
  auto src = std::make_shared<const SmoothMap>(f);
  const double sign = f.sign();
  SigmaSpec s;
  s.descriptor_ = "from_map{" + f.descriptor() + "}";
  s.sigma_ = [src, sign](double y) { return sign * src->d1(src->inverse(y)); };
  // dσ/dy = sign T_f(x), d²σ/dy² = sign T_f'(x) / f'(x) with T_f' = S_f + T_f²/2.
  s.d1_ = [src, sign](double y) { return sign * src->pre_schwarzian_at(src->inverse(y)); };
  s.d2_ = [src, sign](double y) {
    const double x = src->inverse(y);
    const double t = src->pre_schwarzian_at(x);
    return sign * (src->schwarzian_at(x) + 0.5 * t * t) / src->d1(x);
  };
  s.source_ = std::move(src);
  return s;
}

double SigmaSpec::d1(double y) const {
  if (d1_) return d1_(y);
  const double h = 1e-5 * (1.0 + std::abs(y));
  return (sigma_(y + h) - sigma_(y - h)) / (2.0 * h);
}

double SigmaSpec::d2(double y) const {
  if (d2_) return d2_(y);
  const double h = 1e-4 * (1.0 + std::abs(y));
  return (sigma_(y + h) - 2.0 * sigma_(y) + sigma_(y - h)) / (h * h);
}

std::optional<double> tail_integral(const std::function<double(double)>& fn, double a) {
  if (!(a > 0.0)) throw ConfigError("tail_integral: start must be positive");
  constexpr int kWindow = 6;
  // Beyond 2^200 a the integrand evaluation itself starts to overflow.
  constexpr int kMaxDoublings = 200;
  constexpr double kMaxRatio = 1.0 - 1e-3;
  double sum = 0.0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  std::deque<double> ratios;
  for (int k = 0; k < kMaxDoublings; ++k) {
    const double lo = std::ldexp(a, k);
    const double hi = std::ldexp(a, k + 1);
    const double piece = gk(fn, lo, hi);
    if (!std::isfinite(piece) || piece < 0.0) return std::nullopt;
    sum += piece;
    if (piece == 0.0 || piece <= 1e-17 * sum) return sum;
    if (k > 0) {
      ratios.push_back(piece / prev);
      if (ratios.size() > kWindow) ratios.pop_front();
      if (ratios.size() == kWindow) {
        const auto [mn, mx] = std::minmax_element(ratios.begin(), ratios.end());
        if (*mx < kMaxRatio && *mx - *mn <= 1e-3 * *mx) {
          const double r = ratios.back();
          return sum + piece * r / (1.0 - r);
        }
      }
    }
    prev = piece;
  }
  return std::nullopt;
}

SmoothMap f_from_sigma(const SigmaSpec& sigma) {
  if (sigma.source_map()) return *sigma.source_map();
  if (!sigma.is_power()) return f_from_sigma_numeric(sigma);
  const auto [c, p] = sigma.power_params();
  if (!(p > 1.0)) {
    throw ConfigError("f_from_sigma: integral of 1/sigma diverges at infinity for " +
                      sigma.descriptor() + " (need p > 1)");
  }
  // ∫_y^∞ dz/(c z^p) = y^{1-p}/(c(p-1)), so f(x) = k x^α.
  const double alpha = -1.0 / (p - 1.0);
  const double k = std::pow(c * (p - 1.0), alpha);
  SmoothMap base = power_law_map(alpha, 0.0);
  if (k == 1.0) return base;
  return compose(affine_map(k, 0.0), base);
}

SmoothMap f_from_sigma_numeric(const SigmaSpec& sigma) {
  auto inv = [sigma](double z) {
    const double s = sigma(z);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ConfigError("f_from_sigma: sigma(" + format_double(z) + ") = " + format_double(s) +
                        " is not positive");
    }
    return 1.0 / s;
  };
  const auto tail = tail_integral(inv, 1.0);
  if (!tail) {
    throw ConfigError("f_from_sigma: integral of 1/sigma diverges at infinity for " +
                      sigma.descriptor());
  }
  // ∫_0^1 dz/σ(z) = ∫_1^∞ du / (u² σ(1/u)); infinite head means f^{-1}(0+) = ∞.
  const auto head = tail_integral([&](double u) { return inv(1.0 / u) / (u * u); }, 1.0);
  const double x_max = head ? *tail + *head : kInf;
  const double f1 = *tail;

  // F(y) = f^{-1}(y).
  auto F = [inv, f1](double y) {
    if (y == 1.0) return f1;
    return y < 1.0 ? f1 + gk(inv, y, 1.0) : f1 - gk(inv, 1.0, y);
  };
  auto f = [F, x_max](double x) {
    if (!(x > 0.0) || !(x < x_max)) return std::numeric_limits<double>::quiet_NaN();
    // Bracket log y, then TOMS 748.
    auto g = [&](double u) { return F(std::exp(u)) - x; };
    double lo = -1.0, hi = 1.0;
    while (g(lo) < 0.0) {
      lo *= 2.0;
      if (lo < -700.0) return 0.0;
    }
    while (g(hi) > 0.0) {
      hi *= 2.0;
      if (hi > 700.0) return kInf;
    }
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        g, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    return std::exp(0.5 * (r.first + r.second));
  };

  SmoothMap::Parts parts;
  parts.descriptor = "f_from_sigma{" + sigma.descriptor() + "}";
  parts.domain = {0.0, x_max};
  parts.range = {0.0, kInf};
  parts.sign = -1;
  parts.eval = f;
  parts.d1 = [f, sigma](double x) { return -sigma(f(x)); };
  parts.d2 = [f, sigma](double x) {
    const double y = f(x);
    return sigma.d1(y) * sigma(y);
  };
  parts.d3 = [f, sigma](double x) {
    const double y = f(x);
    const double s = sigma(y), s1 = sigma.d1(y);
    return -s * (sigma.d2(y) * s + s1 * s1);
  };
  parts.inverse = F;
  return SmoothMap(std::move(parts));
}

bool is_strict_local_martingale(const SigmaSpec& sigma) {
  return tail_integral(
             [&](double y) {
               const double s = sigma(y);
               return y / (s * s);
             },
             1.0)
      .has_value();
}

// ---------------------------------------------------------------------------------------
// SpaceGrid

SpaceGrid::SpaceGrid(std::vector<double> nodes, Spacing spacing)
    : y_(std::move(nodes)), spacing_(spacing) {
  if (y_.size() < 4) throw ConfigError("SpaceGrid: need at least 3 intervals");
  for (std::size_t i = 1; i < y_.size(); ++i) {
    if (!(y_[i] > y_[i - 1]) || !std::isfinite(y_[i]))
      throw ConfigError("SpaceGrid: nodes must be finite and strictly increasing");
  }
}

SpaceGrid SpaceGrid::uniform(double lo, double hi, std::size_t intervals) {
  if (!(hi > lo)) throw ConfigError("SpaceGrid: need hi > lo");
  std::vector<double> y(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i)
    y[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(intervals);
  y.back() = hi;
  return SpaceGrid(std::move(y), Spacing::Uniform);
}

SpaceGrid SpaceGrid::geometric(double lo, double hi, std::size_t intervals, double beta) {
  if (!(hi > lo)) throw ConfigError("SpaceGrid: need hi > lo");
  if (!(beta > 0.0)) throw ConfigError("SpaceGrid: stretch beta must be positive");
  std::vector<double> y(intervals + 1);
  const double denom = std::expm1(beta);
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(intervals);
    y[i] = lo + (hi - lo) * std::expm1(beta * u) / denom;
  }
  y.front() = lo;
  y.back() = hi;
  return SpaceGrid(std::move(y), Spacing::Geometric);
}

SpaceGrid SpaceGrid::make(Spacing spacing, double lo, double hi, std::size_t intervals) {
  return spacing == Spacing::Uniform ? uniform(lo, hi, intervals) : geometric(lo, hi, intervals);
}

SpaceGrid SpaceGrid::snapped(std::span<const double> points) const {
  std::vector<double> y = y_;
  for (double p : points) {
    if (!(p > y.front() && p < y.back())) continue;
    auto it = std::lower_bound(y.begin(), y.end(), p);
    std::size_t k = static_cast<std::size_t>(it - y.begin());
    if (k > 0 && (k == y.size() - 1 || p - y[k - 1] < y[k] - p)) --k;
    if (k == 0) k = 1;
    if (k == y.size() - 1) k = y.size() - 2;
    y[k] = p;
    if (!(y[k] > y[k - 1] && y[k] < y[k + 1]))
      throw ConfigError("SpaceGrid: cannot snap " + format_double(p) + " without reordering");
  }
  return SpaceGrid(std::move(y), spacing_);
}

std::optional<std::size_t> SpaceGrid::find(double y) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(y));
  auto it = std::lower_bound(y_.begin(), y_.end(), y - tol);
  if (it != y_.end() && std::abs(*it - y) <= tol) return static_cast<std::size_t>(it - y_.begin());
  return std::nullopt;
}

std::string_view spacing_name(SpaceGrid::Spacing s) {
  return s == SpaceGrid::Spacing::Uniform ? "uniform" : "geometric";
}

SpaceGrid::Spacing parse_spacing(std::string_view name) {
  if (name == "uniform") return SpaceGrid::Spacing::Uniform;
  if (name == "geometric") return SpaceGrid::Spacing::Geometric;
  throw ConfigError("unknown grid spacing '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------------------
// Schemes

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double taper(const PayoffSpec& h, double n, double y) {
  if (y <= 0.5 * n) return h(y);
  const double edge = h(0.5 * n);
  return std::max(0.0, edge * (n - y) / (0.5 * n));
}

}  // namespace

std::string scheme_name(const SchemeKind& s) {
  return std::visit(overloaded{
                        [](const scheme::Fundraiser&) { return std::string("fundraiser"); },
                        [](const scheme::NeumannCap&) { return std::string("neumann_cap"); },
                        [](const scheme::TaperedTerminal&) { return std::string("tapered_terminal"); },
                        [](const scheme::TransformedCauchy&) { return std::string("transformed_cauchy"); },
                        [](const scheme::NaiveCap&) { return std::string("naive_cap"); },
                    },
                    s);
}

std::string scheme_descriptor(const SchemeKind& s) {
  return std::visit(overloaded{
                        [](const scheme::Fundraiser& k) {
                          return "fundraiser{j=" + format_double(k.j) +
                                 ",theta=" + hex64(k.theta.content_hash()) + "}";
                        },
                        [&](const auto& k) {
                          return scheme_name(s) + "{n=" + format_double(k.n) + "}";
                        },
                    },
                    s);
}

Interval scheme_domain(const SchemeKind& s, const SigmaSpec& sigma) {
  return std::visit(overloaded{
                        [&](const scheme::Fundraiser& k) {
                          const SmoothMap f = f_from_sigma(sigma);
                          f.require_in_domain(k.j);
                          if (f.sign() < 0) return Interval{0.0, f(k.j)};
                          if (!(k.far > 0.0))
                            throw ConfigError(
                                "fundraiser scheme: an increasing price map needs a far edge "
                                "(far > 0)");
                          f.require_in_domain(k.j + k.far);
                          return Interval{f(k.j), f(k.j + k.far)};
                        },
                        [](const auto& k) { return Interval{0.0, k.n}; },
                    },
                    s);
}

std::vector<double> terminal_datum(const SchemeKind& s, const PayoffSpec& payoff,
                                   const SpaceGrid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double y = grid[i];
    if (const auto* t = std::get_if<scheme::TaperedTerminal>(&s)) {
      v[i] = taper(payoff, t->n, y);
    } else if (std::holds_alternative<scheme::TransformedCauchy>(s)) {
      v[i] = y > 0.0 ? payoff(y) : 0.0;
    } else {
      v[i] = payoff(y);
    }
  }
  return v;
}

double PdeSolution::initial_value(double y) const {
  const auto& ys = grid.nodes();
  if (!(y >= ys.front() && y <= ys.back()))
    throw DomainError("initial_value: y = " + format_double(y) + " outside the grid");
  if (auto k = grid.find(y)) return values.front()[*k];
  const std::size_t k = static_cast<std::size_t>(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin());
  const double w = (y - ys[k - 1]) / (ys[k] - ys[k - 1]);
  return values.front()[k - 1] + w * (values.front()[k] - values.front()[k - 1]);
}

double PdeSolution::initial_stderr(double y) const {
  const auto& ys = grid.nodes();
  if (!(y >= ys.front() && y <= ys.back()))
    throw DomainError("initial_stderr: y = " + format_double(y) + " outside the grid");
  if (auto k = grid.find(y)) return boundary_stderr[*k];
  const std::size_t k = static_cast<std::size_t>(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin());
  const double w = (y - ys[k - 1]) / (ys[k] - ys[k - 1]);
  return boundary_stderr[k - 1] + w * (boundary_stderr[k] - boundary_stderr[k - 1]);
}

namespace {

// Thomas algorithm for a_i x_{i-1} + b_i x_i + c_i x_{i+1} = r_i.
void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& c, std::vector<double>& r,
                       std::vector<double>& scratch) {
  const std::size_t n = b.size();
  scratch.resize(n);
  double beta = b[0];
  r[0] /= beta;
  for (std::size_t i = 1; i < n; ++i) {
    scratch[i] = c[i - 1] / beta;
    beta = b[i] - a[i] * scratch[i];
    r[i] = (r[i] - a[i] * r[i - 1]) / beta;
  }
  for (std::size_t i = n - 1; i-- > 0;) r[i] -= scratch[i + 1] * r[i + 1];
}

enum class UpperRow { Dirichlet, Neumann };

}  // namespace

PdeSolution solve(const SigmaSpec& sigma, const PayoffSpec& payoff, double T,
                  const SchemeKind& scheme, const SpaceGrid& grid, const TimeGrid& times,
                  double theta_weight) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("solve: T must be positive");
  if (std::abs(times.horizon() - T) > 1e-12 * T)
    throw ConfigError("solve: time grid ends at " + format_double(times.horizon()) +
                      ", not at T = " + format_double(T));
  if (!(theta_weight >= 0.0 && theta_weight <= 1.0))
    throw ConfigError("solve: theta_weight must lie in [0, 1]");
  if (grid.lo() < 0.0) throw ConfigError("solve: grid must lie in [0, inf)");
  const Interval domain = scheme_domain(scheme, sigma);
  const double cap = domain.hi;
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  if (!close(grid.hi(), domain.hi) || !close(grid.lo(), domain.lo)) {
    throw ConfigError("solve: grid/scheme mismatch: grid spans [" + format_double(grid.lo()) +
                      ", " + format_double(grid.hi()) + "] but the " + scheme_name(scheme) +
                      " domain is [" + format_double(domain.lo) + ", " + format_double(domain.hi) +
                      "]");
  }

  const bool transformed = std::holds_alternative<scheme::TransformedCauchy>(scheme);
  const auto* fundraiser = std::get_if<scheme::Fundraiser>(&scheme);
  std::optional<ThetaCurve> curve;
  if (fundraiser) {
    const auto& tab = fundraiser->theta;
    tab.validate();
    if (tab.j != fundraiser->j)
      throw ConfigError("solve: ThetaTable is for j = " + format_double(tab.j) +
                        ", scheme has j = " + format_double(fundraiser->j));
    if (tab.horizon() < T * (1.0 - 1e-12))
      throw ConfigError("solve: ThetaTable covers tau in [0, " + format_double(tab.horizon()) +
                        "] but T = " + format_double(T));
    const std::string fdesc = f_from_sigma(sigma).descriptor();
    if (tab.map_descriptor != fdesc)
      throw ConfigError("solve: ThetaTable was estimated for " + tab.map_descriptor + ", not " +
                        fdesc);
    if (tab.payoff_descriptor != payoff.descriptor())
      throw ConfigError("solve: ThetaTable was estimated for payoff " + tab.payoff_descriptor +
                        ", not " + payoff.descriptor());
    curve.emplace(tab);
  }
  // An increasing fundraiser map puts the floor at the bottom of the domain.
  const bool floor_below = fundraiser && f_from_sigma(sigma).sign() > 0;

  const std::size_t M = grid.intervals();
  const std::size_t size = M + 1;
  const UpperRow upper_row =
      std::holds_alternative<scheme::NeumannCap>(scheme) ? UpperRow::Neumann : UpperRow::Dirichlet;

  // Spatial operator rows: (L v)_i = lo_i v_{i-1} - (lo_i + up_i) v_i + up_i v_{i+1}.
  std::vector<double> lo(size, 0.0), up(size, 0.0);
  for (std::size_t i = 1; i < M; ++i) {
    const double y = grid[i];
    const double hm = y - grid[i - 1];
    const double hp = grid[i + 1] - y;
    const double s = sigma(y);
    const double s2 = s * s;
    if (!(s > 0.0) || !std::isfinite(s))
      throw NumericError("solve: sigma(" + format_double(y) + ") = " + format_double(s) +
                         " is not positive at node " + std::to_string(i));
    lo[i] = s2 / (hm * (hm + hp));
    up[i] = s2 / (hp * (hm + hp));
    if (transformed) {
      const double b = s2 / y;
      const double cl = lo[i] - b * hp / (hm * (hm + hp));
      const double cu = up[i] + b * hm / (hp * (hm + hp));
      if (cl >= 0.0) {
        lo[i] = cl;
        up[i] = cu;
      } else {
        up[i] += b / hp;
      }
    }
  }
  if (upper_row == UpperRow::Neumann) {
    const double h = grid[M] - grid[M - 1];
    const double s = sigma(grid[M]);
    lo[M] = s * s / (h * h);
  }
  for (std::size_t i = 1; i < size; ++i) {
    if (lo[i] < 0.0 || up[i] < 0.0 || !std::isfinite(lo[i]) || !std::isfinite(up[i])) {
      throw NumericError("solve: non-monotone discretization at node " + std::to_string(i) +
                         " (y = " + format_double(grid[i]) + ")");
    }
  }
  // Weights below 1/2 are only conditionally stable: dt (lo + up)(1 - 2θ) <= 1.
  if (theta_weight < 0.5) {
    for (std::size_t n = 1; n <= times.steps(); ++n) {
      const double dt = times.dt(n);
      for (std::size_t i = 1; i < size; ++i) {
        if (dt * (lo[i] + up[i]) * (1.0 - 2.0 * theta_weight) > 1.0) {
          throw NumericError("solve: time step unstable for theta_weight " +
                             format_double(theta_weight) + " at node " + std::to_string(i) +
                             " (y = " + format_double(grid[i]) +
                             "); reduce dt or raise theta_weight");
        }
      }
    }
  }

  // Terminal data in solver units (w for the transformed problem).
  std::vector<double> v = terminal_datum(scheme, payoff, grid);
  if (transformed) {
    for (std::size_t i = 0; i < size; ++i) v[i] = grid[i] > 0.0 ? payoff(grid[i]) / grid[i] : 0.0;
  }

  auto lower_value = [&](double t) {
    if (floor_below) return (*curve)(T - t);
    return transformed ? 0.0 : payoff(0.0);
  };
  auto upper_value = [&](double t) -> double {
    return std::visit(overloaded{
                          [&](const scheme::Fundraiser&) {
                            return floor_below ? payoff(cap) : (*curve)(T - t);
                          },
                          [&](const scheme::NaiveCap&) { return payoff(cap); },
                          [](const auto&) { return 0.0; },
                      },
                      scheme);
  };

  PdeSolution out{grid, times, {}, scheme, theta_weight, sigma.descriptor(), payoff.descriptor(),
                  std::vector<double>(size, 0.0), 0.0};
  {
    const std::vector<double> datum = terminal_datum(scheme, payoff, grid);
    if (upper_row == UpperRow::Neumann) {
      out.corner_defect = std::abs((datum[M] - datum[M - 1]) / (grid[M] - grid[M - 1]));
    } else if (transformed) {
      out.corner_defect = std::abs(v[M] - upper_value(T));
    } else if (floor_below) {
      out.corner_defect = std::abs(datum[0] - lower_value(T));
    } else {
      out.corner_defect = std::abs(datum[M] - upper_value(T));
    }
  }
  out.values.assign(times.size(), {});
  auto store = [&](std::size_t n, const std::vector<double>& w) {
    auto& row = out.values[n];
    row = w;
    if (transformed)
      for (std::size_t i = 0; i < size; ++i) row[i] = grid[i] * w[i];
  };
  store(times.steps(), v);

  std::vector<double> a(size), b(size), c(size), rhs(size), scratch;
  std::vector<double> err(size, 0.0), err_rhs(size);
  auto explicit_part = [&](const std::vector<double>& u, std::vector<double>& r, double dt) {
    for (std::size_t i = 1; i < size; ++i) {
      const double left = lo[i] * u[i - 1];
      const double right = i < M ? up[i] * u[i + 1] : 0.0;
      r[i] = u[i] + (1.0 - theta_weight) * dt * (left - (lo[i] + up[i]) * u[i] + right);
    }
  };
  for (std::size_t n = times.steps(); n-- > 0;) {
    const double dt = times.dt(n + 1);
    const double t = times[n];
    for (std::size_t i = 1; i < size; ++i) {
      a[i] = -theta_weight * dt * lo[i];
      b[i] = 1.0 + theta_weight * dt * (lo[i] + up[i]);
      c[i] = i < M ? -theta_weight * dt * up[i] : 0.0;
    }
    a[0] = 0.0;
    b[0] = 1.0;
    c[0] = 0.0;
    explicit_part(v, rhs, dt);
    rhs[0] = lower_value(t);
    if (upper_row == UpperRow::Dirichlet) {
      a[M] = 0.0;
      b[M] = 1.0;
      rhs[M] = upper_value(t);
    }
    if (curve) {
      explicit_part(err, err_rhs, dt);
      err_rhs[0] = floor_below ? curve->std_error(T - t) : 0.0;
      err_rhs[M] = floor_below ? 0.0 : curve->std_error(T - t);
      solve_tridiagonal(a, b, c, err_rhs, scratch);
      err.swap(err_rhs);
    }
    solve_tridiagonal(a, b, c, rhs, scratch);
    v.swap(rhs);
    store(n, v);
  }
  if (curve) out.boundary_stderr = err;
  return out;
}

void write_solution(const PdeSolution& s, const std::filesystem::path& path) {
  std::string csv = "t";
  for (double y : s.grid.nodes()) csv += "," + format_double(y);
  csv += "\n";
  for (std::size_t n = 0; n < s.values.size(); ++n) {
    csv += format_double(s.times[n]);
    for (double v : s.values[n]) csv += "," + format_double(v);
    csv += "\n";
  }
  write_text(path, csv);
  nlohmann::ordered_json meta;
  meta["scheme"] = scheme_descriptor(s.scheme);
  meta["sigma"] = s.sigma_descriptor;
  meta["payoff"] = s.payoff_descriptor;
  meta["T"] = format_double(s.times.horizon());
  meta["theta_weight"] = format_double(s.theta_weight);
  meta["space_intervals"] = s.grid.intervals();
  meta["spacing"] = std::string(spacing_name(s.grid.spacing()));
  meta["time_steps"] = s.times.steps();
  meta["corner_defect"] = format_double(s.corner_defect);
  write_text(path.string() + ".meta.json", meta.dump(2) + "\n");
}

SpaceGrid grid_for(const SchemeKind& s, const SigmaSpec& sigma, const GridPolicy& policy) {
  const Interval d = scheme_domain(s, sigma);
  if (!(d.hi > d.lo) || !std::isfinite(d.hi) || d.lo < 0.0)
    throw ConfigError("grid_for: scheme domain must be a bounded interval in [0, inf)");
  return SpaceGrid::make(policy.spacing, d.lo, d.hi, policy.intervals).snapped(policy.snap);
}

std::string_view family_name(SchemeFamily f) {
  switch (f) {
    case SchemeFamily::Fundraiser: return "fundraiser";
    case SchemeFamily::NeumannCap: return "neumann_cap";
    case SchemeFamily::TaperedTerminal: return "tapered_terminal";
    case SchemeFamily::TransformedCauchy: return "transformed_cauchy";
    case SchemeFamily::NaiveCap: return "naive_cap";
  }
  return "?";
}

SchemeFamily parse_family(std::string_view name) {
  for (auto f : {SchemeFamily::Fundraiser, SchemeFamily::NeumannCap, SchemeFamily::TaperedTerminal,
                 SchemeFamily::TransformedCauchy, SchemeFamily::NaiveCap}) {
    if (family_name(f) == name) return f;
  }
  throw ConfigError("unknown scheme '" + std::string(name) +
                    "' (expected fundraiser, neumann_cap, tapered_terminal, "
                    "transformed_cauchy or naive_cap)");
}

std::vector<ConvergenceRow> convergence_study(const SigmaSpec& sigma, const PayoffSpec& payoff,
                                              double T, SchemeFamily family,
                                              std::span<const double> parameters, double y_ref,
                                              const GridPolicy& policy,
                                              const ThetaProvider& theta) {
  if (parameters.empty()) throw ConfigError("convergence_study: empty parameter sequence");
  const bool floors = family == SchemeFamily::Fundraiser;
  for (std::size_t i = 1; i < parameters.size(); ++i) {
    if (floors ? !(parameters[i] < parameters[i - 1]) : !(parameters[i] > parameters[i - 1])) {
      throw ConfigError(floors ? "convergence_study: floors j must be strictly decreasing"
                               : "convergence_study: caps n must be strictly increasing");
    }
  }
  if (floors && !theta) throw ConfigError("convergence_study: fundraiser needs a Theta provider");
  GridPolicy pol = policy;
  pol.snap.push_back(y_ref);
  const TimeGrid times = TimeGrid::uniform(T, pol.steps);
  std::vector<ConvergenceRow> rows;
  for (double p : parameters) {
    const auto start = std::chrono::steady_clock::now();
    SchemeKind s;
    switch (family) {
      case SchemeFamily::Fundraiser: s = scheme::Fundraiser{p, theta(p)}; break;
      case SchemeFamily::NeumannCap: s = scheme::NeumannCap{p}; break;
      case SchemeFamily::TaperedTerminal: s = scheme::TaperedTerminal{p}; break;
      case SchemeFamily::TransformedCauchy: s = scheme::TransformedCauchy{p}; break;
      case SchemeFamily::NaiveCap: s = scheme::NaiveCap{p}; break;
    }
    const SpaceGrid grid = grid_for(s, sigma, pol);
    if (!(y_ref >= grid.lo() && y_ref <= grid.hi()))
      throw ConfigError("convergence_study: reference y = " + format_double(y_ref) +
                        " outside the domain [0, " + format_double(grid.hi()) + "]");
    const PdeSolution sol = solve(sigma, payoff, T, s, grid, times, pol.theta_weight);
    ConvergenceRow row;
    row.parameter = p;
    row.value = sol.initial_value(y_ref);
    row.std_error = sol.initial_stderr(y_ref);
    row.difference =
        rows.empty() ? std::numeric_limits<double>::quiet_NaN() : row.value - rows.back().value;
    row.corner_defect = sol.corner_defect;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bubblekit
