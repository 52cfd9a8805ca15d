#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bubblekit/path_types.hpp"

namespace bubblekit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Open interval (lo, hi) in the extended reals.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double x) const { return x > lo && x < hi; }
  bool empty() const { return !(lo < hi); }
  bool operator==(const Interval&) const = default;
};

/// A strictly monotone C^3 map f : (lo, hi) -> range with analytic derivatives.
///
/// Instances are immutable; the evaluators are shared between copies. Member evaluators
/// do not check the domain (they sit in simulation inner loops); use the free functions
/// `pre_schwarzian` / `schwarzian` or `require_in_domain` for checked access.
class SmoothMap {
 public:
  using Fn = std::function<double(double)>;

  struct Parts {
    std::string descriptor;
    Interval domain;
    Interval range;
    int sign = 1;
    Fn eval, d1, d2, d3, inverse;
  };

  explicit SmoothMap(Parts parts);

  double operator()(double x) const { return p_.eval(x); }
  double d1(double x) const { return p_.d1(x); }
  double d2(double x) const { return p_.d2(x); }
  double d3(double x) const { return p_.d3(x); }
  double inverse(double y) const { return p_.inverse(y); }

  /// f''/f' without domain check.
  double pre_schwarzian_at(double x) const { return p_.d2(x) / p_.d1(x); }
  /// f'''/f' - 1.5 (f''/f')^2 without domain check.
  double schwarzian_at(double x) const {
    const double t = p_.d2(x) / p_.d1(x);
    return p_.d3(x) / p_.d1(x) - 1.5 * t * t;
  }

  const Interval& domain() const { return p_.domain; }
  const Interval& range() const { return p_.range; }
  int sign() const { return p_.sign; }
  const std::string& descriptor() const { return p_.descriptor; }

  bool in_domain(double x) const { return p_.domain.contains(x); }
  void require_in_domain(double x) const;

  /// Limit of f at a domain endpoint (range endpoint), or f(x) for interior x.
  double image(double x) const;
  /// Limit of f^{-1} at a range endpoint (domain endpoint), or f^{-1}(y) for interior y.
  double preimage(double y) const;

 private:
  Parts p_;
};

/// Möbius coefficients (a x + b) / (c x + d) with a d - b c != 0.
struct MobiusCoeffs {
  double a = 1, b = 0, c = 0, d = 1;
  double determinant() const { return a * d - b * c; }
};

enum class PoleSide { Right, Left };

/// f(x) = (x - xi)^alpha on (xi, inf); alpha == 0 gives log(x - xi).
SmoothMap power_law_map(double alpha, double xi = 0.0);
SmoothMap log_map(double xi = 0.0);
/// Möbius transform on the side of the pole -d/c given by `side` (whole line when c == 0).
SmoothMap mobius_map(const MobiusCoeffs& c, PoleSide side = PoleSide::Right);
SmoothMap reciprocal_map();
SmoothMap affine_map(double slope, double offset);
/// outer ∘ inner, derivatives by the chain rule to third order.
SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner);
/// x -> f(x + shift).
SmoothMap shifted(const SmoothMap& f, double shift);

/// T_f(x) = f''(x)/f'(x); throws DomainError outside the domain.
double pre_schwarzian(const SmoothMap& f, double x);
/// S_f(x) = T_f'(x) - T_f(x)^2 / 2; throws DomainError outside the domain.
double schwarzian(const SmoothMap& f, double x);

/// Largest relative mismatch between each analytic derivative and a central difference
/// of the next-lower one, at x. Step is 1e-5 (1 + |x|).
double derivative_mismatch(const SmoothMap& f, double x);
inline constexpr double kDerivativeTolerance = 1e-4;

struct SchwarzianSeries {
  std::vector<double> values;
  /// First node whose value lies outside the domain; the series stops before it.
  std::optional<std::size_t> exit_index;
  bool truncated() const { return exit_index.has_value(); }
};

/// Schwarzian process sqrt(f'(X_0)/f'(X_t)) exp(1/4 ∫ S_f(X_u) d<X,X>_u), trapezoidal in time.
///
/// `qv_rate` is d<X,X>/dt at each node; empty means unit quadratic variation, which is
/// the convention for every process simulated by this library.
SchwarzianSeries schwarzian_process(const SmoothMap& f, std::span<const double> times,
                                    std::span<const double> values,
                                    std::span<const double> qv_rate = {});
SchwarzianSeries schwarzian_process(const SmoothMap& f, const PathBundle& path);

}  // namespace bubblekit
