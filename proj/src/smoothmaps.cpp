#include "bubblekit/smoothmaps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "bubblekit/errors.hpp"

namespace bubblekit {

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Image of the interval `in` under a monotone map, using endpoint limits.
Interval image_of(const SmoothMap& f, const Interval& in) {
  const double a = f.image(in.lo);
  const double b = f.image(in.hi);
  return f.sign() > 0 ? Interval{a, b} : Interval{b, a};
}

}  // namespace

SmoothMap::SmoothMap(Parts parts) : p_(std::move(parts)) {
  if (p_.domain.empty()) throw ConfigError("SmoothMap " + p_.descriptor + ": empty domain");
  if (p_.sign != 1 && p_.sign != -1)
    throw ConfigError("SmoothMap " + p_.descriptor + ": sign must be +1 or -1");
  if (!p_.eval || !p_.d1 || !p_.d2 || !p_.d3 || !p_.inverse)
    throw ConfigError("SmoothMap " + p_.descriptor + ": missing evaluator");
}

void SmoothMap::require_in_domain(double x) const {
  if (!in_domain(x)) {
    throw DomainError(p_.descriptor + ": x = " + fmt_num(x) + " outside domain (" +
                      fmt_num(p_.domain.lo) + ", " + fmt_num(p_.domain.hi) + ")");
  }
}

double SmoothMap::image(double x) const {
  if (x <= p_.domain.lo) return p_.sign > 0 ? p_.range.lo : p_.range.hi;
  if (x >= p_.domain.hi) return p_.sign > 0 ? p_.range.hi : p_.range.lo;
  return p_.eval(x);
}

double SmoothMap::preimage(double y) const {
  if (y <= p_.range.lo) return p_.sign > 0 ? p_.domain.lo : p_.domain.hi;
  if (y >= p_.range.hi) return p_.sign > 0 ? p_.domain.hi : p_.domain.lo;
  return p_.inverse(y);
}

SmoothMap power_law_map(double alpha, double xi) {
  if (!std::isfinite(alpha) || !std::isfinite(xi))
    throw ConfigError("power_law: alpha and xi must be finite");
  SmoothMap::Parts p;
  p.domain = {xi, kInf};
  if (alpha == 0.0) {
    p.descriptor = "log{xi=" + fmt_num(xi) + "}";
    p.range = {-kInf, kInf};
    p.sign = 1;
    p.eval = [xi](double x) { return std::log(x - xi); };
    p.d1 = [xi](double x) { return 1.0 / (x - xi); };
    p.d2 = [xi](double x) {
      const double u = x - xi;
      return -1.0 / (u * u);
    };
    p.d3 = [xi](double x) {
      const double u = x - xi;
      return 2.0 / (u * u * u);
    };
    p.inverse = [xi](double y) { return std::exp(y) + xi; };
    return SmoothMap(std::move(p));
  }
  p.descriptor = "power_law{alpha=" + fmt_num(alpha) + ",xi=" + fmt_num(xi) + "}";
  p.range = {0.0, kInf};
  p.sign = alpha > 0 ? 1 : -1;
  const double a = alpha;
  p.eval = [a, xi](double x) { return std::pow(x - xi, a); };
  p.d1 = [a, xi](double x) { return a * std::pow(x - xi, a - 1.0); };
  p.d2 = [a, xi](double x) { return a * (a - 1.0) * std::pow(x - xi, a - 2.0); };
  p.d3 = [a, xi](double x) { return a * (a - 1.0) * (a - 2.0) * std::pow(x - xi, a - 3.0); };
  p.inverse = [a, xi](double y) { return std::pow(y, 1.0 / a) + xi; };
  return SmoothMap(std::move(p));
}

SmoothMap log_map(double xi) { return power_law_map(0.0, xi); }

SmoothMap mobius_map(const MobiusCoeffs& m, PoleSide side) {
  const double det = m.determinant();
  if (det == 0.0 || !std::isfinite(det))
    throw ConfigError("mobius: ad - bc must be nonzero (got " + fmt_num(det) + ")");
  SmoothMap::Parts p;
  p.descriptor = "mobius{a=" + fmt_num(m.a) + ",b=" + fmt_num(m.b) + ",c=" + fmt_num(m.c) +
                 ",d=" + fmt_num(m.d) + (m.c != 0.0 && side == PoleSide::Left ? ",left" : "") + "}";
  p.sign = det > 0 ? 1 : -1;
  if (m.c == 0.0) {
    p.domain = {-kInf, kInf};
    p.range = {-kInf, kInf};
  } else {
    const double pole = -m.d / m.c;
    const double asym = m.a / m.c;
    if (side == PoleSide::Right) {
      p.domain = {pole, kInf};
      p.range = det > 0 ? Interval{-kInf, asym} : Interval{asym, kInf};
    } else {
      p.domain = {-kInf, pole};
      p.range = det > 0 ? Interval{asym, kInf} : Interval{-kInf, asym};
    }
  }
  const auto [a, b, c, d] = m;
  p.eval = [=](double x) { return (a * x + b) / (c * x + d); };
  p.d1 = [=](double x) {
    const double u = c * x + d;
    return det / (u * u);
  };
  p.d2 = [=](double x) {
    const double u = c * x + d;
    return -2.0 * c * det / (u * u * u);
  };
  p.d3 = [=](double x) {
    const double u = c * x + d;
    return 6.0 * c * c * det / (u * u * u * u);
  };
  p.inverse = [=](double y) { return (d * y - b) / (a - c * y); };
  return SmoothMap(std::move(p));
}

SmoothMap reciprocal_map() { return mobius_map({0.0, 1.0, 1.0, 0.0}); }

SmoothMap affine_map(double slope, double offset) {
  if (slope == 0.0) throw ConfigError("affine: slope must be nonzero");
  return mobius_map({slope, offset, 0.0, 1.0});
}

SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner) {
  // Composite domain: the part of inner's domain mapped into outer's domain.
  const Interval reach{std::max(inner.range().lo, outer.domain().lo),
                       std::min(inner.range().hi, outer.domain().hi)};
  if (reach.empty()) {
    throw ConfigError("compose(" + outer.descriptor() + ", " + inner.descriptor() +
                      "): range of inner does not meet domain of outer");
  }
  const double e0 = inner.preimage(reach.lo);
  const double e1 = inner.preimage(reach.hi);
  Interval domain = inner.sign() > 0 ? Interval{e0, e1} : Interval{e1, e0};
  domain.lo = std::max(domain.lo, inner.domain().lo);
  domain.hi = std::min(domain.hi, inner.domain().hi);
  if (domain.empty()) {
    throw ConfigError("compose(" + outer.descriptor() + ", " + inner.descriptor() +
                      "): empty composite domain");
  }

  // Spot checks at interior points.
  for (double s : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    double x;
    if (std::isfinite(domain.lo) && std::isfinite(domain.hi)) {
      x = domain.lo + s * (domain.hi - domain.lo);
    } else if (std::isfinite(domain.lo)) {
      x = domain.lo + s / (1.0 - s);
    } else if (std::isfinite(domain.hi)) {
      x = domain.hi - s / (1.0 - s);
    } else {
      x = std::tan(3.14159 * (s - 0.5));
    }
    const double u = inner(x);
    if (!outer.in_domain(u)) {
      throw ConfigError("compose(" + outer.descriptor() + ", " + inner.descriptor() +
                        "): inner(" + fmt_num(x) + ") = " + fmt_num(u) +
                        " outside the domain of outer");
    }
  }

  SmoothMap::Parts p;
  p.descriptor = "compose{outer=" + outer.descriptor() + ",inner=" + inner.descriptor() + "}";
  p.domain = domain;
  p.sign = outer.sign() * inner.sign();
  p.eval = [o = outer, i = inner](double x) { return o(i(x)); };
  p.d1 = [o = outer, i = inner](double x) { return o.d1(i(x)) * i.d1(x); };
  p.d2 = [o = outer, i = inner](double x) {
    const double u = i(x);
    const double g1 = i.d1(x);
    return o.d2(u) * g1 * g1 + o.d1(u) * i.d2(x);
  };
  p.d3 = [o = outer, i = inner](double x) {
    const double u = i(x);
    const double g1 = i.d1(x);
    const double g2 = i.d2(x);
    return o.d3(u) * g1 * g1 * g1 + 3.0 * o.d2(u) * g1 * g2 + o.d1(u) * i.d3(x);
  };
  p.inverse = [o = outer, i = inner](double y) { return i.inverse(o.inverse(y)); };
  // Range: image of the composite domain, via endpoint limits of each stage.
  const Interval inner_image = image_of(inner, domain);
  p.range = image_of(outer, inner_image);
  return SmoothMap(std::move(p));
}

SmoothMap shifted(const SmoothMap& f, double shift) { return compose(f, affine_map(1.0, shift)); }

double pre_schwarzian(const SmoothMap& f, double x) {
  f.require_in_domain(x);
  return f.pre_schwarzian_at(x);
}

double schwarzian(const SmoothMap& f, double x) {
  f.require_in_domain(x);
  return f.schwarzian_at(x);
}

double derivative_mismatch(const SmoothMap& f, double x) {
  f.require_in_domain(x);
  const double h = 1e-5 * (1.0 + std::abs(x));
  if (!f.in_domain(x - h) || !f.in_domain(x + h))
    throw DomainError(f.descriptor() + ": finite-difference stencil leaves the domain");
  auto rel = [](double analytic, double numeric) {
    return std::abs(analytic - numeric) / (1.0 + std::abs(analytic));
  };
  const double fd1 = (f(x + h) - f(x - h)) / (2 * h);
  const double fd2 = (f.d1(x + h) - f.d1(x - h)) / (2 * h);
  const double fd3 = (f.d2(x + h) - f.d2(x - h)) / (2 * h);
  return std::max({rel(f.d1(x), fd1), rel(f.d2(x), fd2), rel(f.d3(x), fd3)});
}

SchwarzianSeries schwarzian_process(const SmoothMap& f, std::span<const double> times,
                                    std::span<const double> values,
                                    std::span<const double> qv_rate) {
  if (times.size() != values.size())
    throw ConfigError("schwarzian_process: times and values differ in length");
  if (!qv_rate.empty() && qv_rate.size() != values.size())
    throw ConfigError("schwarzian_process: qv_rate length mismatch");
  SchwarzianSeries out;
  if (values.empty()) return out;
  if (!f.in_domain(values[0])) {
    out.exit_index = 0;
    return out;
  }
  out.values.reserve(values.size());
  out.values.push_back(1.0);
  const double d1_start = f.d1(values[0]);
  auto rate = [&](std::size_t i) { return qv_rate.empty() ? 1.0 : qv_rate[i]; };
  double prev_s = f.schwarzian_at(values[0]) * rate(0);
  double integral = 0.0;
  for (std::size_t n = 1; n < values.size(); ++n) {
    if (!f.in_domain(values[n])) {
      out.exit_index = n;
      break;
    }
    const double s = f.schwarzian_at(values[n]) * rate(n);
    integral += 0.5 * (prev_s + s) * (times[n] - times[n - 1]);
    prev_s = s;
    out.values.push_back(std::sqrt(d1_start / f.d1(values[n])) * std::exp(0.25 * integral));
  }
  return out;
}

SchwarzianSeries schwarzian_process(const SmoothMap& f, const PathBundle& path) {
  return schwarzian_process(f, path.grid.nodes().first(path.x.size()), path.x);
}

}  // namespace bubblekit
