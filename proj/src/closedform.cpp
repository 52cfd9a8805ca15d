#include "bubblekit/closedform.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "bubblekit/errors.hpp"

namespace bubblekit {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

Quadrature integrate(const std::function<double(double)>& fn, double a, double b,
                     double abs_tol) {
  using boost::math::quadrature::gauss_kronrod;
  Quadrature q;
  q.value = gauss_kronrod<double, 61>::integrate(fn, a, b, 20, 1e-14, &q.error);
  if (!std::isfinite(q.value) || q.error > abs_tol) {
    throw NumericError("quadrature on [" + std::to_string(a) + ", " + std::to_string(b) +
                       "] did not converge: estimated error " + std::to_string(q.error) +
                       " > " + std::to_string(abs_tol));
  }
  return q;
}

namespace {

void require_positive(const char* what, double v) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(what) + " must be positive and finite (got " +
                      std::to_string(v) + ")");
}

void require_floor(double x, double j) {
  if (!(j > 0.0) || !(j <= x))
    throw ConfigError("need 0 < j <= x (got x = " + std::to_string(x) +
                      ", j = " + std::to_string(j) + ")");
}

}  // namespace

double bond_bm(double x, double T) {
  require_positive("x", x);
  require_positive("T", T);
  // N(a) - N(-a) = erf(a/√2), without cancellation.
  return std::erf(x / std::sqrt(2.0 * T));
}

double forward_bm_investor(double x, double T) {
  require_positive("x", x);
  require_positive("T", T);
  return x;
}

double forward_bm_fundraiser_extended(double x, double j, double T) {
  require_positive("T", T);
  const double rt = std::sqrt(T);
  const double d = (j - x) / rt;
  return x + 4.0 * rt * (normal_pdf(d) + d * normal_cdf(d));
}

double forward_bm_fundraiser(double x, double j, double T) {
  require_floor(x, j);
  return forward_bm_fundraiser_extended(x, j, T);
}

double delta_bm_fundraiser(double x, double j, double T) {
  require_floor(x, j);
  require_positive("T", T);
  return 1.0 - 4.0 * normal_cdf((j - x) / std::sqrt(T));
}

double forward_recip_bessel_investor(double x, double T) {
  require_positive("x", x);
  require_positive("T", T);
  return std::erf(x / std::sqrt(2.0 * T)) / x;
}

FundraiserSplit forward_recip_bessel_fundraiser_split(double x, double j, double T) {
  require_floor(x, j);
  require_positive("T", T);
  const double rt = std::sqrt(T);
  FundraiserSplit out;
  out.phi = std::erf((x - j) / std::sqrt(2.0 * T)) / x;
  const double r0 = (x - j) / rt;
  auto integrand = [=](double r) {
    const double q = j / (r * rt - x + 2.0 * j);
    return q * q * normal_pdf(r);
  };
  const Quadrature q = integrate(integrand, r0, kInf);
  out.psi = 2.0 / x * q.value;
  out.quadrature_error = 2.0 / x * q.error;
  return out;
}

double forward_recip_bessel_fundraiser(double x, double j, double T) {
  return forward_recip_bessel_fundraiser_split(x, j, T).total();
}

double theta_recip_bessel_forward(double tau, double j) {
  if (tau == 0.0) {
    require_positive("j", j);
    return 1.0 / j;
  }
  return forward_recip_bessel_fundraiser(j, j, tau);
}

namespace {

constexpr std::array<std::pair<OracleCase, std::string_view>, 6> kOracleNames{{
    {OracleCase::BondBm, "bond_bm"},
    {OracleCase::ForwardBmInvestor, "forward_bm_investor"},
    {OracleCase::ForwardBmFundraiser, "forward_bm_fundraiser"},
    {OracleCase::DeltaBmFundraiser, "delta_bm_fundraiser"},
    {OracleCase::ForwardRecipBesselInvestor, "forward_recip_bessel_investor"},
    {OracleCase::ForwardRecipBesselFundraiser, "forward_recip_bessel_fundraiser"},
}};

}  // namespace

std::string_view oracle_name(OracleCase c) {
  for (const auto& [k, name] : kOracleNames)
    if (k == c) return name;
  return "unknown";
}

OracleCase parse_oracle(std::string_view name) {
  for (const auto& [k, n] : kOracleNames)
    if (n == name) return k;
  throw ConfigError("unknown oracle case '" + std::string(name) + "'");
}

const std::vector<OracleCase>& all_oracles() {
  static const std::vector<OracleCase> all = [] {
    std::vector<OracleCase> v;
    for (const auto& entry : kOracleNames) v.push_back(entry.first);
    return v;
  }();
  return all;
}

bool oracle_uses_floor(OracleCase c) {
  return c == OracleCase::ForwardBmFundraiser || c == OracleCase::DeltaBmFundraiser ||
         c == OracleCase::ForwardRecipBesselFundraiser;
}

double evaluate_oracle(OracleCase c, double x, double j, double T) {
  switch (c) {
    case OracleCase::BondBm: return bond_bm(x, T);
    case OracleCase::ForwardBmInvestor: return forward_bm_investor(x, T);
    case OracleCase::ForwardBmFundraiser: return forward_bm_fundraiser(x, j, T);
    case OracleCase::DeltaBmFundraiser: return delta_bm_fundraiser(x, j, T);
    case OracleCase::ForwardRecipBesselInvestor: return forward_recip_bessel_investor(x, T);
    case OracleCase::ForwardRecipBesselFundraiser: return forward_recip_bessel_fundraiser(x, j, T);
  }
  throw ConfigError("unknown oracle case");
}

SchwarzianSeries gop_investor(const PathBundle& path, const SmoothMap& s, const SmoothMap& f) {
  const SchwarzianSeries ps = schwarzian_process(s, path);
  const SchwarzianSeries pf = schwarzian_process(f, path);
  SchwarzianSeries out;
  const std::size_t n = std::min(ps.values.size(), pf.values.size());
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = ps.values[i] / pf.values[i];
  if (ps.exit_index || pf.exit_index) out.exit_index = n;
  return out;
}

SchwarzianSeries gop_fundraiser(const PathBundle& path, const SmoothMap& s, const SmoothMap& f) {
  if (path.jstar.size() != path.x.size())
    throw ConfigError("gop_fundraiser: path carries no floor (J*) record");
  SchwarzianSeries out;
  if (path.x.empty()) return out;
  auto inside = [&](double v) { return s.in_domain(v) && f.in_domain(v); };
  // u = 1/s, u' = -s'/s².
  auto du = [&](double v) {
    const double sv = s(v);
    return -s.d1(v) / (sv * sv);
  };
  auto sdiff = [&](double v) { return s.schwarzian_at(v) - f.schwarzian_at(v); };
  const double x0 = path.x[0];
  const double j0 = path.jstar[0];
  if (!inside(x0) || !inside(j0)) {
    out.exit_index = 0;
    return out;
  }
  const double du_x0 = du(x0), df_x0 = f.d1(x0), du_j0 = du(j0), df_j0 = f.d1(j0);
  double integral = 0.0;
  double prev = sdiff(x0);
  out.values.push_back(1.0);
  for (std::size_t n = 1; n < path.x.size(); ++n) {
    const double x = path.x[n];
    const double jn = path.jstar[n];
    if (!inside(x) || !inside(jn)) {
      out.exit_index = n;
      break;
    }
    const double cur = sdiff(x);
    integral += 0.5 * (prev + cur) * path.grid.dt(n);
    prev = cur;
    const double at_x = std::sqrt(du_x0 / du(x) * f.d1(x) / df_x0);
    const double at_j = du(jn) / du_j0 * df_j0 / f.d1(jn);
    out.values.push_back(at_x * at_j * std::exp(0.25 * integral));
  }
  return out;
}

}  // namespace bubblekit
