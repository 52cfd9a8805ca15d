#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "bubblekit/path_types.hpp"
#include "bubblekit/smoothmaps.hpp"

namespace bubblekit {

double normal_cdf(double x);
double normal_pdf(double x);

struct Quadrature {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss–Kronrod on [a, b]; either end may be infinite. Throws NumericError
/// (with the achieved error) if the estimate misses `abs_tol`.
Quadrature integrate(const std::function<double(double)>& fn, double a, double b,
                     double abs_tol = 1e-10);

// Brownian model: price y = x, scale 1/x (Brownian motion stopped at 0).

/// Investor's zero-coupon bond: N(x/√T) - N(-x/√T).
double bond_bm(double x, double T);
/// Investor's forward: x (the stopped Brownian price is a true martingale).
double forward_bm_investor(double x, double T);
/// Fundraiser's forward: x + 4√T (φ(d) + d N(d)) with d = (j - x)/√T. Needs 0 < j <= x.
double forward_bm_fundraiser(double x, double j, double T);
/// ∂/∂x of forward_bm_fundraiser: 1 - 4 N((j - x)/√T).
double delta_bm_fundraiser(double x, double j, double T);
/// Same formula without the 0 < j <= x check. Outside the model for j <= 0; it tends to
/// the investor's value x as j -> -inf.
double forward_bm_fundraiser_extended(double x, double j, double T);

// Reciprocal Bessel model: price y = 1/x, X a three-dimensional Bessel process.

/// Investor's forward: (1/x)(N(x/√T) - N(-x/√T)).
double forward_recip_bessel_investor(double x, double T);

struct FundraiserSplit {
  /// Paths that stay above the floor until T.
  double phi = 0.0;
  /// Paths that reach the floor before T (the r-integral).
  double psi = 0.0;
  double quadrature_error = 0.0;
  double total() const { return phi + psi; }
};

/// Fundraiser's forward, split into its two terms:
/// (1/x)(2N((x-j)/√T) - 1) + (2/x) ∫_{(x-j)/√T}^∞ (j/(r√T - x + 2j))² φ(r) dr.
FundraiserSplit forward_recip_bessel_fundraiser_split(double x, double j, double T);
double forward_recip_bessel_fundraiser(double x, double j, double T);
/// Boundary value for the forward payoff: the fundraiser forward started at the floor.
double theta_recip_bessel_forward(double tau, double j);

enum class OracleCase {
  BondBm,
  ForwardBmInvestor,
  ForwardBmFundraiser,
  DeltaBmFundraiser,
  ForwardRecipBesselInvestor,
  ForwardRecipBesselFundraiser,
};

std::string_view oracle_name(OracleCase c);
/// Parses the snake_case name; throws ConfigError on unknown names.
OracleCase parse_oracle(std::string_view name);
const std::vector<OracleCase>& all_oracles();
bool oracle_uses_floor(OracleCase c);
double evaluate_oracle(OracleCase c, double x, double j, double T);

/// Investor GOP G_t = 𝒮^s_t(X) / 𝒮^f_t(X); stops where either process stops.
SchwarzianSeries gop_investor(const PathBundle& path, const SmoothMap& s, const SmoothMap& f);

/// Fundraiser GOP on a reflected path:
///   sqrt(u'(X_0) f'(X_t) / (u'(X_t) f'(X_0))) · u'(J*_t) f'(J*_0) / (u'(J*_0) f'(J*_t))
///   · exp(1/4 ∫ (S_s - S_f)(X_u) du),   with u = 1/s.
SchwarzianSeries gop_fundraiser(const PathBundle& path, const SmoothMap& s, const SmoothMap& f);

}  // namespace bubblekit
