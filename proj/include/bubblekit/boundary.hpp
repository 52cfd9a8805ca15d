#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bubblekit/pathlab.hpp"
#include "bubblekit/smoothmaps.hpp"

namespace bubblekit {

/// European payoff h(y) in price units.
class PayoffSpec {
 public:
  enum class Kind { Call, Bond, Forward, Table };

  static PayoffSpec call(double strike);
  static PayoffSpec bond();
  static PayoffSpec forward();
  /// Piecewise linear through (y_i, h_i), extended by the end slopes.
  static PayoffSpec table(std::vector<double> ys, std::vector<double> hs);

  double operator()(double y) const;
  Kind kind() const { return kind_; }
  double strike() const { return strike_; }
  const std::vector<double>& table_y() const { return ys_; }
  const std::vector<double>& table_h() const { return hs_; }
  bool nondecreasing() const;
  std::string descriptor() const;

 private:
  PayoffSpec() = default;
  Kind kind_ = Kind::Bond;
  double strike_ = 0.0;
  std::vector<double> ys_, hs_;
};

/// Monte Carlo estimates of Θ(τ, j), the fundraiser value started at the floor j.
struct ThetaTable {
  double j = 0.0;
  std::vector<double> taus;
  std::vector<double> theta;
  std::vector<double> std_error;
  std::size_t n_paths = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::string map_descriptor;
  std::string payoff_descriptor;

  double horizon() const { return taus.empty() ? 0.0 : taus.back(); }
  /// Identifies the (map, floor, payoff) the table belongs to.
  std::uint64_t key_hash() const;
  /// Hash of every field, estimates included.
  std::uint64_t content_hash() const;
  void validate() const;
};

std::uint64_t theta_key_hash(const std::string& map_descriptor, double j,
                             const std::string& payoff_descriptor);

/// CSV `tau,theta,stderr` at `path` plus `<path>.meta.json` with the remaining fields.
void write_theta_table(const ThetaTable& t, const std::filesystem::path& path);
ThetaTable read_theta_table(const std::filesystem::path& path);

/// Θ(τ) between table nodes: monotone piecewise cubic for the estimate, linear for the
/// standard error. Evaluation outside [0, horizon] throws.
class ThetaCurve {
 public:
  explicit ThetaCurve(const ThetaTable& table);
  double operator()(double tau) const;
  double std_error(double tau) const;
  double horizon() const { return taus_.back(); }

 private:
  std::vector<double> taus_, theta_, stderr_;
  std::function<double(double)> cubic_;
};

struct McOptions {
  std::size_t n_paths = 100000;
  std::size_t steps = 2048;
  std::uint64_t seed = 1;
  Monitoring monitoring = Monitoring::Bridge;
};

/// Θ(τ, j) for each τ in `taus` from one reflected ensemble of f_j(x) = f(x + j) started
/// at (χ, l) = (0, 0). Every τ is a node of the simulation grid. Θ(0, j) = h(f(j)) exactly.
ThetaTable estimate_theta(const SmoothMap& f, double j, std::span<const double> taus,
                          const PayoffSpec& payoff, const McOptions& mc);

/// Fundraiser price split by whether the path touches the floor before T.
struct FundraiserMc {
  McEstimate price;
  McEstimate phi;
  McEstimate psi;
  /// Fraction of paths that touched the floor.
  double contact_fraction = 0.0;
};

/// Mean of h(f(X_T)) over reflected paths started at (x0 - j0, j0), with the Φ/Ψ split.
/// `price.mean` is phi.mean + psi.mean exactly.
FundraiserMc price_fundraiser_mc(const SmoothMap& f, double x0, double j0, double T,
                                 const PayoffSpec& payoff, const McOptions& mc);
FundraiserMc decompose_phi_psi(const SmoothMap& f, double x0, double j0, double T,
                               const PayoffSpec& payoff, const McOptions& mc);

/// ∂/∂x0 of the fundraiser price by a one-sided second-order stencil on x0, x0 + h,
/// x0 + 2h, with common random numbers.
McEstimate fundraiser_delta_mc(const SmoothMap& f, double x0, double j0, double T,
                               const PayoffSpec& payoff, double h, const McOptions& mc);

/// Investor price: mean of h(f(X_T)) over unreflected paths, zero for absorbed paths.
McEstimate price_investor_mc(const SmoothMap& f, double x0, double T, const PayoffSpec& payoff,
                             const McOptions& mc);

}  // namespace bubblekit
