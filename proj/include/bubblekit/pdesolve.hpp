#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bubblekit/boundary.hpp"
#include "bubblekit/path_types.hpp"
#include "bubblekit/smoothmaps.hpp"

namespace bubblekit {

/// Local volatility σ(y) of the price process dY = σ(Y) dB.
class SigmaSpec {
 public:
  using Fn = std::function<double(double)>;

  /// σ(y) = c y^p.
  static SigmaSpec power(double c, double p);
  /// Arbitrary positive σ; missing derivatives fall back to central differences.
  static SigmaSpec custom(std::string descriptor, Fn sigma, Fn d1 = {}, Fn d2 = {});
  /// σ(y) = |f'(f^{-1}(y))| for a given price map f; f_from_sigma returns f itself.
  static SigmaSpec from_map(const SmoothMap& f);

  double operator()(double y) const { return sigma_(y); }
  double d1(double y) const;
  double d2(double y) const;
  const std::string& descriptor() const { return descriptor_; }
  bool is_power() const { return power_.has_value(); }
  /// (c, p) for power volatilities.
  std::pair<double, double> power_params() const { return *power_; }
  const SmoothMap* source_map() const { return source_.get(); }

 private:
  std::string descriptor_;
  Fn sigma_, d1_, d2_;
  std::optional<std::pair<double, double>> power_;
  std::shared_ptr<const SmoothMap> source_;
};

/// ∫_a^∞ fn by doubling pieces [a 2^k, a 2^{k+1}] (a > 0). Returns nullopt when the piece
/// ratios do not settle below 1 - 1e-3, i.e. the tail does not converge geometrically.
std::optional<double> tail_integral(const std::function<double(double)>& fn, double a);

/// Decreasing map f with f^{-1}(y) = ∫_y^∞ dz/σ(z) and f'(f^{-1}(y)) = -σ(y).
/// Power volatilities get the closed form; σ built by `from_map` returns its map; others
/// go through `f_from_sigma_numeric`.
/// Throws ConfigError when the tail integral diverges.
SmoothMap f_from_sigma(const SigmaSpec& sigma);
/// Quadrature route for any σ: f^{-1} by adaptive quadrature, f by root finding.
SmoothMap f_from_sigma_numeric(const SigmaSpec& sigma);

/// ∫_1^∞ y/σ(y)² dy < ∞, i.e. the driftless price is a strict local martingale.
bool is_strict_local_martingale(const SigmaSpec& sigma);

/// Strictly increasing space nodes y_0 < ... < y_M, M >= 3.
class SpaceGrid {
 public:
  enum class Spacing { Uniform, Geometric };

  explicit SpaceGrid(std::vector<double> nodes, Spacing spacing = Spacing::Uniform);
  static SpaceGrid uniform(double lo, double hi, std::size_t intervals);
  /// Spacing growing geometrically away from `lo` (stretch ratio between the last and
  /// first cell is about e^beta).
  static SpaceGrid geometric(double lo, double hi, std::size_t intervals, double beta = 3.0);
  static SpaceGrid make(Spacing spacing, double lo, double hi, std::size_t intervals);

  /// Moves the nearest interior node onto each point (keeping the order strict).
  SpaceGrid snapped(std::span<const double> points) const;

  std::size_t intervals() const { return y_.size() - 1; }
  std::size_t size() const { return y_.size(); }
  double operator[](std::size_t i) const { return y_[i]; }
  double lo() const { return y_.front(); }
  double hi() const { return y_.back(); }
  const std::vector<double>& nodes() const { return y_; }
  Spacing spacing() const { return spacing_; }
  std::optional<std::size_t> find(double y) const;

 private:
  std::vector<double> y_;
  Spacing spacing_;
};

std::string_view spacing_name(SpaceGrid::Spacing s);
SpaceGrid::Spacing parse_spacing(std::string_view name);

namespace scheme {
/// Decreasing f: domain [0, f(j)] with Θ(T - t, j) at the cap and h(0) at 0.
/// Increasing f: domain [f(j), f(j + far)] with Θ at the floor and h at the far edge.
struct Fundraiser {
  double j = 0.0;
  ThetaTable theta;
  double far = 0.0;
};
/// Domain [0, n] with v_y(t, n) = 0.
struct NeumannCap {
  double n = 0.0;
};
/// Domain [0, n]; terminal data tapered linearly to 0 on [n/2, n]; v(t, n) = 0.
struct TaperedTerminal {
  double n = 0.0;
};
/// Domain [0, n]; w_t = -σ²/2 w_yy - (σ²/y) w_y with w(T) = h(y)/y, w = 0 at both ends,
/// v = y w.
struct TransformedCauchy {
  double n = 0.0;
};
/// Diagnostic: v(t, n) = h(n) at the cap.
struct NaiveCap {
  double n = 0.0;
};
}  // namespace scheme

using SchemeKind = std::variant<scheme::Fundraiser, scheme::NeumannCap, scheme::TaperedTerminal,
                                scheme::TransformedCauchy, scheme::NaiveCap>;

std::string scheme_name(const SchemeKind& s);
std::string scheme_descriptor(const SchemeKind& s);
/// Space domain of the scheme: [0, f(j)] or [f(j), f(j + far)] for Fundraiser, [0, n]
/// otherwise.
Interval scheme_domain(const SchemeKind& s, const SigmaSpec& sigma);

struct PdeSolution {
  SpaceGrid grid;
  TimeGrid times;
  /// values[n][i] = v(t_n, y_i).
  std::vector<std::vector<double>> values;
  SchemeKind scheme;
  double theta_weight = 1.0;
  std::string sigma_descriptor;
  std::string payoff_descriptor;
  /// Propagated Θ standard error at t = 0 (Fundraiser only; zeros otherwise).
  std::vector<double> boundary_stderr;
  /// |terminal datum - boundary datum| at the cap, or at the floor for an increasing
  /// fundraiser map (value mismatch for Dirichlet rows, slope mismatch for Neumann).
  double corner_defect = 0.0;

  /// v(0, y), linear between nodes.
  double initial_value(double y) const;
  double initial_stderr(double y) const;
};

/// Backward θ-weighted time stepping (theta_weight = 1 is implicit Euler, 1/2 is
/// Crank–Nicolson) with one tridiagonal solve per step. The discrete maximum principle
/// holds for theta_weight = 1; weights below 1/2 must satisfy the explicit step limit.
PdeSolution solve(const SigmaSpec& sigma, const PayoffSpec& payoff, double T,
                  const SchemeKind& scheme, const SpaceGrid& grid, const TimeGrid& times,
                  double theta_weight = 1.0);

/// Terminal datum the scheme starts from (in v units; Tapered and Transformed differ
/// from the payoff).
std::vector<double> terminal_datum(const SchemeKind& s, const PayoffSpec& payoff,
                                   const SpaceGrid& grid);

/// CSV matrix: first row `t,y_0,...,y_M`, then one row per time. Metadata next to it in
/// `<path>.meta.json`.
void write_solution(const PdeSolution& s, const std::filesystem::path& path);

struct GridPolicy {
  std::size_t intervals = 800;
  std::size_t steps = 2048;
  SpaceGrid::Spacing spacing = SpaceGrid::Spacing::Geometric;
  double theta_weight = 1.0;
  /// Points snapped onto grid nodes (reference price, strike).
  std::vector<double> snap;
};

SpaceGrid grid_for(const SchemeKind& s, const SigmaSpec& sigma, const GridPolicy& policy);

enum class SchemeFamily { Fundraiser, NeumannCap, TaperedTerminal, TransformedCauchy, NaiveCap };
std::string_view family_name(SchemeFamily f);
SchemeFamily parse_family(std::string_view name);

struct ConvergenceRow {
  double parameter = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  /// value - previous value (NaN on the first row).
  double difference = 0.0;
  double corner_defect = 0.0;
  double seconds = 0.0;
};

/// Supplies the Θ table for a floor j (Fundraiser family only).
using ThetaProvider = std::function<ThetaTable(double j)>;

/// Value at (0, y_ref) along a parameter sequence: decreasing floors j for the Fundraiser
/// family, increasing caps n for the others.
std::vector<ConvergenceRow> convergence_study(const SigmaSpec& sigma, const PayoffSpec& payoff,
                                              double T, SchemeFamily family,
                                              std::span<const double> parameters, double y_ref,
                                              const GridPolicy& policy,
                                              const ThetaProvider& theta = {});

}  // namespace bubblekit
