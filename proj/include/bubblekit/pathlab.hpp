#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "bubblekit/path_types.hpp"
#include "bubblekit/smoothmaps.hpp"

namespace bubblekit {

/// Source of standard normals and (0,1] uniforms driving one path.
class NoiseStream {
 public:
  virtual ~NoiseStream() = default;
  virtual double normal() = 0;
  /// Uniform on (0, 1]; never returns 0.
  virtual double uniform() = 0;
};

/// Per-path stream seeded from (master seed, path index), so that path i is the same
/// whatever batch it is generated in.
class PathStream final : public NoiseStream {
 public:
  PathStream(std::uint64_t master_seed, std::uint64_t path_index);
  double normal() override { return normal_(engine_); }
  double uniform() override;

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Replays fixed draws, then repeats the fallback values. `ScriptedNoise{}` is the
/// degenerate stream: every normal is 0 and every uniform is 1.
class ScriptedNoise final : public NoiseStream {
 public:
  ScriptedNoise() = default;
  ScriptedNoise(std::vector<double> normals, std::vector<double> uniforms = {})
      : normals_(std::move(normals)), uniforms_(std::move(uniforms)) {}
  double normal() override { return next_n_ < normals_.size() ? normals_[next_n_++] : 0.0; }
  double uniform() override { return next_u_ < uniforms_.size() ? uniforms_[next_u_++] : 1.0; }

 private:
  std::vector<double> normals_, uniforms_;
  std::size_t next_n_ = 0, next_u_ = 0;
};

/// How running extrema, reflection and absorption are resolved inside a time step.
///
/// `Discrete` looks at grid nodes only: the reflection is the per-step projection
/// Δl = max(-proposal, 0) and the running maximum is taken over nodes. `Bridge` samples
/// the extremum of the Brownian bridge between the nodes (drift frozen at the left node),
/// which removes the O(sqrt(dt)) bias of node monitoring.
enum class Monitoring { Discrete, Bridge };

struct SimOptions {
  Monitoring monitoring = Monitoring::Bridge;
  /// Unreflected paths are absorbed this far (relative) inside a finite domain edge.
  double edge_guard = 1e-12;
  /// Optional absorbing band replacing the domain edges of unreflected simulations.
  std::optional<Interval> band;
};

PathBundle simulate_wiener(double x0, const TimeGrid& grid, std::uint64_t seed,
                           std::uint64_t path_index = 0);
PathBundle simulate_wiener(double x0, const TimeGrid& grid, NoiseStream& noise);

/// Three-dimensional Bessel process from x0 conditioned on its future infimum J_0 = j0,
/// via X = 2 J* - X* with X* a Brownian motion started at 2 j0 - x0 and J* its running
/// maximum floored at j0. Requires 0 < j0 <= x0.
PathBundle simulate_bessel3_dual(double x0, double j0, const TimeGrid& grid, std::uint64_t seed,
                                 std::uint64_t path_index = 0, const SimOptions& opt = {});
PathBundle simulate_bessel3_dual(double x0, double j0, const TimeGrid& grid, NoiseStream& noise,
                                 const SimOptions& opt = {});
/// Unconditioned three-dimensional Bessel process from x0 > 0: J_0 is drawn uniformly on
/// (0, x0] from the path's stream, then the dual construction is applied.
PathBundle simulate_bessel3(double x0, const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t path_index = 0, const SimOptions& opt = {});

/// Euler–Maruyama for dX = -T_f(X)/2 dt + dW, absorbed at the (guarded) domain edges.
PathBundle simulate_drifted(const SmoothMap& f, double x0, const TimeGrid& grid,
                            std::uint64_t seed, std::uint64_t path_index = 0,
                            const SimOptions& opt = {});
PathBundle simulate_drifted(const SmoothMap& f, double x0, const TimeGrid& grid,
                            NoiseStream& noise, const SimOptions& opt = {});

/// Euler–Maruyama for the reflected equation χ = γ - ∫ T_f(χ + l)/2 du + l with χ >= 0,
/// l nondecreasing and increasing only when χ = 0; X = χ + l, J* = l.
/// Starts from (χ, l) = (x0 - j0, j0). Requires 0 <= j0 <= x0 with [j0, inf) inside
/// the domain of f except possibly the left endpoint j0 == 0 when f is regular there.
PathBundle simulate_skorokhod(const SmoothMap& f, double x0, double j0, const TimeGrid& grid,
                              std::uint64_t seed, std::uint64_t path_index = 0,
                              const SimOptions& opt = {});
PathBundle simulate_skorokhod(const SmoothMap& f, double x0, double j0, const TimeGrid& grid,
                              NoiseStream& noise, const SimOptions& opt = {});

/// One-step engine behind simulate_skorokhod, for ensembles that do not keep paths.
/// Keeps a reference to `f`, which must outlive the stepper.
class ReflectedStepper {
 public:
  ReflectedStepper(const SmoothMap& f, double x0, double j0, Monitoring monitoring);
  ReflectedStepper(SmoothMap&&, double, double, Monitoring) = delete;

  /// Advances by dt. Returns false (and leaves the state unchanged) if the drift cannot
  /// be evaluated or the path leaves the domain upward.
  bool step(double dt, NoiseStream& noise);

  double x() const { return chi_ + floor_; }
  double floor() const { return floor_; }
  double chi() const { return chi_; }
  double last_increment() const { return increment_; }
  /// Minimum of the pre-reflection process over the last step.
  double last_contact() const { return contact_; }
  /// True once the floor has moved (the path has touched it).
  bool touched() const { return touched_; }

 private:
  const SmoothMap& f_;
  Monitoring monitoring_;
  double chi_, floor_;
  double increment_ = 0.0, contact_ = 0.0;
  bool touched_ = false;
};

/// First time the path is at or below `level`, linearly interpolated between nodes.
std::optional<double> first_hitting(const PathBundle& path, double level);

/// J_n = min_{m >= n} X_m over the simulated nodes.
std::vector<double> future_infimum(const PathBundle& path);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Mean and standard error of per-path values, accumulated in path order.
McEstimate summarize(std::span<const double> samples);

/// Runs `per_path(i)` for i in [0, n), possibly concurrently, and returns the results
/// in path order.
std::vector<double> run_paths(std::size_t n, const std::function<double(std::size_t)>& per_path);

/// Column means and standard errors of `width` values per path.
struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t n = 0;
  McEstimate column(std::size_t k) const { return {mean[k], std_error[k], n}; }
};

/// Each call `per_path(i, row)` fills `row` (length `width`). Paths are grouped in fixed
/// blocks of kPathBlock whose partial sums are combined in block order, so the result
/// does not depend on how blocks are scheduled.
inline constexpr std::size_t kPathBlock = 1024;
ColumnStats accumulate_paths(std::size_t n, std::size_t width,
                             const std::function<void(std::size_t, std::span<double>)>& per_path);

/// Expectation under P^s of a stopped path functional by importance sampling from Wiener
/// paths: each path is stopped on leaving `band` (a compact subinterval of the domain of
/// s; the stopped value is the band edge) and the functional is weighted by the
/// Schwarzian process of s at the stopping node.
McEstimate change_of_measure_expectation(const SmoothMap& s,
                                         const std::function<double(const PathBundle&)>& payoff,
                                         double x0, const TimeGrid& grid, std::size_t n_paths,
                                         std::uint64_t seed, const Interval& band);

}  // namespace bubblekit
