#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bubblekit {

/// Strictly increasing simulation times t_0 = 0 < t_1 < ... < t_N = T, N >= 1.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> nodes);

  static TimeGrid uniform(double horizon, std::size_t steps);
  /// Uniform grid with the extra `nodes` merged in (duplicates within 1e-12 collapse).
  static TimeGrid uniform_with(double horizon, std::size_t steps, std::span<const double> nodes);

  std::size_t steps() const { return nodes_.size() - 1; }
  std::size_t size() const { return nodes_.size(); }
  double horizon() const { return nodes_.back(); }
  double operator[](std::size_t i) const { return nodes_[i]; }
  double dt(std::size_t step) const { return nodes_[step] - nodes_[step - 1]; }
  std::span<const double> nodes() const { return nodes_; }
  /// Index of the node equal to `t` (within 1e-12 relative), if any.
  std::optional<std::size_t> find(double t) const;

 private:
  std::vector<double> nodes_{0.0, 1.0};
};

/// One simulated path. `x` and `jstar` have one entry per node up to (and including)
/// `truncated_at` when set; `increments` and `contact` have one entry per completed step.
///
/// For reflected paths `contact[n-1]` is the minimum of the pre-reflection process over
/// step n (the proposal itself under projection, the bridge minimum under bridge
/// monitoring); reflection acts on step n only if that value is negative. For unreflected
/// paths `contact` is empty and `jstar` is a copy of the floor (or empty).
struct PathBundle {
  TimeGrid grid;
  std::vector<double> x;
  std::vector<double> jstar;
  std::vector<double> increments;
  std::vector<double> contact;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  std::optional<std::size_t> truncated_at;

  std::size_t last_node() const { return x.size() - 1; }
  bool truncated() const { return truncated_at.has_value(); }
};

}  // namespace bubblekit
