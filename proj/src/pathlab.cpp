#include "bubblekit/pathlab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bubblekit/errors.hpp"

namespace bubblekit {

// ---------------------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw ConfigError("TimeGrid: need at least one step");
  if (nodes_.front() != 0.0) throw ConfigError("TimeGrid: first node must be 0");
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!(nodes_[i] > nodes_[i - 1]))
      throw ConfigError("TimeGrid: nodes must be strictly increasing");
  }
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ConfigError("TimeGrid: horizon must be positive");
  if (steps < 1) throw ConfigError("TimeGrid: need at least one step");
  std::vector<double> t(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) t[i] = horizon * static_cast<double>(i) / steps;
  t.back() = horizon;
  return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::uniform_with(double horizon, std::size_t steps, std::span<const double> extra) {
  TimeGrid base = uniform(horizon, steps);
  std::vector<double> t(base.nodes().begin(), base.nodes().end());
  for (double e : extra) {
    if (e < 0.0 || e > horizon) throw ConfigError("TimeGrid: extra node outside [0, horizon]");
    t.push_back(e);
  }
  std::sort(t.begin(), t.end());
  std::vector<double> merged;
  for (double v : t) {
    if (merged.empty() || v - merged.back() > 1e-12 * std::max(1.0, horizon)) {
      merged.push_back(v);
    }
  }
  merged.back() = horizon;
  return TimeGrid(std::move(merged));
}

std::optional<std::size_t> TimeGrid::find(double t) const {
  const double tol = 1e-12 * std::max(1.0, horizon());
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t - tol);
  if (it != nodes_.end() && std::abs(*it - t) <= tol)
    return static_cast<std::size_t>(it - nodes_.begin());
  return std::nullopt;
}

// ---------------------------------------------------------------------------------------
// Streams

PathStream::PathStream(std::uint64_t master_seed, std::uint64_t path_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32), 0x6a09e667u};
  engine_.seed(seq);
}

double PathStream::uniform() {
  for (;;) {
    const double u = 1.0 - std::generate_canonical<double, 53>(engine_);
    if (u > 0.0 && u <= 1.0) return u;
  }
}

namespace {

// Minimum over [0, dt] of a Brownian bridge from a to b (unit diffusion).
double bridge_min(double a, double b, double dt, double u) {
  const double d = b - a;
  return 0.5 * (a + b - std::sqrt(d * d - 2.0 * dt * std::log(u)));
}

double bridge_max(double a, double b, double dt, double u) {
  const double d = b - a;
  return 0.5 * (a + b + std::sqrt(d * d - 2.0 * dt * std::log(u)));
}

void truncate(PathBundle& p, std::size_t node) {
  p.truncated_at = node;
  p.x.resize(node + 1);
  if (!p.jstar.empty()) p.jstar.resize(node + 1);
  p.increments.resize(node);
  if (!p.contact.empty()) p.contact.resize(node);
}

PathBundle empty_bundle(const TimeGrid& grid) {
  PathBundle p;
  p.grid = grid;
  p.x.reserve(grid.size());
  p.increments.reserve(grid.steps());
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Simulators

PathBundle simulate_wiener(double x0, const TimeGrid& grid, NoiseStream& noise) {
  PathBundle p = empty_bundle(grid);
  p.x.push_back(x0);
  double x = x0;
  for (std::size_t n = 1; n <= grid.steps(); ++n) {
    const double dw = std::sqrt(grid.dt(n)) * noise.normal();
    x += dw;
    p.increments.push_back(dw);
    p.x.push_back(x);
  }
  return p;
}

PathBundle simulate_wiener(double x0, const TimeGrid& grid, std::uint64_t seed,
                           std::uint64_t path_index) {
  PathStream noise(seed, path_index);
  PathBundle p = simulate_wiener(x0, grid, noise);
  p.seed = seed;
  p.path_index = path_index;
  return p;
}

PathBundle simulate_bessel3_dual(double x0, double j0, const TimeGrid& grid, NoiseStream& noise,
                                 const SimOptions& opt) {
  if (!(j0 > 0.0) || !(j0 <= x0)) {
    throw ConfigError("simulate_bessel3_dual: need 0 < j0 <= x0 (got x0 = " + std::to_string(x0) +
                      ", j0 = " + std::to_string(j0) + ")");
  }
  PathBundle p = empty_bundle(grid);
  p.jstar.reserve(grid.size());
  p.contact.reserve(grid.steps());
  double dual = 2.0 * j0 - x0;
  double jstar = j0;
  p.x.push_back(x0);
  p.jstar.push_back(jstar);
  for (std::size_t n = 1; n <= grid.steps(); ++n) {
    const double dt = grid.dt(n);
    const double dw = std::sqrt(dt) * noise.normal();
    const double next = dual + dw;
    const double peak =
        opt.monitoring == Monitoring::Bridge ? bridge_max(dual, next, dt, noise.uniform()) : next;
    p.contact.push_back(jstar - peak);
    jstar = std::max(jstar, peak);
    dual = next;
    p.increments.push_back(dw);
    p.jstar.push_back(jstar);
    p.x.push_back(2.0 * jstar - dual);
  }
  return p;
}

PathBundle simulate_bessel3_dual(double x0, double j0, const TimeGrid& grid, std::uint64_t seed,
                                 std::uint64_t path_index, const SimOptions& opt) {
  PathStream noise(seed, path_index);
  PathBundle p = simulate_bessel3_dual(x0, j0, grid, noise, opt);
  p.seed = seed;
  p.path_index = path_index;
  return p;
}

PathBundle simulate_bessel3(double x0, const TimeGrid& grid, std::uint64_t seed,
                            std::uint64_t path_index, const SimOptions& opt) {
  if (!(x0 > 0.0)) throw ConfigError("simulate_bessel3: x0 must be positive");
  PathStream noise(seed, path_index);
  const double j0 = x0 * noise.uniform();
  PathBundle p = simulate_bessel3_dual(x0, j0, grid, noise, opt);
  p.seed = seed;
  p.path_index = path_index;
  return p;
}

PathBundle simulate_drifted(const SmoothMap& f, double x0, const TimeGrid& grid,
                            NoiseStream& noise, const SimOptions& opt) {
  double lo = f.domain().lo;
  double hi = f.domain().hi;
  if (opt.band) {
    if (!(opt.band->lo >= lo && opt.band->hi <= hi) || opt.band->empty())
      throw ConfigError("simulate_drifted: band must be a subinterval of the domain");
    lo = opt.band->lo;
    hi = opt.band->hi;
  } else {
    if (std::isfinite(lo)) lo += opt.edge_guard * std::max(1.0, std::abs(lo));
    if (std::isfinite(hi)) hi -= opt.edge_guard * std::max(1.0, std::abs(hi));
  }
  if (!(x0 > lo && x0 < hi)) f.require_in_domain(x0);
  if (!(x0 > lo && x0 < hi)) throw ConfigError("simulate_drifted: x0 outside the absorbing band");

  const bool finite_lo = std::isfinite(lo);
  const bool finite_hi = std::isfinite(hi);
  const bool bridge = opt.monitoring == Monitoring::Bridge && (finite_lo || finite_hi);

  PathBundle p = empty_bundle(grid);
  p.x.push_back(x0);
  double x = x0;
  for (std::size_t n = 1; n <= grid.steps(); ++n) {
    const double dt = grid.dt(n);
    const double drift = -0.5 * f.pre_schwarzian_at(x);
    const double dw = std::sqrt(dt) * noise.normal();
    const double next = x + drift * dt + dw;
    p.increments.push_back(dw);
    std::optional<double> edge;
    if (!std::isfinite(next)) {
      edge = finite_lo ? lo : hi;
    } else if (finite_lo && next <= lo) {
      edge = lo;
    } else if (finite_hi && next >= hi) {
      edge = hi;
    } else if (bridge) {
      const double u = noise.uniform();
      const double p_lo = finite_lo ? std::exp(-2.0 * (x - lo) * (next - lo) / dt) : 0.0;
      const double p_hi = finite_hi ? std::exp(-2.0 * (hi - x) * (hi - next) / dt) : 0.0;
      if (u < p_lo) {
        edge = lo;
      } else if (u < p_lo + p_hi) {
        edge = hi;
      }
    }
    if (edge) {
      p.x.push_back(*edge);
      truncate(p, n);
      return p;
    }
    x = next;
    p.x.push_back(x);
  }
  return p;
}

PathBundle simulate_drifted(const SmoothMap& f, double x0, const TimeGrid& grid,
                            std::uint64_t seed, std::uint64_t path_index, const SimOptions& opt) {
  PathStream noise(seed, path_index);
  PathBundle p = simulate_drifted(f, x0, grid, noise, opt);
  p.seed = seed;
  p.path_index = path_index;
  return p;
}

ReflectedStepper::ReflectedStepper(const SmoothMap& f, double x0, double j0, Monitoring monitoring)
    : f_(f), monitoring_(monitoring), chi_(x0 - j0), floor_(j0) {
  if (!(j0 >= 0.0) || !(j0 <= x0) || !std::isfinite(x0)) {
    throw ConfigError("reflected simulation: need 0 <= j0 <= x0 (got x0 = " + std::to_string(x0) +
                      ", j0 = " + std::to_string(j0) + ")");
  }
  if (!(f.domain().lo < j0)) {
    throw ConfigError("reflected simulation: floor j0 = " + std::to_string(j0) +
                      " is not inside the domain of " + f.descriptor());
  }
}

bool ReflectedStepper::step(double dt, NoiseStream& noise) {
  const double drift = -0.5 * f_.pre_schwarzian_at(chi_ + floor_);
  if (!std::isfinite(drift)) return false;
  const double dw = std::sqrt(dt) * noise.normal();
  const double proposal = chi_ + dw + drift * dt;
  const double low = monitoring_ == Monitoring::Bridge
                         ? bridge_min(chi_, proposal, dt, noise.uniform())
                         : proposal;
  const double push = std::max(0.0, -low);
  const double chi = proposal + push;
  const double floor = floor_ + push;
  if (!(chi + floor < f_.domain().hi) || !std::isfinite(chi)) return false;
  increment_ = dw;
  contact_ = low;
  chi_ = chi;
  if (push > 0.0) touched_ = true;
  floor_ = floor;
  return true;
}

PathBundle simulate_skorokhod(const SmoothMap& f, double x0, double j0, const TimeGrid& grid,
                              NoiseStream& noise, const SimOptions& opt) {
  ReflectedStepper stepper(f, x0, j0, opt.monitoring);
  PathBundle p = empty_bundle(grid);
  p.jstar.reserve(grid.size());
  p.contact.reserve(grid.steps());
  p.x.push_back(stepper.x());
  p.jstar.push_back(stepper.floor());
  for (std::size_t n = 1; n <= grid.steps(); ++n) {
    if (!stepper.step(grid.dt(n), noise)) {
      p.truncated_at = n - 1;
      return p;
    }
    p.increments.push_back(stepper.last_increment());
    p.contact.push_back(stepper.last_contact());
    p.x.push_back(stepper.x());
    p.jstar.push_back(stepper.floor());
  }
  return p;
}

PathBundle simulate_skorokhod(const SmoothMap& f, double x0, double j0, const TimeGrid& grid,
                              std::uint64_t seed, std::uint64_t path_index,
                              const SimOptions& opt) {
  PathStream noise(seed, path_index);
  PathBundle p = simulate_skorokhod(f, x0, j0, grid, noise, opt);
  p.seed = seed;
  p.path_index = path_index;
  return p;
}

// ---------------------------------------------------------------------------------------
// Functionals

std::optional<double> first_hitting(const PathBundle& path, double level) {
  if (path.x.empty()) return std::nullopt;
  if (path.x[0] <= level) return 0.0;
  for (std::size_t n = 1; n < path.x.size(); ++n) {
    if (path.x[n] <= level) {
      const double a = path.x[n - 1];
      const double b = path.x[n];
      const double w = (a - level) / (a - b);
      return path.grid[n - 1] + w * path.grid.dt(n);
    }
  }
  return std::nullopt;
}

std::vector<double> future_infimum(const PathBundle& path) {
  std::vector<double> out(path.x.size());
  double running = kInf;
  for (std::size_t i = path.x.size(); i-- > 0;) {
    running = std::min(running, path.x[i]);
    out[i] = running;
  }
  return out;
}

McEstimate summarize(std::span<const double> samples) {
  McEstimate e;
  e.n = samples.size();
  if (samples.empty()) return e;
  double sum = 0.0;
  for (double v : samples) sum += v;
  e.mean = sum / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - e.mean) * (v - e.mean);
    e.std_error = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  }
  return e;
}

std::vector<double> run_paths(std::size_t n, const std::function<double(std::size_t)>& per_path) {
  std::vector<double> out(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = per_path(static_cast<std::size_t>(i));
  }
  return out;
}

ColumnStats accumulate_paths(std::size_t n, std::size_t width,
                             const std::function<void(std::size_t, std::span<double>)>& per_path) {
  const std::size_t blocks = (n + kPathBlock - 1) / kPathBlock;
  // Per block: shifted sums (by the block's first row) to keep the variance stable.
  std::vector<double> shift(blocks * width), sum(blocks * width), sum_sq(blocks * width);
  const auto block_count = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < block_count; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * kPathBlock;
    const std::size_t last = std::min(n, first + kPathBlock);
    std::vector<double> row(width);
    double* sh = &shift[static_cast<std::size_t>(b) * width];
    double* s = &sum[static_cast<std::size_t>(b) * width];
    double* sq = &sum_sq[static_cast<std::size_t>(b) * width];
    for (std::size_t i = first; i < last; ++i) {
      std::fill(row.begin(), row.end(), 0.0);
      per_path(i, row);
      if (i == first) std::copy(row.begin(), row.end(), sh);
      for (std::size_t k = 0; k < width; ++k) {
        const double d = row[k] - sh[k];
        s[k] += d;
        sq[k] += d * d;
      }
    }
  }
  ColumnStats out;
  out.n = n;
  out.mean.assign(width, 0.0);
  out.std_error.assign(width, 0.0);
  if (n == 0) return out;
  // Combine in block order: total sum, then centered second moment.
  std::vector<double> total(width, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t m = std::min(n, (b + 1) * kPathBlock) - b * kPathBlock;
    for (std::size_t k = 0; k < width; ++k)
      total[k] += sum[b * width + k] + static_cast<double>(m) * shift[b * width + k];
  }
  for (std::size_t k = 0; k < width; ++k) out.mean[k] = total[k] / static_cast<double>(n);
  if (n < 2) return out;
  for (std::size_t k = 0; k < width; ++k) {
    double m2 = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      const double m = static_cast<double>(std::min(n, (b + 1) * kPathBlock) - b * kPathBlock);
      const double s = sum[b * width + k];
      const double c = shift[b * width + k] - out.mean[k];
      // Σ (d + c)^2 with d = row - shift.
      m2 += sum_sq[b * width + k] + 2.0 * c * s + m * c * c;
    }
    m2 = std::max(m2, 0.0);
    out.std_error[k] = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return out;
}

McEstimate change_of_measure_expectation(const SmoothMap& s,
                                         const std::function<double(const PathBundle&)>& payoff,
                                         double x0, const TimeGrid& grid, std::size_t n_paths,
                                         std::uint64_t seed, const Interval& band) {
  if (!std::isfinite(band.lo) || !std::isfinite(band.hi) || band.empty())
    throw ConfigError("change_of_measure_expectation: band must be a bounded interval");
  if (!(band.lo > s.domain().lo && band.hi < s.domain().hi))
    throw ConfigError("change_of_measure_expectation: band must lie inside the domain of s");
  if (!band.contains(x0)) throw ConfigError("change_of_measure_expectation: x0 outside band");
  const SmoothMap wiener = affine_map(1.0, 0.0);
  SimOptions opt;
  opt.band = band;
  const auto values = run_paths(n_paths, [&](std::size_t i) {
    PathBundle path = simulate_drifted(wiener, x0, grid, seed, i, opt);
    path.seed = seed;
    const auto weight = schwarzian_process(s, path);
    if (weight.truncated()) throw NumericError("change_of_measure_expectation: weight undefined");
    return payoff(path) * weight.values.back();
  });
  return summarize(values);
}

}  // namespace bubblekit
