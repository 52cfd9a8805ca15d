#include "bubblekit/boundary.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/interpolators/cubic_hermite.hpp>
#include <cmath>
#include <sstream>

#include "bubblekit/errors.hpp"
#include "bubblekit/io.hpp"
#include "json.hpp"

namespace bubblekit {

// ---------------------------------------------------------------------------------------
// PayoffSpec

PayoffSpec PayoffSpec::call(double strike) {
  if (!(strike >= 0.0) || !std::isfinite(strike))
    throw ConfigError("call payoff: strike must be finite and >= 0");
  PayoffSpec p;
  p.kind_ = strike == 0.0 ? Kind::Forward : Kind::Call;
  p.strike_ = strike;
  return p;
}

PayoffSpec PayoffSpec::bond() { return PayoffSpec{}; }

PayoffSpec PayoffSpec::forward() {
  PayoffSpec p;
  p.kind_ = Kind::Forward;
  return p;
}

PayoffSpec PayoffSpec::table(std::vector<double> ys, std::vector<double> hs) {
  if (ys.size() != hs.size() || ys.size() < 2)
    throw ConfigError("table payoff: need at least two (y, h) pairs of equal length");
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!std::isfinite(ys[i]) || !std::isfinite(hs[i]))
      throw ConfigError("table payoff: non-finite entry at index " + std::to_string(i));
    if (hs[i] < 0.0) throw ConfigError("table payoff: negative value at index " + std::to_string(i));
    if (i > 0 && !(ys[i] > ys[i - 1]))
      throw ConfigError("table payoff: y must be strictly increasing");
  }
  if (ys.front() < 0.0) throw ConfigError("table payoff: y must be >= 0");
  const std::size_t n = ys.size();
  const double left_slope = (hs[1] - hs[0]) / (ys[1] - ys[0]);
  if (ys.front() > 0.0 && hs[0] - left_slope * ys[0] < 0.0)
    throw ConfigError("table payoff: linear extension below the first node turns negative");
  if (hs[n - 1] < hs[n - 2])
    throw ConfigError("table payoff: linear extension above the last node turns negative");
  PayoffSpec p;
  p.kind_ = Kind::Table;
  p.ys_ = std::move(ys);
  p.hs_ = std::move(hs);
  return p;
}

double PayoffSpec::operator()(double y) const {
  switch (kind_) {
    case Kind::Bond: return 1.0;
    case Kind::Forward: return y;
    case Kind::Call: return std::max(y - strike_, 0.0);
    case Kind::Table: {
      const std::size_t n = ys_.size();
      std::size_t k;
      if (y <= ys_[0]) {
        k = 1;
      } else if (y >= ys_[n - 1]) {
        k = n - 1;
      } else {
        k = static_cast<std::size_t>(std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin());
      }
      const double w = (y - ys_[k - 1]) / (ys_[k] - ys_[k - 1]);
      return hs_[k - 1] + w * (hs_[k] - hs_[k - 1]);
    }
  }
  return 0.0;
}

bool PayoffSpec::nondecreasing() const {
  if (kind_ != Kind::Table) return true;
  for (std::size_t i = 1; i < hs_.size(); ++i)
    if (hs_[i] < hs_[i - 1]) return false;
  return true;
}

std::string PayoffSpec::descriptor() const {
  switch (kind_) {
    case Kind::Bond: return "bond";
    case Kind::Forward: return "forward";
    case Kind::Call: return "call{strike=" + format_double(strike_) + "}";
    case Kind::Table: {
      std::string s = "table{";
      for (std::size_t i = 0; i < ys_.size(); ++i) {
        if (i) s += ";";
        s += format_double(ys_[i]) + ":" + format_double(hs_[i]);
      }
      return s + "}";
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------------------
// ThetaTable

std::uint64_t theta_key_hash(const std::string& map_descriptor, double j,
                             const std::string& payoff_descriptor) {
  return fnv1a64("theta|" + map_descriptor + "|" + format_double(j) + "|" + payoff_descriptor);
}

std::uint64_t ThetaTable::key_hash() const {
  return theta_key_hash(map_descriptor, j, payoff_descriptor);
}

std::uint64_t ThetaTable::content_hash() const {
  std::string s = hex64(key_hash()) + "|" + std::to_string(n_paths) + "|" +
                  std::to_string(steps) + "|" + std::to_string(seed);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    s += "|" + format_double(taus[i]) + "," + format_double(theta[i]) + "," +
         format_double(std_error[i]);
  }
  return fnv1a64(s);
}

void ThetaTable::validate() const {
  if (taus.empty()) throw ConfigError("ThetaTable: no entries");
  if (theta.size() != taus.size() || std_error.size() != taus.size())
    throw ConfigError("ThetaTable: column lengths differ");
  if (taus.front() != 0.0) throw ConfigError("ThetaTable: first tau must be 0");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (i > 0 && !(taus[i] > taus[i - 1]))
      throw ConfigError("ThetaTable: taus must be strictly increasing");
    if (!std::isfinite(theta[i]) || !std::isfinite(std_error[i]) || std_error[i] < 0.0)
      throw ConfigError("ThetaTable: non-finite entry at tau = " + format_double(taus[i]));
  }
}

void write_theta_table(const ThetaTable& t, const std::filesystem::path& path) {
  t.validate();
  std::string csv = "tau,theta,stderr\n";
  for (std::size_t i = 0; i < t.taus.size(); ++i) {
    csv += format_double(t.taus[i]) + "," + format_double(t.theta[i]) + "," +
           format_double(t.std_error[i]) + "\n";
  }
  write_text(path, csv);
  nlohmann::ordered_json meta;
  meta["j"] = format_double(t.j);
  meta["n_paths"] = t.n_paths;
  meta["steps"] = t.steps;
  meta["seed"] = t.seed;
  meta["map"] = t.map_descriptor;
  meta["payoff"] = t.payoff_descriptor;
  meta["key_hash"] = hex64(t.key_hash());
  meta["content_hash"] = hex64(t.content_hash());
  write_text(path.string() + ".meta.json", meta.dump(2) + "\n");
}

ThetaTable read_theta_table(const std::filesystem::path& path) {
  ThetaTable t;
  std::istringstream csv(read_text(path));
  std::string line;
  if (!std::getline(csv, line) || split_csv_line(line) !=
                                      std::vector<std::string>{"tau", "theta", "stderr"})
    throw ConfigError(path.string() + ": expected header 'tau,theta,stderr'");
  std::size_t row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3)
      throw ConfigError(path.string() + ":" + std::to_string(row) + ": expected 3 fields");
    t.taus.push_back(parse_double(f[0]));
    t.theta.push_back(parse_double(f[1]));
    t.std_error.push_back(parse_double(f[2]));
  }
  const std::string meta_path = path.string() + ".meta.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(meta_path));
    t.j = parse_double(meta.at("j").get<std::string>());
    t.n_paths = meta.at("n_paths").get<std::size_t>();
    t.steps = meta.at("steps").get<std::size_t>();
    t.seed = meta.at("seed").get<std::uint64_t>();
    t.map_descriptor = meta.at("map").get<std::string>();
    t.payoff_descriptor = meta.at("payoff").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_path + ": " + e.what());
  }
  t.validate();
  if (meta.contains("content_hash") &&
      meta["content_hash"].get<std::string>() != hex64(t.content_hash()))
    throw ConfigError(path.string() + ": contents do not match the hash in its metadata");
  return t;
}

// ---------------------------------------------------------------------------------------
// ThetaCurve

ThetaCurve::ThetaCurve(const ThetaTable& table)
    : taus_(table.taus), theta_(table.theta), stderr_(table.std_error) {
  table.validate();
  if (taus_.size() < 2) throw ConfigError("ThetaCurve: need at least two nodes");
  if (taus_.size() >= 3) {
    // Monotone slopes (weighted harmonic mean of the neighbouring secants, zero at
    // extrema), one-sided secants at the ends.
    const std::size_t n = taus_.size();
    std::vector<double> slope(n);
    auto secant = [&](std::size_t k) {
      return (theta_[k + 1] - theta_[k]) / (taus_[k + 1] - taus_[k]);
    };
    slope[0] = secant(0);
    slope[n - 1] = secant(n - 2);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double h0 = taus_[k] - taus_[k - 1], h1 = taus_[k + 1] - taus_[k];
      const double d0 = secant(k - 1), d1 = secant(k);
      if (d0 * d1 <= 0.0) {
        slope[k] = 0.0;
      } else {
        const double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
        slope[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
      }
    }
    std::vector<double> xs = taus_, ys = theta_;
    boost::math::interpolators::cubic_hermite<std::vector<double>> spline(
        std::move(xs), std::move(ys), std::move(slope));
    cubic_ = [spline](double t) { return spline(t); };
  }
}

namespace {

double linear_at(const std::vector<double>& xs, const std::vector<double>& ys, double t) {
  std::size_t k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
  k = std::clamp<std::size_t>(k, 1, xs.size() - 1);
  const double w = (t - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + w * (ys[k] - ys[k - 1]);
}

}  // namespace

double ThetaCurve::operator()(double tau) const {
  const double slack = 1e-12 * std::max(1.0, horizon());
  if (!(tau >= -slack && tau <= horizon() + slack))
    throw DomainError("Theta requested at tau = " + format_double(tau) + " outside [0, " +
                      format_double(horizon()) + "]");
  tau = std::clamp(tau, 0.0, horizon());
  if (tau == 0.0) return theta_.front();
  return cubic_ ? cubic_(tau) : linear_at(taus_, theta_, tau);
}

double ThetaCurve::std_error(double tau) const {
  const double slack = 1e-12 * std::max(1.0, horizon());
  if (!(tau >= -slack && tau <= horizon() + slack))
    throw DomainError("Theta requested at tau = " + format_double(tau) + " outside [0, " +
                      format_double(horizon()) + "]");
  return linear_at(taus_, stderr_, std::clamp(tau, 0.0, horizon()));
}

// ---------------------------------------------------------------------------------------
// Monte Carlo

namespace {

void check_mc(const McOptions& mc) {
  if (mc.n_paths < 2) throw ConfigError("Monte Carlo: need at least two paths");
  if (mc.steps < 1) throw ConfigError("Monte Carlo: need at least one time step");
}

void check_horizon(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("horizon T must be positive");
}

void throw_if_escaped(std::size_t escaped, const SmoothMap& f) {
  if (escaped > 0) {
    throw NumericError(std::to_string(escaped) + " path(s) left the domain of " +
                       f.descriptor() + " before maturity");
  }
}

}  // namespace

ThetaTable estimate_theta(const SmoothMap& f, double j, std::span<const double> taus,
                          const PayoffSpec& payoff, const McOptions& mc) {
  check_mc(mc);
  if (!(j > 0.0) || !std::isfinite(j)) throw ConfigError("estimate_theta: floor j must be > 0");
  if (!f.in_domain(j)) {
    throw ConfigError("estimate_theta: floor j = " + format_double(j) +
                      " is not inside the domain of " + f.descriptor());
  }
  if (taus.empty()) throw ConfigError("estimate_theta: empty tau grid");
  std::vector<double> grid_taus(taus.begin(), taus.end());
  if (grid_taus.front() != 0.0) grid_taus.insert(grid_taus.begin(), 0.0);
  for (std::size_t i = 1; i < grid_taus.size(); ++i) {
    if (!(grid_taus[i] > grid_taus[i - 1]))
      throw ConfigError("estimate_theta: taus must be strictly increasing and >= 0");
  }

  const SmoothMap fj = shifted(f, j);
  if (!(fj.domain().lo < 0.0))
    throw ConfigError("estimate_theta: f_j is singular at 0 (domain edge of f at j)");
  const double t0 = fj.pre_schwarzian_at(0.0);
  if (!std::isfinite(t0)) {
    throw ConfigError("estimate_theta: pre-Schwarzian of f_j = " + fj.descriptor() +
                      " is singular at 0 (T = " + format_double(t0) + ")");
  }

  ThetaTable out;
  out.j = j;
  out.taus = grid_taus;
  out.n_paths = mc.n_paths;
  out.steps = mc.steps;
  out.seed = mc.seed;
  out.map_descriptor = f.descriptor();
  out.payoff_descriptor = payoff.descriptor();
  const double anchor = payoff(f(j));

  if (grid_taus.size() == 1) {
    out.theta = {anchor};
    out.std_error = {0.0};
    return out;
  }

  const TimeGrid grid =
      TimeGrid::uniform_with(grid_taus.back(), mc.steps, std::span<const double>(grid_taus));
  std::vector<std::size_t> node_of(grid_taus.size());
  for (std::size_t k = 0; k < grid_taus.size(); ++k) node_of[k] = *grid.find(grid_taus[k]);

  std::atomic<std::size_t> escaped{0};
  const std::size_t width = grid_taus.size() - 1;
  const ColumnStats stats = accumulate_paths(mc.n_paths, width, [&](std::size_t i, std::span<double> row) {
    PathStream noise(mc.seed, i);
    ReflectedStepper stepper(fj, 0.0, 0.0, mc.monitoring);
    std::size_t next = 1;
    for (std::size_t n = 1; n <= grid.steps(); ++n) {
      if (!stepper.step(grid.dt(n), noise)) {
        escaped.fetch_add(1);
        return;
      }
      while (next < node_of.size() && node_of[next] == n) {
        row[next - 1] = payoff(fj(stepper.x()));
        ++next;
      }
    }
  });
  throw_if_escaped(escaped.load(), fj);

  out.theta.assign(grid_taus.size(), anchor);
  out.std_error.assign(grid_taus.size(), 0.0);
  for (std::size_t k = 1; k < grid_taus.size(); ++k) {
    out.theta[k] = stats.mean[k - 1];
    out.std_error[k] = stats.std_error[k - 1];
  }
  return out;
}

namespace {

void check_start(const SmoothMap& f, double x0, double j0) {
  if (!(j0 > 0.0) || !(j0 <= x0) || !std::isfinite(x0)) {
    throw ConfigError("fundraiser pricing: need 0 < j0 <= x0 (got x0 = " + format_double(x0) +
                      ", j0 = " + format_double(j0) + ")");
  }
  if (!f.in_domain(j0)) {
    throw ConfigError("fundraiser pricing: floor j0 = " + format_double(j0) +
                      " is not inside the domain of " + f.descriptor());
  }
}

}  // namespace

FundraiserMc price_fundraiser_mc(const SmoothMap& f, double x0, double j0, double T,
                                 const PayoffSpec& payoff, const McOptions& mc) {
  check_mc(mc);
  check_horizon(T);
  check_start(f, x0, j0);
  const TimeGrid grid = TimeGrid::uniform(T, mc.steps);
  std::atomic<std::size_t> escaped{0};
  // Columns: value on paths without contact, value on paths with contact, contact flag,
  // value.
  const ColumnStats stats = accumulate_paths(mc.n_paths, 4, [&](std::size_t i, std::span<double> row) {
    PathStream noise(mc.seed, i);
    ReflectedStepper stepper(f, x0, j0, mc.monitoring);
    for (std::size_t n = 1; n <= grid.steps(); ++n) {
      if (!stepper.step(grid.dt(n), noise)) {
        escaped.fetch_add(1);
        return;
      }
    }
    const double v = payoff(f(stepper.x()));
    const bool contact = x0 == j0 || stepper.touched();
    row[contact ? 1 : 0] = v;
    row[2] = contact ? 1.0 : 0.0;
    row[3] = v;
  });
  throw_if_escaped(escaped.load(), f);
  FundraiserMc out;
  out.phi = stats.column(0);
  out.psi = stats.column(1);
  out.price = stats.column(3);
  out.price.mean = out.phi.mean + out.psi.mean;
  out.contact_fraction = stats.mean[2];
  return out;
}

FundraiserMc decompose_phi_psi(const SmoothMap& f, double x0, double j0, double T,
                               const PayoffSpec& payoff, const McOptions& mc) {
  return price_fundraiser_mc(f, x0, j0, T, payoff, mc);
}

McEstimate fundraiser_delta_mc(const SmoothMap& f, double x0, double j0, double T,
                               const PayoffSpec& payoff, double h, const McOptions& mc) {
  check_mc(mc);
  check_horizon(T);
  check_start(f, x0, j0);
  if (!(h > 0.0)) throw ConfigError("fundraiser_delta_mc: step h must be positive");
  const TimeGrid grid = TimeGrid::uniform(T, mc.steps);
  std::atomic<std::size_t> escaped{0};
  const ColumnStats stats = accumulate_paths(mc.n_paths, 1, [&](std::size_t i, std::span<double> row) {
    double v[3];
    for (int k = 0; k < 3; ++k) {
      PathStream noise(mc.seed, i);
      ReflectedStepper stepper(f, x0 + k * h, j0, mc.monitoring);
      for (std::size_t n = 1; n <= grid.steps(); ++n) {
        if (!stepper.step(grid.dt(n), noise)) {
          escaped.fetch_add(1);
          return;
        }
      }
      v[k] = payoff(f(stepper.x()));
    }
    row[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
  });
  throw_if_escaped(escaped.load(), f);
  return stats.column(0);
}

McEstimate price_investor_mc(const SmoothMap& f, double x0, double T, const PayoffSpec& payoff,
                             const McOptions& mc) {
  check_mc(mc);
  check_horizon(T);
  f.require_in_domain(x0);
  const TimeGrid grid = TimeGrid::uniform(T, mc.steps);
  SimOptions opt;
  opt.monitoring = mc.monitoring;
  const ColumnStats stats = accumulate_paths(mc.n_paths, 1, [&](std::size_t i, std::span<double> row) {
    PathStream noise(mc.seed, i);
    const PathBundle p = simulate_drifted(f, x0, grid, noise, opt);
    row[0] = p.truncated() ? 0.0 : payoff(f(p.x.back()));
  });
  return stats.column(0);
}

}  // namespace bubblekit
