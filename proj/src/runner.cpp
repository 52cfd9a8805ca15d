#include "bubblekit/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "bubblekit/errors.hpp"
#include "bubblekit/io.hpp"

namespace bubblekit {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(where.empty() ? "config" : where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) bad(join(where, k), "unknown key");
  }
}

double number(const json& obj, const std::string& where, const char* key,
              std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    bad(join(where, key), "missing required number");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) bad(join(where, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(join(where, key), "must be finite");
  return d;
}

std::uint64_t count(const json& obj, const std::string& where, const char* key,
                    std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    bad(join(where, key), "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string text(const json& obj, const std::string& where, const char* key,
                 const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) bad(join(where, key), "expected a string");
  return obj.at(key).get<std::string>();
}

std::string kind_of(const json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    bad(where, "expected an object with a string 'kind'");
  return j.at("kind").get<std::string>();
}

// Re-throws construction errors with the key path in front.
template <class Fn>
auto at_path(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(where, 0) == 0) throw;
    throw ConfigError(where + ": " + msg);
  }
}

}  // namespace

SmoothMap map_from_json(const json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  const json obj = j.is_object() ? j : json::object({{"kind", kind}});
  return at_path(where, [&]() -> SmoothMap {
    if (kind == "power_law") {
      allow_keys(obj, where, {"kind", "alpha", "xi"});
      return power_law_map(number(obj, where, "alpha"), number(obj, where, "xi", 0.0));
    }
    if (kind == "log") {
      allow_keys(obj, where, {"kind", "xi"});
      return log_map(number(obj, where, "xi", 0.0));
    }
    if (kind == "mobius") {
      allow_keys(obj, where, {"kind", "a", "b", "c", "d", "side"});
      const std::string side = text(obj, where, "side", "right");
      if (side != "right" && side != "left") bad(join(where, "side"), "expected 'right' or 'left'");
      return mobius_map({number(obj, where, "a"), number(obj, where, "b"), number(obj, where, "c"),
                         number(obj, where, "d")},
                        side == "left" ? PoleSide::Left : PoleSide::Right);
    }
    if (kind == "reciprocal") {
      allow_keys(obj, where, {"kind"});
      return reciprocal_map();
    }
    if (kind == "identity") {
      allow_keys(obj, where, {"kind"});
      return power_law_map(1.0, 0.0);
    }
    if (kind == "affine") {
      allow_keys(obj, where, {"kind", "slope", "offset"});
      return affine_map(number(obj, where, "slope"), number(obj, where, "offset", 0.0));
    }
    if (kind == "compose") {
      allow_keys(obj, where, {"kind", "outer", "inner"});
      if (!obj.contains("outer")) bad(join(where, "outer"), "missing");
      if (!obj.contains("inner")) bad(join(where, "inner"), "missing");
      return compose(map_from_json(obj.at("outer"), join(where, "outer")),
                     map_from_json(obj.at("inner"), join(where, "inner")));
    }
    bad(join(where, "kind"), "unknown map kind '" + kind +
                                 "' (expected power_law, log, mobius, reciprocal, identity, "
                                 "affine or compose)");
  });
}

SigmaSpec sigma_from_json(const json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  if (kind != "power") bad(join(where, "kind"), "unknown sigma kind '" + kind + "' (expected power)");
  allow_keys(j, where, {"kind", "c", "p"});
  return at_path(where, [&] { return SigmaSpec::power(number(j, where, "c", 1.0), number(j, where, "p")); });
}

PayoffSpec payoff_from_json(const json& j, const std::string& where) {
  const std::string kind = kind_of(j, where);
  return at_path(where, [&]() -> PayoffSpec {
    if (kind == "forward") {
      if (j.is_object()) allow_keys(j, where, {"kind"});
      return PayoffSpec::forward();
    }
    if (kind == "bond") {
      if (j.is_object()) allow_keys(j, where, {"kind"});
      return PayoffSpec::bond();
    }
    if (kind == "call") {
      allow_keys(j, where, {"kind", "strike"});
      return PayoffSpec::call(number(j, where, "strike"));
    }
    if (kind == "table") {
      allow_keys(j, where, {"kind", "y", "h"});
      auto vec = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_array()) bad(join(where, key), "expected an array");
        std::vector<double> out;
        for (const auto& v : j.at(key)) {
          if (!v.is_number()) bad(join(where, key), "expected numbers");
          out.push_back(v.get<double>());
        }
        return out;
      };
      return PayoffSpec::table(vec("y"), vec("h"));
    }
    bad(join(where, "kind"), "unknown payoff kind '" + kind + "' (expected forward, bond, call or table)");
  });
}

// The output location does not change what is computed, so it stays out of the hash.
std::uint64_t RunConfig::hash() const {
  json keyed = resolved;
  keyed.erase("output");
  return fnv1a64(keyed.dump());
}

RunConfig parse_config(const json& doc) {
  allow_keys(doc, "", {"model", "payoff", "numerics", "schemes", "sequence", "methods",
                       "theta_table", "output", "derived"});
  RunConfig cfg;
  json resolved = doc;
  resolved.erase("derived");

  // Model.
  if (!doc.contains("model")) bad("model", "missing");
  const json& m = doc.at("model");
  allow_keys(m, "model", {"sigma", "f", "s", "x0", "y0", "j0", "T"});
  if (!m.contains("sigma") && !m.contains("f")) bad("model", "needs 'sigma' or 'f'");
  std::optional<SigmaSpec> sigma;
  if (m.contains("sigma")) sigma = sigma_from_json(m.at("sigma"), "model.sigma");
  if (m.contains("f")) {
    cfg.f = map_from_json(m.at("f"), "model.f");
  } else {
    cfg.f = at_path("model.sigma", [&] { return f_from_sigma(*sigma); });
  }
  const SmoothMap& f = *cfg.f;
  if (sigma) {
    cfg.sigma = *sigma;
  } else {
    cfg.sigma = SigmaSpec::from_map(f);
  }
  cfg.s = m.contains("s") ? map_from_json(m.at("s"), "model.s") : reciprocal_map();

  cfg.T = number(m, "model", "T");
  if (!(cfg.T > 0.0)) bad("model.T", "must be positive");
  if (m.contains("x0") && m.contains("y0")) bad("model", "give either x0 or y0, not both");
  if (m.contains("y0")) {
    const double y0 = number(m, "model", "y0");
    if (!(y0 > f.range().lo && y0 < f.range().hi))
      bad("model.y0", "outside the range of " + f.descriptor());
    cfg.x0 = f.inverse(y0);
  } else {
    cfg.x0 = number(m, "model", "x0");
  }
  if (!f.in_domain(cfg.x0)) bad("model.x0", "outside the domain of " + f.descriptor());
  cfg.j0 = number(m, "model", "j0");
  if (!(cfg.j0 > 0.0 && cfg.j0 <= cfg.x0)) {
    bad("model.j0", "must satisfy 0 < j0 <= x0 (x0 = " + format_double(cfg.x0) +
                        ", j0 = " + format_double(cfg.j0) + ")");
  }
  if (!f.in_domain(cfg.j0)) bad("model.j0", "outside the domain of " + f.descriptor());
  if (sigma) {
    const double lhs = std::abs(f.d1(cfg.x0));
    const double rhs = (*sigma)(f(cfg.x0));
    if (std::abs(lhs - rhs) > 1e-8 * std::max(1.0, rhs))
      bad("model", "f and sigma disagree: |f'(x0)| = " + format_double(lhs) +
                       " but sigma(f(x0)) = " + format_double(rhs));
  }

  // Payoff.
  if (!doc.contains("payoff")) bad("payoff", "missing");
  cfg.payoff = payoff_from_json(doc.at("payoff"), "payoff");

  // Numerics.
  const json num = doc.contains("numerics") ? doc.at("numerics") : json::object();
  allow_keys(num, "numerics", {"paths", "steps", "seed", "monitoring", "space_intervals", "spacing",
                               "theta_weight", "theta_nodes", "far", "process", "dump_paths"});
  cfg.mc.n_paths = count(num, "numerics", "paths", 100000);
  if (cfg.mc.n_paths < 2) bad("numerics.paths", "need at least 2");
  cfg.mc.steps = count(num, "numerics", "steps", 2048);
  if (cfg.mc.steps < 1) bad("numerics.steps", "need at least 1");
  cfg.mc.seed = count(num, "numerics", "seed", 1);
  const std::string mon = text(num, "numerics", "monitoring", "bridge");
  if (mon == "bridge") {
    cfg.mc.monitoring = Monitoring::Bridge;
  } else if (mon == "discrete") {
    cfg.mc.monitoring = Monitoring::Discrete;
  } else {
    bad("numerics.monitoring", "expected 'bridge' or 'discrete'");
  }
  cfg.grid.intervals = count(num, "numerics", "space_intervals", 800);
  if (cfg.grid.intervals < 3) bad("numerics.space_intervals", "need at least 3");
  cfg.grid.steps = cfg.mc.steps;
  cfg.grid.spacing = at_path("numerics.spacing", [&] {
    return parse_spacing(text(num, "numerics", "spacing", "geometric"));
  });
  cfg.grid.theta_weight = number(num, "numerics", "theta_weight", 1.0);
  if (!(cfg.grid.theta_weight >= 0.0 && cfg.grid.theta_weight <= 1.0))
    bad("numerics.theta_weight", "must lie in [0, 1]");
  cfg.theta_nodes = count(num, "numerics", "theta_nodes", cfg.mc.steps);
  if (cfg.theta_nodes < 1) bad("numerics.theta_nodes", "need at least 1");
  cfg.far = number(num, "numerics", "far", cfg.x0 - cfg.j0 + 8.0 * std::sqrt(cfg.T));
  if (!(cfg.far > cfg.x0 - cfg.j0)) bad("numerics.far", "must exceed x0 - j0");
  const std::string proc = text(num, "numerics", "process", "skorokhod");
  if (proc == "skorokhod") {
    cfg.process = ProcessKind::Skorokhod;
  } else if (proc == "drifted") {
    cfg.process = ProcessKind::Drifted;
  } else if (proc == "wiener") {
    cfg.process = ProcessKind::Wiener;
  } else if (proc == "bessel3_dual") {
    cfg.process = ProcessKind::Bessel3Dual;
  } else {
    bad("numerics.process", "expected skorokhod, drifted, wiener or bessel3_dual");
  }
  cfg.dump_paths = count(num, "numerics", "dump_paths", 0);

  // Experiment lists.
  if (doc.contains("schemes")) {
    const json& s = doc.at("schemes");
    if (!s.is_array()) bad("schemes", "expected an array of scheme names");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string where = "schemes[" + std::to_string(i) + "]";
      if (!s[i].is_string()) bad(where, "expected a string");
      at_path(where, [&] { return parse_family(s[i].get<std::string>()); });
      cfg.schemes.push_back(s[i].get<std::string>());
    }
  } else {
    cfg.schemes = {"fundraiser", "neumann_cap", "tapered_terminal", "transformed_cauchy"};
  }
  if (doc.contains("sequence")) {
    const json& s = doc.at("sequence");
    if (!s.is_array() || s.empty()) bad("sequence", "expected a nonempty array of floors");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string where = "sequence[" + std::to_string(i) + "]";
      if (!s[i].is_number()) bad(where, "expected a number");
      const double v = s[i].get<double>();
      if (!(v > 0.0 && v <= cfg.x0)) bad(where, "floor must satisfy 0 < j <= x0");
      if (!f.in_domain(v)) bad(where, "outside the domain of " + f.descriptor());
      if (i > 0 && !(v < cfg.sequence.back())) bad(where, "floors must be strictly decreasing");
      cfg.sequence.push_back(v);
    }
  } else {
    cfg.sequence = {cfg.j0};
  }
  if (doc.contains("methods")) {
    const json& s = doc.at("methods");
    if (!s.is_array() || s.empty()) bad("methods", "expected a nonempty array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string where = "methods[" + std::to_string(i) + "]";
      if (!s[i].is_string() || (s[i] != "pde" && s[i] != "mc")) bad(where, "expected 'pde' or 'mc'");
      cfg.methods.push_back(s[i].get<std::string>());
    }
  } else {
    cfg.methods = {"pde"};
  }
  if (doc.contains("theta_table")) {
    if (!doc.at("theta_table").is_string()) bad("theta_table", "expected a path");
    cfg.theta_table = doc.at("theta_table").get<std::string>();
  }
  cfg.out_dir = text(doc, "", "output", "out");

  // Resolved echo: every default spelled out.
  json& rn = resolved["numerics"];
  rn["paths"] = cfg.mc.n_paths;
  rn["steps"] = cfg.mc.steps;
  rn["seed"] = cfg.mc.seed;
  rn["monitoring"] = mon;
  rn["space_intervals"] = cfg.grid.intervals;
  rn["spacing"] = std::string(spacing_name(cfg.grid.spacing));
  rn["theta_weight"] = cfg.grid.theta_weight;
  rn["theta_nodes"] = cfg.theta_nodes;
  rn["far"] = cfg.far;
  rn["process"] = proc;
  rn["dump_paths"] = cfg.dump_paths;
  resolved["schemes"] = cfg.schemes;
  resolved["sequence"] = cfg.sequence;
  resolved["methods"] = cfg.methods;
  resolved["output"] = cfg.out_dir.string();
  cfg.resolved = resolved;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

// ---------------------------------------------------------------------------------------
// Oracles for the reference models

std::optional<ModelOracle> model_oracle(const SmoothMap& f, const PayoffSpec& payoff, double x0,
                                        double j0, double T) {
  const std::string d = f.descriptor();
  const bool recip = d == power_law_map(-1.0, 0.0).descriptor() || d == reciprocal_map().descriptor();
  const bool brownian =
      d == power_law_map(1.0, 0.0).descriptor() || d == affine_map(1.0, 0.0).descriptor();
  const bool fwd = payoff.kind() == PayoffSpec::Kind::Forward;
  const bool bond = payoff.kind() == PayoffSpec::Kind::Bond;
  if (!(recip || brownian) || !(fwd || bond)) return std::nullopt;
  ModelOracle o;
  if (recip) {
    o.model = "reciprocal_bessel";
    if (fwd) {
      o.investor = forward_recip_bessel_investor(x0, T);
      const auto split = forward_recip_bessel_fundraiser_split(x0, j0, T);
      o.fundraiser = split.total();
      o.phi = split.phi;
      o.psi = split.psi;
    } else {
      o.investor = 1.0;
      o.fundraiser = 1.0;
    }
  } else {
    o.model = "brownian";
    if (fwd) {
      o.investor = forward_bm_investor(x0, T);
      o.fundraiser = forward_bm_fundraiser(x0, j0, T);
    } else {
      o.investor = bond_bm(x0, T);
      o.fundraiser = 1.0;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------------------
// Runs

namespace {

std::string cell(double v) { return format_double(v); }
std::string cell(std::optional<double> v) { return v ? format_double(*v) : std::string(); }

void write_resolved(const RunConfig& cfg) {
  json echo = cfg.resolved;
  echo["derived"] = {{"f", cfg.f->descriptor()},
                     {"sigma", cfg.sigma.descriptor()},
                     {"s", cfg.s->descriptor()},
                     {"x0", cfg.x0},
                     {"y0", cfg.y0()},
                     {"config_hash", hex64(cfg.hash())}};
  write_text(cfg.out_dir / "config.resolved.json", echo.dump(2) + "\n");
}

void emit(const RunConfig& cfg, Report& r, const std::string& name, const json& timing = {}) {
  write_resolved(cfg);
  const auto path = cfg.out_dir / name;
  write_text(path, report_csv(r, cfg.hash()));
  r.files.push_back(cfg.out_dir / "config.resolved.json");
  r.files.push_back(path);
  if (!timing.is_null()) {
    write_text(path.string() + ".meta.json", timing.dump(2) + "\n");
    r.files.push_back(path.string() + ".meta.json");
  }
}

std::vector<double> theta_taus(const RunConfig& cfg) {
  std::vector<double> taus(cfg.theta_nodes + 1);
  for (std::size_t k = 0; k <= cfg.theta_nodes; ++k)
    taus[k] = cfg.T * static_cast<double>(k) / static_cast<double>(cfg.theta_nodes);
  taus.back() = cfg.T;
  return taus;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

struct PdeValue {
  double value;
  double std_error;
  double corner_defect;
};

PdeValue fundraiser_pde(const RunConfig& cfg, double j, const ThetaTable& theta) {
  const SchemeKind scheme = scheme::Fundraiser{j, theta, cfg.far};
  GridPolicy pol = cfg.grid;
  pol.snap = {cfg.y0()};
  if (cfg.payoff.kind() == PayoffSpec::Kind::Call) pol.snap.push_back(cfg.payoff.strike());
  const SpaceGrid grid = grid_for(scheme, cfg.sigma, pol);
  if (!(cfg.y0() >= grid.lo() && cfg.y0() <= grid.hi()))
    throw ConfigError("model: y0 = " + format_double(cfg.y0()) + " lies outside the PDE domain");
  const PdeSolution sol = solve(cfg.sigma, cfg.payoff, cfg.T, scheme, grid,
                                TimeGrid::uniform(cfg.T, cfg.grid.steps), cfg.grid.theta_weight);
  return {sol.initial_value(cfg.y0()), sol.initial_stderr(cfg.y0()), sol.corner_defect};
}

}  // namespace

std::string report_csv(const Report& r, std::optional<std::uint64_t> hash) {
  std::string out;
  if (hash) out += "# config_hash=" + hex64(*hash) + "\n";
  for (std::size_t i = 0; i < r.header.size(); ++i) out += (i ? "," : "") + r.header[i];
  out += "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

ThetaTable theta_for(const RunConfig& cfg, double j) {
  if (cfg.theta_table) {
    ThetaTable t = read_theta_table(*cfg.theta_table);
    const auto want = theta_key_hash(cfg.f->descriptor(), j, cfg.payoff.descriptor());
    if (t.key_hash() != want) {
      throw ConfigError("theta_table: " + cfg.theta_table->string() + " was built for (" +
                        t.map_descriptor + ", j = " + format_double(t.j) + ", " +
                        t.payoff_descriptor + ") [hash " + hex64(t.key_hash()) +
                        "], this run needs (" + cfg.f->descriptor() + ", j = " + format_double(j) +
                        ", " + cfg.payoff.descriptor() + ") [hash " + hex64(want) + "]");
    }
    if (t.horizon() < cfg.T * (1.0 - 1e-12)) {
      throw ConfigError("theta_table: covers tau up to " + format_double(t.horizon()) +
                        " but T = " + format_double(cfg.T) + "; run `theta` with this config first");
    }
    return t;
  }
  const auto taus = theta_taus(cfg);
  return estimate_theta(*cfg.f, j, taus, cfg.payoff, cfg.mc);
}

Report run_theta(const RunConfig& cfg) {
  const ThetaTable t = estimate_theta(*cfg.f, cfg.j0, theta_taus(cfg), cfg.payoff, cfg.mc);
  write_resolved(cfg);
  const auto path = cfg.out_dir / "theta.csv";
  write_theta_table(t, path);
  Report r;
  r.header = {"tau", "theta", "stderr"};
  for (std::size_t i = 0; i < t.taus.size(); ++i)
    r.rows.push_back({cell(t.taus[i]), cell(t.theta[i]), cell(t.std_error[i])});
  r.files = {cfg.out_dir / "config.resolved.json", path, path.string() + ".meta.json"};
  std::ostringstream s;
  s << "Theta(tau, j = " << cfg.j0 << ") for " << cfg.f->descriptor() << ", payoff "
    << cfg.payoff.descriptor() << "\n"
    << "  tau = 0: " << fixed(t.theta.front()) << " (exact)\n"
    << "  tau = " << cfg.T << ": " << fixed(t.theta.back()) << " +- " << fixed(t.std_error.back())
    << "\n  table: " << path.string() << " (key hash " << hex64(t.key_hash()) << ")\n";
  r.summary = s.str();
  return r;
}

Report run_price(const RunConfig& cfg) {
  const SmoothMap& f = *cfg.f;
  const FundraiserMc mc = price_fundraiser_mc(f, cfg.x0, cfg.j0, cfg.T, cfg.payoff, cfg.mc);
  const ThetaTable theta = theta_for(cfg, cfg.j0);
  if (!cfg.theta_table) write_theta_table(theta, cfg.out_dir / "theta.csv");
  const PdeValue pde = fundraiser_pde(cfg, cfg.j0, theta);
  const auto oracle = model_oracle(f, cfg.payoff, cfg.x0, cfg.j0, cfg.T);

  Report r;
  r.header = {"quantity", "value", "stderr"};
  r.rows.push_back({"mc_price", cell(mc.price.mean), cell(mc.price.std_error)});
  r.rows.push_back({"mc_phi", cell(mc.phi.mean), cell(mc.phi.std_error)});
  r.rows.push_back({"mc_psi", cell(mc.psi.mean), cell(mc.psi.std_error)});
  r.rows.push_back({"mc_contact_fraction", cell(mc.contact_fraction), ""});
  r.rows.push_back({"pde_price", cell(pde.value), cell(pde.std_error)});
  if (oracle) {
    r.rows.push_back({"oracle_fundraiser", cell(oracle->fundraiser), "0"});
    if (oracle->phi) r.rows.push_back({"oracle_phi", cell(oracle->phi), "0"});
    if (oracle->psi) r.rows.push_back({"oracle_psi", cell(oracle->psi), "0"});
    r.rows.push_back({"oracle_investor", cell(oracle->investor), "0"});
  }
  emit(cfg, r, "price.csv");
  if (!cfg.theta_table) {
    r.files.push_back(cfg.out_dir / "theta.csv");
  }

  std::ostringstream s;
  s << "Fundraiser price of " << cfg.payoff.descriptor() << " under " << f.descriptor()
    << "\n  x0 = " << cfg.x0 << " (y0 = " << cfg.y0() << "), j0 = " << cfg.j0 << ", T = " << cfg.T
    << "\n  Monte Carlo : " << fixed(mc.price.mean) << " +- " << fixed(mc.price.std_error)
    << "  (phi " << fixed(mc.phi.mean) << ", psi " << fixed(mc.psi.mean) << ")"
    << "\n  PDE         : " << fixed(pde.value) << " +- " << fixed(pde.std_error)
    << " (boundary noise)";
  if (oracle) {
    if (oracle->fundraiser) s << "\n  closed form : " << fixed(*oracle->fundraiser);
    s << "\n  investor    : " << fixed(oracle->investor) << " (" << oracle->model << ")";
  }
  s << "\n";
  r.summary = s.str();
  return r;
}

Report run_simulate(const RunConfig& cfg) {
  const SmoothMap& f = *cfg.f;
  const TimeGrid grid = TimeGrid::uniform(cfg.T, cfg.mc.steps);
  SimOptions opt;
  opt.monitoring = cfg.mc.monitoring;
  auto simulate = [&](std::size_t i) {
    switch (cfg.process) {
      case ProcessKind::Skorokhod:
        return simulate_skorokhod(f, cfg.x0, cfg.j0, grid, cfg.mc.seed, i, opt);
      case ProcessKind::Drifted: return simulate_drifted(f, cfg.x0, grid, cfg.mc.seed, i, opt);
      case ProcessKind::Wiener: return simulate_wiener(cfg.x0, grid, cfg.mc.seed, i);
      case ProcessKind::Bessel3Dual:
        return simulate_bessel3_dual(cfg.x0, cfg.j0, grid, cfg.mc.seed, i, opt);
    }
    throw ConfigError("numerics.process: unsupported");
  };
  const ColumnStats stats = accumulate_paths(cfg.mc.n_paths, 5, [&](std::size_t i, std::span<double> row) {
    const PathBundle p = simulate(i);
    const double x = p.x.back();
    row[0] = x;
    row[1] = x * x;
    row[2] = p.jstar.empty() ? std::numeric_limits<double>::quiet_NaN() : p.jstar.back();
    row[3] = p.truncated() || !f.in_domain(x) ? 0.0 : cfg.payoff(f(x));
    row[4] = p.truncated() ? 1.0 : 0.0;
  });
  Report r;
  r.header = {"functional", "mean", "stderr"};
  const char* names[] = {"x_T", "x_T_squared", "jstar_T", "payoff_T", "truncated"};
  for (std::size_t k = 0; k < 5; ++k) {
    if (std::isnan(stats.mean[k])) continue;
    r.rows.push_back({names[k], cell(stats.mean[k]), cell(stats.std_error[k])});
  }
  for (std::size_t i = 0; i < std::min(cfg.dump_paths, cfg.mc.n_paths); ++i) {
    const PathBundle p = simulate(i);
    std::string csv = "t,X,Jstar\n";
    for (std::size_t n = 0; n < p.x.size(); ++n) {
      csv += cell(p.grid[n]) + "," + cell(p.x[n]) + "," +
             (p.jstar.empty() ? std::string() : cell(p.jstar[n])) + "\n";
    }
    std::string name = std::to_string(i);
    name = "path_" + std::string(6 - std::min<std::size_t>(6, name.size()), '0') + name + ".csv";
    write_text(cfg.out_dir / "paths" / name, csv);
    r.files.push_back(cfg.out_dir / "paths" / name);
  }
  emit(cfg, r, "simulate.csv");
  std::ostringstream s;
  s << "Simulated " << cfg.mc.n_paths << " paths, " << cfg.mc.steps << " steps, seed "
    << cfg.mc.seed << "\n";
  for (const auto& row : r.rows) s << "  " << row[0] << " = " << row[1] << " +- " << row[2] << "\n";
  r.summary = s.str();
  return r;
}

Report run_compare_schemes(const RunConfig& cfg) {
  const SmoothMap& f = *cfg.f;
  if (f.sign() > 0) {
    throw ConfigError("compare-schemes: the rival schemes need a decreasing price map (a cap in "
                      "price space); " + f.descriptor() + " is increasing");
  }
  Report r;
  r.header = {"scheme", "j", "cap", "value", "stderr", "corner_defect"};
  json timing = json::array();
  std::ostringstream s;
  s << "Scheme comparison at y0 = " << cfg.y0() << ", T = " << cfg.T << ", payoff "
    << cfg.payoff.descriptor() << "\n";
  const auto oracle = model_oracle(f, cfg.payoff, cfg.x0, cfg.j0, cfg.T);
  for (double j : cfg.sequence) {
    const double cap = f(j);
    GridPolicy pol = cfg.grid;
    pol.snap = {cfg.y0()};
    if (cfg.payoff.kind() == PayoffSpec::Kind::Call) pol.snap.push_back(cfg.payoff.strike());
    for (const auto& name : cfg.schemes) {
      const auto start = std::chrono::steady_clock::now();
      const SchemeFamily fam = parse_family(name);
      SchemeKind scheme;
      switch (fam) {
        case SchemeFamily::Fundraiser: scheme = scheme::Fundraiser{j, theta_for(cfg, j), cfg.far}; break;
        case SchemeFamily::NeumannCap: scheme = scheme::NeumannCap{cap}; break;
        case SchemeFamily::TaperedTerminal: scheme = scheme::TaperedTerminal{cap}; break;
        case SchemeFamily::TransformedCauchy: scheme = scheme::TransformedCauchy{cap}; break;
        case SchemeFamily::NaiveCap: scheme = scheme::NaiveCap{cap}; break;
      }
      const SpaceGrid grid = grid_for(scheme, cfg.sigma, pol);
      const PdeSolution sol = solve(cfg.sigma, cfg.payoff, cfg.T, scheme, grid,
                                    TimeGrid::uniform(cfg.T, cfg.grid.steps), cfg.grid.theta_weight);
      const double v = sol.initial_value(cfg.y0());
      const double se = sol.initial_stderr(cfg.y0());
      r.rows.push_back({name, cell(j), cell(cap), cell(v), cell(se), cell(sol.corner_defect)});
      timing.push_back({{"scheme", name},
                        {"j", j},
                        {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}});
      s << "  j = " << j << " (cap " << cap << ")  " << name << ": " << fixed(v)
        << "  corner defect " << sol.corner_defect << "\n";
    }
  }
  if (oracle) s << "  investor closed form: " << fixed(oracle->investor) << "\n";
  emit(cfg, r, "compare_schemes.csv", json{{"timing", timing}});
  r.summary = s.str();
  return r;
}

Report run_convergence(const RunConfig& cfg) {
  if (cfg.theta_table && cfg.sequence.size() > 1)
    throw ConfigError("theta_table: a stored table covers one floor; drop it for a j sequence");
  const bool use_pde = std::find(cfg.methods.begin(), cfg.methods.end(), "pde") != cfg.methods.end();
  const bool use_mc = std::find(cfg.methods.begin(), cfg.methods.end(), "mc") != cfg.methods.end();
  Report r;
  r.header = {"j", "pde_value", "pde_stderr", "pde_difference", "mc_value", "mc_stderr",
              "mc_difference", "oracle_fundraiser", "oracle_investor", "investor_gap"};
  std::optional<double> prev_pde, prev_mc;
  std::ostringstream s;
  s << "Convergence in j for " << cfg.payoff.descriptor() << " under " << cfg.f->descriptor()
    << " at y0 = " << cfg.y0() << "\n";
  for (double j : cfg.sequence) {
    std::optional<PdeValue> pde;
    std::optional<McEstimate> mc;
    if (use_pde) pde = fundraiser_pde(cfg, j, theta_for(cfg, j));
    if (use_mc) mc = price_fundraiser_mc(*cfg.f, cfg.x0, j, cfg.T, cfg.payoff, cfg.mc).price;
    const auto oracle = model_oracle(*cfg.f, cfg.payoff, cfg.x0, j, cfg.T);
    const std::optional<double> best =
        pde ? std::optional<double>(pde->value) : (mc ? std::optional<double>(mc->mean) : std::nullopt);
    std::optional<double> gap;
    if (oracle && best) gap = (oracle->investor - *best) / oracle->investor;
    auto diff = [](std::optional<double> cur, std::optional<double> prev) -> std::string {
      return cur && prev ? cell(*cur - *prev) : std::string();
    };
    const std::optional<double> pv = pde ? std::optional<double>(pde->value) : std::nullopt;
    const std::optional<double> mv = mc ? std::optional<double>(mc->mean) : std::nullopt;
    r.rows.push_back({cell(j), cell(pv), pde ? cell(pde->std_error) : "", diff(pv, prev_pde),
                      cell(mv), mc ? cell(mc->std_error) : "", diff(mv, prev_mc),
                      oracle ? cell(oracle->fundraiser) : "",
                      oracle ? cell(oracle->investor) : "", cell(gap)});
    s << "  j = " << j;
    if (pde) s << "  pde " << fixed(pde->value);
    if (mc) s << "  mc " << fixed(mc->mean) << " +- " << fixed(mc->std_error);
    if (oracle && oracle->fundraiser) s << "  closed form " << fixed(*oracle->fundraiser);
    if (gap) s << "  gap to investor " << fixed(100.0 * *gap, 3) << "%";
    s << "\n";
    prev_pde = pv;
    prev_mc = mv;
  }
  emit(cfg, r, "convergence.csv");
  r.summary = s.str();
  return r;
}

Report run_oracle(const OracleRequest& req) {
  Report r;
  r.header = {"case", "x", "j", "T", "value"};
  std::ostringstream s;
  const auto& cases = req.cases.empty() ? all_oracles() : req.cases;
  for (OracleCase c : cases) {
    const double v = evaluate_oracle(c, req.x, req.j, req.T);
    r.rows.push_back({std::string(oracle_name(c)), cell(req.x),
                      oracle_uses_floor(c) ? cell(req.j) : "", cell(req.T), cell(v)});
  }
  r.summary = report_csv(r, std::nullopt);
  return r;
}

}  // namespace bubblekit
