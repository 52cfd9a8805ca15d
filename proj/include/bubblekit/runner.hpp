#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bubblekit/boundary.hpp"
#include "bubblekit/closedform.hpp"
#include "bubblekit/pdesolve.hpp"
#include "json.hpp"

namespace bubblekit {

enum class ProcessKind { Skorokhod, Drifted, Wiener, Bessel3Dual };

/// A validated run description. `resolved` holds every key with defaults filled in; its
/// canonical dump, minus the output directory, is what `hash()` covers.
struct RunConfig {
  nlohmann::json resolved;

  SigmaSpec sigma = SigmaSpec::power(1.0, 2.0);
  std::optional<SmoothMap> f;
  std::optional<SmoothMap> s;
  double x0 = 1.0;
  double j0 = 0.5;
  double T = 1.0;
  PayoffSpec payoff = PayoffSpec::forward();

  McOptions mc;
  GridPolicy grid;
  std::size_t theta_nodes = 0;
  double far = 0.0;
  ProcessKind process = ProcessKind::Skorokhod;
  std::size_t dump_paths = 0;
  std::vector<std::string> schemes;
  std::vector<double> sequence;
  std::vector<std::string> methods;
  std::optional<std::filesystem::path> theta_table;
  std::filesystem::path out_dir = "out";

  const SmoothMap& price_map() const { return *f; }
  double y0() const { return (*f)(x0); }
  std::uint64_t hash() const;
};

/// Builds a map from its JSON description, e.g. {"kind": "power_law", "alpha": -1}.
/// `where` is the key path used in diagnostics.
SmoothMap map_from_json(const nlohmann::json& j, const std::string& where);
SigmaSpec sigma_from_json(const nlohmann::json& j, const std::string& where);
PayoffSpec payoff_from_json(const nlohmann::json& j, const std::string& where);

/// Validates and resolves a config document. Throws ConfigError naming the offending key.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Closed-form prices when the model is one of the two reference models.
struct ModelOracle {
  std::string model;
  double investor = 0.0;
  std::optional<double> fundraiser;
  std::optional<double> phi;
  std::optional<double> psi;
};
std::optional<ModelOracle> model_oracle(const SmoothMap& f, const PayoffSpec& payoff, double x0,
                                        double j0, double T);

struct Report {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string summary;
  /// Files written by the run.
  std::vector<std::filesystem::path> files;
};

/// Each run writes `<out>/config.resolved.json` plus its CSV outputs under `out_dir`.
Report run_price(const RunConfig& cfg);
Report run_theta(const RunConfig& cfg);
Report run_simulate(const RunConfig& cfg);
Report run_compare_schemes(const RunConfig& cfg);
Report run_convergence(const RunConfig& cfg);

struct OracleRequest {
  std::vector<OracleCase> cases;
  double x = 1.0;
  double j = 1.0;
  double T = 1.0;
};
Report run_oracle(const OracleRequest& req);

/// Θ for (f, j) with the config's numerics: loaded from `theta_table` when its key hash
/// matches, estimated otherwise.
ThetaTable theta_for(const RunConfig& cfg, double j);

/// CSV text of a report, with a leading `# config_hash=...` line when `hash` is given.
std::string report_csv(const Report& r, std::optional<std::uint64_t> hash);

}  // namespace bubblekit
