#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bubblekit/errors.hpp"
#include "bubblekit/io.hpp"
#include "bubblekit/runner.hpp"
#include "json.hpp"

namespace bk = bubblekit;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> paths;
  std::optional<std::string> out;
  std::optional<std::string> schemes;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_schemes = false) {
  cmd->add_option("-c,--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed (overrides numerics.seed)");
  cmd->add_option("--paths", o.paths, "Monte Carlo paths (overrides numerics.paths)");
  cmd->add_option("-o,--out", o.out, "Output directory (overrides output)");
  if (with_schemes)
    cmd->add_option("--scheme", o.schemes, "Comma-separated scheme list (overrides schemes)");
}

bk::RunConfig resolve(const Overrides& o) {
  json doc;
  try {
    doc = json::parse(bk::read_text(o.config));
  } catch (const json::parse_error& e) {
    throw bk::ConfigError(o.config + ": " + e.what());
  }
  if (!doc.is_object()) throw bk::ConfigError(o.config + ": expected a JSON object");
  if (o.seed) doc["numerics"]["seed"] = *o.seed;
  if (o.paths) doc["numerics"]["paths"] = *o.paths;
  if (o.out) doc["output"] = *o.out;
  if (o.schemes) {
    json list = json::array();
    std::stringstream ss(*o.schemes);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) list.push_back(item);
    doc["schemes"] = list;
  }
  return bk::parse_config(doc);
}

void print(const bk::Report& r) {
  std::cout << r.summary;
  for (const auto& f : r.files) std::cout << "wrote " << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Option pricing under price bubbles: reflected Monte Carlo, boundary PDEs, closed forms"};
  app.require_subcommand(1);

  Overrides o;
  auto* price = app.add_subcommand("price", "Fundraiser price by Monte Carlo and PDE, with oracles");
  add_common(price, o);
  auto* theta = app.add_subcommand("theta", "Estimate and store the boundary curve Theta(tau, j0)");
  add_common(theta, o);
  auto* simulate = app.add_subcommand("simulate", "Simulate paths and summary functionals");
  add_common(simulate, o);
  auto* compare = app.add_subcommand("compare-schemes", "Value the claim under each boundary scheme");
  add_common(compare, o, true);
  auto* conv = app.add_subcommand("convergence", "Fundraiser value along a decreasing floor sequence");
  add_common(conv, o);

  auto* oracle = app.add_subcommand("oracle", "Evaluate closed-form prices");
  std::vector<std::string> cases;
  bk::OracleRequest req;
  std::vector<std::string> names;
  for (auto c : bk::all_oracles()) names.emplace_back(bk::oracle_name(c));
  oracle->add_option("--case", cases, "Oracle case (repeatable; default all)")
      ->check(CLI::IsMember(names));
  oracle->add_option("--x", req.x, "State x")->required();
  oracle->add_option("--j", req.j, "Floor j (fundraiser cases)");
  oracle->add_option("--T", req.T, "Maturity")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*oracle) {
      for (const auto& c : cases) req.cases.push_back(bk::parse_oracle(c));
      std::cout << bk::run_oracle(req).summary;
      return kOk;
    }
    const bk::RunConfig cfg = resolve(o);
    if (*price) print(bk::run_price(cfg));
    if (*theta) print(bk::run_theta(cfg));
    if (*simulate) print(bk::run_simulate(cfg));
    if (*compare) print(bk::run_compare_schemes(cfg));
    if (*conv) print(bk::run_convergence(cfg));
  } catch (const bk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const bk::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kNumeric;
  } catch (const bk::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
