#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "boltzstab/estimates.hpp"
#include "boltzstab/inequality_lab.hpp"

namespace boltzstab {

inline constexpr const char* kScenarioVersion = "boltzstab/1";

/// Malformed file or field; `where` is "line N" or a dotted field path.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// A config with every default filled in. `resolved` is what the manifest echoes.
struct Scenario {
  nlohmann::json resolved;
  std::string source;

  std::string command() const { return resolved.at("command").get<std::string>(); }
};

Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::string> command;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
};

/// Applies CLI overrides and re-resolves. A command override must match a set command.
Scenario apply(const Scenario& s, const Overrides& o);

struct Diagnostic {
  std::string field;
  std::string message;
};

/// Structural and precondition checks without running anything.
std::vector<Diagnostic> validate_scenario(const Scenario& s);

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Table {
  std::string name;
  std::string description;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct Outcome {
  std::string command;
  std::vector<Verdict> verdicts;
  std::vector<Table> tables;
  std::vector<std::string> notes;  ///< frozen constants, seeds, regime flags
  nlohmann::json manifest;

  bool all_passed() const;
};

/// Typed views of the resolved blocks.
CollisionKernel kernel_of(const nlohmann::json& block);
GridPtr grid_of(const nlohmann::json& block, int dimension);
QuadratureSpec quadrature_of(const nlohmann::json& block);
InitialData initial_of(const nlohmann::json& block);
Perturbation perturbation_of(const nlohmann::json& block);
SimulationConfig simulation_of(const Scenario& s);

/// Runs the scenario's command. Throws ParseError, ConfigError, InapplicableError or RunAbort.
Outcome run_scenario(const Scenario& s);

/// Writes <name>.csv per table, verdicts.txt and manifest.json.
void write_outcome(const Outcome& o, const std::filesystem::path& dir);

std::string format_number(double x);
std::string csv_text(const Table& t);
std::string verdict_text(const Outcome& o);

}  // namespace boltzstab
