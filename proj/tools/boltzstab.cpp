// Command-line front end: one scenario per invocation.
//
// Exit status: 0 all verdicts true, 1 a verdict failed, 2 parse or precondition
// error, 3 runtime abort.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "boltzstab/errors.hpp"
#include "boltzstab/scenario.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

void add_flags(CLI::App* sub, Args& a) {
  sub->add_option("--config", a.config, "scenario file (JSON)")->required();
  sub->add_option("--out", a.out, "output directory (overrides the config)");
  sub->add_option("--threads", a.threads, "worker cap")->check(CLI::PositiveNumber);
  sub->add_option("--seed", a.seed, "seed (overrides the config)");
}

boltzstab::Scenario load(const Args& a, const std::optional<std::string>& command) {
  boltzstab::Overrides o;
  o.command = command;
  if (a.threads > 0) o.threads = a.threads;
  o.seed = a.seed;
  if (!a.out.empty()) o.output = a.out;
  return boltzstab::apply(boltzstab::load_scenario(a.config), o);
}

int execute(const Args& a, const std::optional<std::string>& command) {
  std::string out_dir = a.out.empty() ? "out" : a.out;
  try {
    const boltzstab::Scenario s = load(a, command);
    out_dir = s.resolved["output"].get<std::string>();
    const boltzstab::Outcome o = boltzstab::run_scenario(s);
    boltzstab::write_outcome(o, out_dir);
    std::cout << boltzstab::verdict_text(o);
    std::cout << "artifacts: " << out_dir << "\n";
    return o.all_passed() ? 0 : 1;
  } catch (const boltzstab::RunAbort& e) {
    std::filesystem::create_directories(out_dir);
    const auto log = std::filesystem::path(out_dir) / "run.log";
    std::ofstream(log) << "runtime abort: " << e.what() << "\n";
    std::cerr << "runtime abort: " << e.what() << "\nsee " << log.string() << "\n";
    return 3;
  } catch (const boltzstab::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const boltzstab::ConfigError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 2;
  } catch (const boltzstab::InapplicableError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return 3;
  }
}

int validate(const Args& a) {
  try {
    const boltzstab::Scenario s = load(a, std::nullopt);
    const auto diags = boltzstab::validate_scenario(s);
    for (const auto& d : diags) std::cout << d.field << ": " << d.message << "\n";
    if (diags.empty()) std::cout << "ok: " << a.config << " (" << s.command() << ")\n";
    return diags.empty() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cout << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boltzstab: homogeneous Boltzmann solver and estimate checks"};
  app.require_subcommand(1);
  Args args;
  const char* names[] = {"run", "validate", "lab", "relax", "stability", "sweep-eps", "propagation"};
  const char* help[] = {"run the command named in the config",
                        "check a config without running it",
                        "inequality lab battery",
                        "relaxation run",
                        "stability pairs",
                        "cutoff sweep over eps",
                        "propagation envelopes"};
  for (int k = 0; k < 7; ++k) add_flags(app.add_subcommand(names[k], help[k]), args);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "validate") return validate(args);
  if (name == "run") return execute(args, std::nullopt);
  return execute(args, name);
}
