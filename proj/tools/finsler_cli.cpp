// Scenario runner for the anisotropic tensor-calculus library. Loads a JSON
// config describing a metric, connections, samples and tasks, executes the
// requested tasks, and writes a deterministic report.
//
// Exit codes: 0 all verification tasks passed, 1 a verification task failed,
// 2 config/schema/usage errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "finsler/tasks.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_path;
  std::string format;
};

int run_command(const Options& opt, const std::string& filter) {
  using namespace finsler;
  namespace fs = std::filesystem;
  try {
    const scenario::ScenarioConfig config =
        scenario::ScenarioConfig::load(opt.config_path);
    const scenario::RunResult result = scenario::run_scenario(config, filter);

    std::string out_path = !opt.out_path.empty() ? opt.out_path : config.output.path;
    std::string format = !opt.format.empty() ? opt.format : config.output.format;
    const std::string payload = format == "csv"
                                    ? scenario::serialize_residual_csv(result.reports)
                                    : result.report_json;

    const fs::path base_dir =
        out_path.empty() ? fs::current_path() : fs::path(out_path).parent_path();
    for (const auto& [name, content] : result.files) {
      const fs::path p = fs::path(name).is_absolute() ? fs::path(name)
                                                      : base_dir / name;
      write_file_atomic(p.string(), content);
    }
    if (out_path.empty()) {
      std::fputs(payload.c_str(), stdout);
    } else {
      write_file_atomic(out_path, payload);
    }
    return result.all_pass ? 0 : 1;
  } catch (const scenario::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anisotropic (Finsler) tensor calculus scenario runner"};
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::string> commands{"run",       "info",      "curvature",
                                          "geodesic",  "transport", "jacobi",
                                          "variation", "verify",    "compare"};
  std::string chosen;
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(
        name, name == "run" ? "execute every task in the config"
                            : "execute the config's '" + name + "' tasks");
    sub->add_option("--config", opt.config_path, "scenario config (JSON)")
        ->required();
    sub->add_option("--out", opt.out_path, "output report path (default: config)");
    sub->add_option("--format", opt.format, "report format: json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run_command(opt, chosen == "run" ? std::string{} : chosen);
}
