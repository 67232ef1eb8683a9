#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "projlab/errors.hpp"
#include "projlab/parallel.hpp"

namespace {

using namespace projlab;
using namespace projlab::cli;

std::string flag_name(std::string param) {
  std::replace(param.begin(), param.end(), '_', '-');
  return "--" + param;
}

std::string param_name(std::string flag) {
  flag.erase(0, flag.find_first_not_of('-'));
  std::replace(flag.begin(), flag.end(), '-', '_');
  return flag;
}

struct Invocation {
  const Command* command = nullptr;
  std::optional<std::string> config;
  std::map<std::string, std::string> flags;
};

// "--key value" and "--key=value" pairs left over after `run --config`.
std::map<std::string, std::string> parse_extras(const Command& command, const std::vector<std::string>& extras) {
  std::map<std::string, std::string> flags;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string key = extras[i];
    if (key.rfind("--", 0) != 0) throw PreconditionError("unexpected argument '" + key + "'");
    std::optional<std::string> value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    }
    const std::string name = param_name(key);
    const auto spec = std::find_if(command.params.begin(), command.params.end(),
                                   [&](const ParamSpec& s) { return s.name == name; });
    if (spec == command.params.end()) throw PreconditionError("unknown option '" + key + "' for " + command.name);
    if (!value) {
      if (spec->type == ParamType::flag) {
        value = "true";
      } else if (i + 1 < extras.size()) {
        value = extras[++i];
      } else {
        throw PreconditionError("option '" + key + "' needs a value");
      }
    }
    flags[name] = *value;
  }
  return flags;
}

int execute(const Invocation& inv) {
  const Command& command = *inv.command;
  const Params params = resolve_params(command.params, inv.config, inv.flags);
  if (const long workers = params.integer("workers"); workers > 0) {
    set_worker_count(static_cast<unsigned>(workers));
  } else if (workers < 0) {
    throw PreconditionError("workers must be non-negative");
  }
  const Outcome outcome = command.run(params);
  const std::string report = make_report(command, params, outcome).dump(2) + "\n";
  if (params.text("out").empty()) {
    std::cout << report;
  } else {
    std::ofstream out(params.text("out"));
    if (!out) throw ResourceError("cannot write report '" + params.text("out") + "'");
    out << report;
  }
  if (!params.text("csv").empty()) write_csv(params.text("csv"), outcome.table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projection and restriction experiments on the light cone", "proj-lab"};
  app.require_subcommand(1);

  Invocation inv;
  std::map<const Command*, std::map<std::string, std::string>> raw;
  std::map<const Command*, std::map<std::string, bool>> switches;
  std::map<const Command*, std::string> config_paths;
  std::vector<std::pair<const Command*, CLI::App*>> subs;

  for (const Command& command : commands()) {
    CLI::App* sub = app.add_subcommand(command.name, command.help);
    for (const ParamSpec& spec : command.params) {
      if (spec.type == ParamType::flag) {
        sub->add_flag(flag_name(spec.name), switches[&command][spec.name], spec.help);
      } else {
        sub->add_option(flag_name(spec.name), raw[&command][spec.name], spec.help)->default_str(spec.fallback);
      }
    }
    sub->add_option("--config", config_paths[&command], "TOML config; flags win");
    subs.emplace_back(&command, sub);
  }

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "run the subcommand named in a TOML config");
  run->add_option("--config", run_config, "TOML config with a subcommand key")->required();
  run->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      inv.command = &find_command(config_subcommand(run_config));
      inv.config = run_config;
      inv.flags = parse_extras(*inv.command, run->remaining());
    } else {
      for (const auto& [command, sub] : subs) {
        if (!sub->parsed()) continue;
        inv.command = command;
        for (const ParamSpec& spec : command->params) {
          const std::string flag = flag_name(spec.name);
          if (sub->count(flag) == 0) continue;
          inv.flags[spec.name] =
              spec.type == ParamType::flag ? (switches[command][spec.name] ? "true" : "false") : raw[command][spec.name];
        }
        if (sub->count("--config") > 0) inv.config = config_paths[command];
      }
    }
    return execute(inv);
  } catch (const ResolutionError& e) {
    std::cerr << "proj-lab: resolution: " << e.what() << "\n";
    return 3;
  } catch (const PreconditionError& e) {
    std::cerr << "proj-lab: precondition: " << e.what() << "\n";
    return 2;
  } catch (const std::bad_alloc&) {
    std::cerr << "proj-lab: resource: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "proj-lab: internal error: " << e.what() << "\n";
    return 1;
  }
}
