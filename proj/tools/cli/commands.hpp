#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/config.hpp"

namespace projlab::cli {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct Outcome {
  nlohmann::json result = nlohmann::json::object();
  Table table;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<ParamSpec> params;  // subcommand parameters plus the common ones
  std::function<Outcome(const Params&)> run;
};

const std::vector<Command>& commands();
// PreconditionError for unknown names.
const Command& find_command(const std::string& name);

inline constexpr const char* kToolVersion = "0.1.0";

// Report envelope: schema, tool version, subcommand, config hash, seed, params, result.
nlohmann::json make_report(const Command& command, const Params& params, const Outcome& outcome);
void write_csv(const std::string& path, const Table& table);

}  // namespace projlab::cli
