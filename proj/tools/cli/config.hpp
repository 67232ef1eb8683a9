#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace projlab::cli {

enum class ParamType { integer, real, text, flag };

struct ParamSpec {
  std::string name;
  ParamType type;
  std::string fallback;  // default, in flag syntax
  std::string help;
};

using ParamValue = std::variant<long, double, std::string, bool>;

// Resolved, typed parameters of one subcommand.
class Params {
 public:
  void set(const std::string& name, ParamValue value) { values_[name] = std::move(value); }

  long integer(const std::string& name) const;
  double real(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  bool flag(const std::string& name) const;
  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }

  // Integer and real lists written as "4,8,16".
  std::vector<long> integer_list(const std::string& name) const;

  nlohmann::json to_json() const;

 private:
  const ParamValue& at(const std::string& name) const;

  std::map<std::string, ParamValue> values_;
};

// Options shared by every subcommand. They stay out of the config hash except seed.
std::vector<ParamSpec> common_params();
bool affects_results(const std::string& name);

ParamValue parse_value(const ParamSpec& spec, const std::string& raw);

// Merges defaults, then the TOML file (if any), then explicit flags. Unknown TOML
// keys and unreadable files raise PreconditionError.
Params resolve_params(const std::vector<ParamSpec>& specs, const std::optional<std::string>& config_path,
                      const std::map<std::string, std::string>& flags);

// Subcommand named by a config file's `subcommand` key.
std::string config_subcommand(const std::string& config_path);

// FNV-1a 64 of the subcommand and the result-affecting parameters, as 16 hex digits.
std::string config_hash(const std::string& subcommand, const Params& params);

}  // namespace projlab::cli
