#include "cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "projlab/errors.hpp"

namespace projlab::cli {

namespace {

const std::set<std::string> kOutputKeys{"out", "csv", "workers", "config"};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  const auto last = s.find_last_not_of(" \t");
  return first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
}

std::string toml_to_raw(const ParamSpec& spec, const toml::node& node) {
  if (auto v = node.value<bool>(); v && spec.type == ParamType::flag) return *v ? "true" : "false";
  if (auto v = node.value_exact<std::int64_t>()) return std::to_string(*v);
  if (auto v = node.value_exact<double>()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
  }
  if (auto v = node.value_exact<std::string>()) return *v;
  if (const auto* arr = node.as_array()) {
    std::string joined;
    for (const auto& item : *arr) {
      const auto piece = item.value<std::int64_t>();
      if (!piece) throw PreconditionError("config key '" + spec.name + "' expects a list of integers");
      if (!joined.empty()) joined += ",";
      joined += std::to_string(*piece);
    }
    return joined;
  }
  throw PreconditionError("config key '" + spec.name + "' has an unsupported type");
}

toml::table load_toml(const std::string& path) {
  try {
    return toml::parse_file(path);
  } catch (const toml::parse_error& err) {
    std::ostringstream msg;
    msg << "cannot read config '" << path << "': " << err.description();
    throw PreconditionError(msg.str());
  }
}

}  // namespace

const ParamValue& Params::at(const std::string& name) const {
  const auto it = values_.find(name);
  if (it == values_.end()) throw std::logic_error("parameter '" + name + "' is not declared");
  return it->second;
}

long Params::integer(const std::string& name) const { return std::get<long>(at(name)); }
double Params::real(const std::string& name) const { return std::get<double>(at(name)); }
const std::string& Params::text(const std::string& name) const { return std::get<std::string>(at(name)); }
bool Params::flag(const std::string& name) const { return std::get<bool>(at(name)); }

std::vector<long> Params::integer_list(const std::string& name) const {
  std::vector<long> out;
  std::stringstream ss(text(name));
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    piece = trim(piece);
    long v = 0;
    const auto [end, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (ec != std::errc{} || end != piece.data() + piece.size()) {
      throw PreconditionError("parameter '" + name + "' expects a comma-separated integer list");
    }
    out.push_back(v);
  }
  if (out.empty()) throw PreconditionError("parameter '" + name + "' is empty");
  return out;
}

nlohmann::json Params::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, value] : values_) {
    if (!affects_results(name)) continue;
    std::visit([&](const auto& v) { out[name] = v; }, value);
  }
  return out;
}

std::vector<ParamSpec> common_params() {
  return {
      {"seed", ParamType::integer, "7", "random seed recorded in every report"},
      {"out", ParamType::text, "", "JSON report path (stdout when empty)"},
      {"csv", ParamType::text, "", "optional CSV path for plot-ready rows"},
      {"workers", ParamType::integer, "0", "worker threads (0: PROJLAB_WORKERS or hardware)"},
  };
}

bool affects_results(const std::string& name) { return kOutputKeys.count(name) == 0; }

ParamValue parse_value(const ParamSpec& spec, const std::string& raw_in) {
  const std::string raw = trim(raw_in);
  const auto bad = [&](const char* what) {
    return PreconditionError("parameter '" + spec.name + "' expects " + what + ", got '" + raw + "'");
  };
  switch (spec.type) {
    case ParamType::integer: {
      long v = 0;
      const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc{} || end != raw.data() + raw.size()) throw bad("an integer");
      return v;
    }
    case ParamType::real: {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc{} || end != raw.data() + raw.size()) throw bad("a number");
      return v;
    }
    case ParamType::flag:
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw bad("true or false");
    case ParamType::text:
      return raw;
  }
  throw std::logic_error("unhandled parameter type");
}

Params resolve_params(const std::vector<ParamSpec>& specs, const std::optional<std::string>& config_path,
                      const std::map<std::string, std::string>& flags) {
  std::map<std::string, std::string> raw;
  for (const auto& spec : specs) raw[spec.name] = spec.fallback;

  if (config_path) {
    const toml::table table = load_toml(*config_path);
    for (const auto& [key, node] : table) {
      const std::string name(key.str());
      if (name == "subcommand") continue;
      const auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
      if (it == specs.end()) throw PreconditionError("unknown config key '" + name + "'");
      raw[name] = toml_to_raw(*it, node);
    }
  }
  for (const auto& [name, value] : flags) raw[name] = value;

  Params params;
  for (const auto& spec : specs) params.set(spec.name, parse_value(spec, raw.at(spec.name)));
  return params;
}

std::string config_subcommand(const std::string& config_path) {
  const toml::table table = load_toml(config_path);
  const auto name = table["subcommand"].value<std::string>();
  if (!name) throw PreconditionError("config '" + config_path + "' has no 'subcommand' key");
  return *name;
}

std::string config_hash(const std::string& subcommand, const Params& params) {
  const std::string canonical = subcommand + "\n" + params.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace projlab::cli
