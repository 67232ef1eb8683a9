#include "cli/baselines.hpp"

#include <filesystem>
#include <fstream>

#include "projlab/errors.hpp"
#include "projlab/restriction.hpp"

namespace projlab::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json settings_json(const BaselineSettings& s) {
  return {{"decoupling_K", s.decoupling_K},
          {"decoupling_p", s.decoupling_p},
          {"decoupling_ensembles", s.decoupling_ensembles},
          {"decoupling_seed", s.decoupling_seed},
          {"per_cap", s.per_cap},
          {"strichartz_R", s.strichartz_R},
          {"strichartz_seeds", s.strichartz_seeds},
          {"strichartz_tubes", s.strichartz_tubes},
          {"strichartz_seed", s.strichartz_seed},
          {"strichartz_p", s.strichartz_p}};
}

int existing_version(const std::string& path) {
  std::ifstream in(path);
  if (!in) return 0;
  try {
    return nlohmann::json::parse(in).value("version", 0);
  } catch (const nlohmann::json::exception&) {
    return 0;
  }
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write baseline '" + path + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace

nlohmann::json compute_decoupling_baseline(const BaselineSettings& settings) {
  nlohmann::json entries = nlohmann::json::array();
  for (int K : settings.decoupling_K) {
    const DecouplingEnsemble e = decoupling_ensemble(K, settings.decoupling_p, settings.decoupling_ensembles,
                                                     settings.decoupling_seed, settings.per_cap);
    entries.push_back({{"K", K},
                       {"seeds", e.seeds},
                       {"ratios", e.ratios},
                       {"max", e.max_ratio},
                       {"mean", e.mean_ratio}});
  }
  return {{"format", kBaselineFormat},
          {"kind", "decoupling"},
          {"settings", settings_json(settings)},
          {"entries", entries}};
}

nlohmann::json compute_strichartz_baseline(const BaselineSettings& settings) {
  StrichartzParams params;
  params.R = settings.strichartz_R;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < settings.strichartz_seeds; ++i) {
    const std::uint64_t seed = settings.strichartz_seed + i;
    const PacketEnsemble ens = bush_ensemble(settings.strichartz_tubes, seed, params);
    const StrichartzResult r = strichartz_experiment(ens, settings.strichartz_p);
    entries.push_back({{"seed", seed},
                       {"ratio", r.ratio},
                       {"lhs", r.lhs},
                       {"rhs", r.rhs},
                       {"incidence", r.incidence},
                       {"cubes", r.cubes}});
  }
  return {{"format", kBaselineFormat},
          {"kind", "strichartz"},
          {"settings", settings_json(settings)},
          {"entries", entries}};
}

BaselineSettings settings_from_json(const nlohmann::json& j) {
  BaselineSettings s;
  try {
    s.decoupling_K = j.at("decoupling_K").get<std::vector<int>>();
    s.decoupling_p = j.at("decoupling_p").get<double>();
    s.decoupling_ensembles = j.at("decoupling_ensembles").get<std::size_t>();
    s.decoupling_seed = j.at("decoupling_seed").get<std::uint64_t>();
    s.per_cap = j.at("per_cap").get<int>();
    s.strichartz_R = j.at("strichartz_R").get<double>();
    s.strichartz_seeds = j.at("strichartz_seeds").get<std::size_t>();
    s.strichartz_tubes = j.at("strichartz_tubes").get<std::size_t>();
    s.strichartz_seed = j.at("strichartz_seed").get<std::uint64_t>();
    s.strichartz_p = j.at("strichartz_p").get<double>();
  } catch (const nlohmann::json::exception& err) {
    throw PreconditionError(std::string("baseline settings are incomplete: ") + err.what());
  }
  return s;
}

std::string decoupling_baseline_path(const std::string& dir) {
  return (fs::path(dir) / "decoupling.json").string();
}

std::string strichartz_baseline_path(const std::string& dir) {
  return (fs::path(dir) / "strichartz.json").string();
}

nlohmann::json read_baseline(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("baseline '" + path + "' not found; run regen-baselines");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& err) {
    throw PreconditionError("baseline '" + path + "' is not valid JSON: " + err.what());
  }
  if (doc.value("format", -1) != kBaselineFormat) {
    throw PreconditionError("baseline '" + path + "' has format " + std::to_string(doc.value("format", -1)) +
                            ", expected " + std::to_string(kBaselineFormat));
  }
  if (doc.value("kind", std::string{}) != kind) {
    throw PreconditionError("baseline '" + path + "' is not a " + kind + " baseline");
  }
  return doc;
}

int write_baselines(const std::string& dir, const BaselineSettings& settings, bool force) {
  const std::string dec_path = decoupling_baseline_path(dir);
  const std::string str_path = strichartz_baseline_path(dir);
  const bool exists = fs::exists(dec_path) || fs::exists(str_path);
  if (exists && !force) {
    throw PreconditionError("baselines already exist in '" + dir + "'; pass --force to overwrite");
  }
  const int version = std::max(existing_version(dec_path), existing_version(str_path)) + 1;

  nlohmann::json dec = compute_decoupling_baseline(settings);
  nlohmann::json str = compute_strichartz_baseline(settings);
  dec["version"] = version;
  str["version"] = version;

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create baseline directory '" + dir + "': " + ec.message());
  write_json(dec_path, dec);
  write_json(str_path, str);
  return version;
}

}  // namespace projlab::cli
