// ============================================================================
// config.hpp -- JSON scenario configuration for the CLI.
//
// The config file mirrors the domain types:
//   {
//     "seed": 42,
//     "source":  { "mode": "pulsed", "mean_photons_per_pulse": 1.64,
//                  "pulse_interval": 0.05, "n_pulses": 100000 },
//     "apd":     { "mean_gain": 10.8, "ionization_ratio": 0.006,
//                  "quantum_efficiency": 0.61, "dark_rate": 0.0,
//                  "gain_model": "gamma_variance",
//                  "excess_noise_override": 1.02 },
//     "readout": { "read_noise": 7, "window": 0.04, "sample_interval": 0.05,
//                  "feedback_capacitance": 1e-12 },
//     "emit":    ["charges", "histogram", "summary"]
//   }
// Missing or ill-typed required keys raise ConfigError naming the dotted path.
// ============================================================================
#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "apdsim/core.hpp"

namespace apdsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Scenario scenario;
  std::string outputs = ".";
  std::set<std::string> emit = {"charges", "histogram", "summary"};
};

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj,
                                         const std::string& path,
                                         const std::string& key) {
  if (!obj.is_object() || !obj.contains(key))
    throw ConfigError("missing required key: " +
                      (path.empty() ? key : path + "." + key));
  return obj.at(key);
}

inline double get_number(const nlohmann::json& obj, const std::string& path,
                         const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number())
    throw ConfigError("expected a number at: " + path + "." + key);
  return obj.at(key).get<double>();
}

inline SourceMode parse_source_mode(const std::string& s) {
  if (s == "pulsed") return SourceMode::pulsed;
  if (s == "continuum") return SourceMode::continuum;
  if (s == "dark") return SourceMode::dark;
  throw ConfigError("source.mode must be one of pulsed|continuum|dark, got '" +
                    s + "'");
}

inline GainModel parse_gain_model(const std::string& s) {
  if (s == "deterministic") return GainModel::deterministic;
  if (s == "gamma_variance") return GainModel::gamma_variance;
  if (s == "branching") return GainModel::branching;
  throw ConfigError(
      "apd.gain_model must be one of deterministic|gamma_variance|branching, got '" +
      s + "'");
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  const auto& src = detail::require_key(j, "", "source");
  s.source.mode = detail::parse_source_mode(
      detail::require_key(src, "source", "mode").get<std::string>());
  if (s.source.mode == SourceMode::pulsed)
    s.source.mean_photons_per_pulse =
        detail::require_key(src, "source", "mean_photons_per_pulse").get<double>();
  else
    s.source.mean_photons_per_pulse =
        detail::get_number(src, "source", "mean_photons_per_pulse", 0.0);
  s.source.pulse_interval =
      detail::get_number(src, "source", "pulse_interval", 0.05);
  if (src.contains("pulse_width"))
    s.source.pulse_width = src.at("pulse_width").get<double>();
  s.source.continuum_rate =
      detail::get_number(src, "source", "continuum_rate", 0.0);
  s.source.n_pulses =
      detail::require_key(src, "source", "n_pulses").get<std::int64_t>();

  const auto& apd = detail::require_key(j, "", "apd");
  s.apd.mean_gain = detail::require_key(apd, "apd", "mean_gain").get<double>();
  s.apd.ionization_ratio =
      detail::get_number(apd, "apd", "ionization_ratio", 0.006);
  s.apd.quantum_efficiency =
      detail::get_number(apd, "apd", "quantum_efficiency", 1.0);
  s.apd.dark_rate = detail::get_number(apd, "apd", "dark_rate", 0.0);
  if (apd.contains("dark_multiplied"))
    s.apd.dark_multiplied = apd.at("dark_multiplied").get<bool>();
  if (apd.contains("gain_model"))
    s.apd.gain_model =
        detail::parse_gain_model(apd.at("gain_model").get<std::string>());
  if (apd.contains("excess_noise_override"))
    s.apd.excess_noise_override = apd.at("excess_noise_override").get<double>();

  if (j.contains("readout")) {
    const auto& rd = j.at("readout");
    s.readout.read_noise = detail::get_number(rd, "readout", "read_noise", 7.0);
    s.readout.window = detail::get_number(rd, "readout", "window", 0.04);
    s.readout.sample_interval =
        detail::get_number(rd, "readout", "sample_interval", 0.05);
    s.readout.feedback_capacitance =
        detail::get_number(rd, "readout", "feedback_capacitance", 1e-12);
    s.readout.drift_rate = detail::get_number(rd, "readout", "drift_rate", 0.0);
    s.readout.drift_walk = detail::get_number(rd, "readout", "drift_walk", 0.0);
  }

  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.histogram_bin_width = detail::get_number(j, "", "histogram_bin_width", 5.0);
  return s;
}

inline nlohmann::ordered_json scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  auto& src = j["source"];
  src["mode"] = s.source.mode == SourceMode::pulsed      ? "pulsed"
                : s.source.mode == SourceMode::continuum ? "continuum"
                                                         : "dark";
  src["mean_photons_per_pulse"] = s.source.mean_photons_per_pulse;
  src["pulse_interval"] = s.source.pulse_interval;
  if (s.source.pulse_width) src["pulse_width"] = *s.source.pulse_width;
  src["continuum_rate"] = s.source.continuum_rate;
  src["n_pulses"] = s.source.n_pulses;
  auto& apd = j["apd"];
  apd["mean_gain"] = s.apd.mean_gain;
  apd["ionization_ratio"] = s.apd.ionization_ratio;
  apd["quantum_efficiency"] = s.apd.quantum_efficiency;
  apd["dark_rate"] = s.apd.dark_rate;
  apd["dark_multiplied"] = s.apd.dark_multiplied;
  apd["gain_model"] = s.apd.gain_model == GainModel::deterministic ? "deterministic"
                      : s.apd.gain_model == GainModel::gamma_variance
                          ? "gamma_variance"
                          : "branching";
  if (s.apd.excess_noise_override)
    apd["excess_noise_override"] = *s.apd.excess_noise_override;
  auto& rd = j["readout"];
  rd["read_noise"] = s.readout.read_noise;
  rd["window"] = s.readout.window;
  rd["sample_interval"] = s.readout.sample_interval;
  rd["feedback_capacitance"] = s.readout.feedback_capacitance;
  rd["drift_rate"] = s.readout.drift_rate;
  rd["drift_walk"] = s.readout.drift_walk;
  j["histogram_bin_width"] = s.histogram_bin_width;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.scenario = scenario_from_json(j);
  if (j.contains("outputs")) cfg.outputs = j.at("outputs").get<std::string>();
  if (j.contains("emit")) {
    cfg.emit.clear();
    for (const auto& e : j.at("emit")) {
      const auto name = e.get<std::string>();
      if (name != "trace" && name != "charges" && name != "histogram" &&
          name != "summary")
        throw ConfigError("emit: unknown artifact '" + name + "'");
      cfg.emit.insert(name);
    }
  }
  return cfg;
}

}  // namespace apdsim
