// ============================================================================
// apdsim -- command-line front end.
//
// Subcommands:
//   simulate  run a scenario config, emit CSV artifacts + summary.json
//   analyze   excess-noise + KS analysis of a charges CSV
//   limits    print a noise budget / photodetection limit as JSON
//   sweep     parameter grid over gain | n | sigma | k
//
// Exit codes: 0 success, 1 invalid config/flags, 2 I/O failure.
// APDSIM_SEED is used as the seed when neither the config nor --seed gives one.
// ============================================================================
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "apdsim/config.hpp"
#include "apdsim/core.hpp"
#include "apdsim/io.hpp"

namespace {

constexpr const char* kSpecVersion = "1.0";

using apdsim::LimitMode;

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw apdsim::CsvError("cannot open config file: " + path);
  return nlohmann::json::parse(f);
}

std::optional<std::uint64_t> env_seed() {
  if (const char* s = std::getenv("APDSIM_SEED"))
    return std::stoull(s);
  return std::nullopt;
}

LimitMode parse_limit_mode(const std::string& s) {
  if (s == "pulse") return LimitMode::pulse;
  if (s == "continuum_cds") return LimitMode::continuum_cds;
  throw apdsim::ConfigError("mode must be pulse|continuum_cds, got '" + s + "'");
}

nlohmann::ordered_json budget_json(const apdsim::NoiseBudget& b) {
  nlohmann::ordered_json j;
  j["readout_e"] = b.readout_e;
  j["apd_excess_e"] = b.apd_excess_e;
  j["dark_e"] = b.dark_e;
  j["total_e"] = b.total_e;
  j["limit_photons"] = b.limit_photons;
  return j;
}

int cmd_simulate(const std::string& config_path,
                 std::optional<std::uint64_t> seed_flag,
                 std::optional<std::string> out_flag) {
  apdsim::RunConfig cfg = apdsim::run_config_from_json(load_json_file(config_path));
  if (seed_flag) cfg.scenario.seed = *seed_flag;
  else if (auto es = env_seed()) cfg.scenario.seed = *es;
  if (out_flag) cfg.outputs = *out_flag;

  const apdsim::ScenarioResult res = apdsim::run_scenario(cfg.scenario);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.outputs);
  const auto path = [&](const char* name) {
    return (fs::path(cfg.outputs) / name).string();
  };
  if (cfg.emit.count("charges"))
    apdsim::write_charges_csv(res.charges, path("charges.csv"));
  if (cfg.emit.count("histogram"))
    apdsim::write_histogram_csv(res.histogram, path("histogram.csv"));
  if (cfg.emit.count("trace"))
    apdsim::write_trace_csv(res.trace, path("trace.csv"));
  if (cfg.emit.count("summary")) {
    nlohmann::ordered_json j;
    j["spec_version"] = kSpecVersion;
    j["seed"] = cfg.scenario.seed;
    j["scenario"] = apdsim::scenario_to_json(cfg.scenario);
    for (const auto& [k, v] : res.summary) j[k] = v;
    std::ofstream f(path("summary.json"), std::ios::binary);
    if (!f) throw apdsim::CsvError("cannot write summary.json");
    f << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_analyze(const std::string& charges_path, double n, double gain,
                double sigma) {
  const apdsim::ChargeSamples samples = apdsim::read_charges_csv(charges_path);
  const auto est = apdsim::estimate_excess_noise(samples, n, gain, sigma);
  nlohmann::ordered_json j;
  j["f_apd"] = est.f_apd;
  j["f_total"] = est.f_total;
  j["stderr_f"] = est.stderr_f;
  j["n_used"] = est.n_used;
  j["m_used"] = est.m_used;
  j["sub_unity"] = est.sub_unity;
  j["inconsistent_sigma"] = est.inconsistent_sigma;
  if (sigma > 0.0 && samples.charges.size() >= 100) {
    const apdsim::ModelParams mp{n, gain, sigma};
    const auto ks = apdsim::ks_distance(samples, mp);
    j["ks_distance"] = ks.distance;
    j["ks_p_value"] = ks.p_value;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_limits(double sigma, double gain, double qe, const std::string& mode,
               double dark_e, double f_apd, double n) {
  const auto b = apdsim::noise_budget(sigma, f_apd, n, gain, qe, dark_e,
                                      parse_limit_mode(mode));
  std::cout << budget_json(b).dump(2) << '\n';
  return 0;
}

struct SweepRange {
  double start = 0.0, stop = 0.0;
  int count = 0;
};

SweepRange parse_range(const std::string& s) {
  SweepRange r;
  const auto c1 = s.find(':');
  const auto c2 = s.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw apdsim::ConfigError("range must be start:stop:count, got '" + s + "'");
  try {
    r.start = std::stod(s.substr(0, c1));
    r.stop = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
    r.count = std::stoi(s.substr(c2 + 1));
  } catch (const std::exception&) {
    throw apdsim::ConfigError("range must be start:stop:count, got '" + s + "'");
  }
  if (r.count < 1) throw apdsim::ConfigError("range count must be >= 1");
  return r;
}

int cmd_sweep(const std::string& param, const std::string& range_str,
              const std::string& config_path) {
  if (param != "gain" && param != "n" && param != "sigma" && param != "k")
    throw apdsim::ConfigError("unknown sweep param '" + param +
                              "'; valid: gain, n, sigma, k");
  const SweepRange range = parse_range(range_str);
  const apdsim::RunConfig cfg =
      apdsim::run_config_from_json(load_json_file(config_path));

  std::cout << "value,f_mcintyre,f_apd_sim,limit_photons\n";
  for (int i = 0; i < range.count; ++i) {
    const double v = range.count == 1
                         ? range.start
                         : range.start + (range.stop - range.start) * i /
                               static_cast<double>(range.count - 1);
    apdsim::Scenario s = cfg.scenario;
    s.seed = apdsim::derive_trial_seed(cfg.scenario.seed, static_cast<std::uint64_t>(i));
    if (param == "gain") s.apd.mean_gain = v;
    else if (param == "n")
      s.source.mean_photons_per_pulse = v / s.apd.quantum_efficiency;
    else if (param == "sigma") s.readout.read_noise = v;
    else s.apd.ionization_ratio = v;

    const double f_eq2 =
        apdsim::mcintyre_excess_noise(s.apd.mean_gain, s.apd.ionization_ratio);
    const auto res = apdsim::run_scenario(s);
    const double f_sim = res.summary.count("f_apd")
                             ? res.summary.at("f_apd")
                             : std::numeric_limits<double>::quiet_NaN();
    const double limit = apdsim::photodetection_limit(
        s.readout.read_noise, s.apd.mean_gain, s.apd.quantum_efficiency,
        LimitMode::pulse);
    std::cout << apdsim::detail::fmt_double(v) << ','
              << apdsim::detail::fmt_double(f_eq2) << ','
              << apdsim::detail::fmt_double(f_sim) << ','
              << apdsim::detail::fmt_double(limit) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"APD photodetection-chain simulator and analysis toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scenario config");
  std::string sim_config;
  std::optional<std::uint64_t> sim_seed;
  std::optional<std::string> sim_out;
  sim->add_option("config", sim_config, "scenario config JSON")->required();
  sim->add_option("--seed", sim_seed, "override the config seed");
  sim->add_option("--out", sim_out, "output directory");

  // analyze
  auto* ana = app.add_subcommand("analyze", "analyze a charges CSV");
  std::string ana_charges;
  double ana_n = 0.0, ana_gain = 1.0, ana_sigma = 7.0;
  ana->add_option("--charges", ana_charges, "charges CSV")->required();
  ana->add_option("--n", ana_n, "mean photoelectron number")->required();
  ana->add_option("--gain", ana_gain, "mean gain M")->required();
  ana->add_option("--sigma", ana_sigma, "readout noise, electrons");

  // limits
  auto* lim = app.add_subcommand("limits", "photodetection limit / noise budget");
  double lim_sigma = 7.0, lim_gain = 10.8, lim_qe = 0.61, lim_dark = 0.0,
         lim_f = 1.0, lim_n = 1.0;
  std::string lim_mode = "pulse";
  lim->add_option("--sigma", lim_sigma, "readout noise, electrons")->required();
  lim->add_option("--gain", lim_gain, "mean gain M")->required();
  lim->add_option("--qe", lim_qe, "quantum efficiency")->required();
  lim->add_option("--mode", lim_mode, "pulse | continuum_cds");
  lim->add_option("--dark-e", lim_dark, "dark noise, electrons RMS");
  lim->add_option("--f-apd", lim_f, "APD excess noise factor");
  lim->add_option("--n", lim_n, "mean photoelectron number");

  // sweep
  auto* swp = app.add_subcommand("sweep", "parameter grid sweep");
  std::string swp_param, swp_range, swp_config;
  swp->add_option("--param", swp_param, "gain | n | sigma | k")->required();
  swp->add_option("--range", swp_range, "start:stop:count")->required();
  swp->add_option("config", swp_config, "base scenario config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_config, sim_seed, sim_out);
    if (*ana) return cmd_analyze(ana_charges, ana_n, ana_gain, ana_sigma);
    if (*lim)
      return cmd_limits(lim_sigma, lim_gain, lim_qe, lim_mode, lim_dark, lim_f,
                        lim_n);
    if (*swp) return cmd_sweep(swp_param, swp_range, swp_config);
  } catch (const apdsim::CsvError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return *sim ? 2 : 1;  // simulate treats I/O problems as exit 2
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
