#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "apdsim/config.hpp"
#include "apdsim/io.hpp"

using namespace apdsim;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "seed": 42,
  "source": { "mode": "pulsed", "mean_photons_per_pulse": 1.0, "n_pulses": 500 },
  "apd": { "mean_gain": 10.8, "quantum_efficiency": 0.61,
           "gain_model": "gamma_variance", "excess_noise_override": 1.02 },
  "readout": { "read_noise": 7.0 }
})";

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream f(p, std::ios::binary);
  f << contents;
  return p;
}

}  // namespace

TEST_CASE("config parses into a valid scenario") {
  const Scenario s = scenario_from_json(nlohmann::json::parse(kConfig));
  CHECK(s.seed == 42);
  CHECK(s.source.mode == SourceMode::pulsed);
  CHECK(s.source.n_pulses == 500);
  CHECK(s.apd.mean_gain == 10.8);
  CHECK(s.apd.gain_model == GainModel::gamma_variance);
  CHECK(s.apd.excess_noise_override.value() == 1.02);
  CHECK(s.readout.read_noise == 7.0);
  CHECK(s.readout.sample_interval == 0.05);  // default
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("missing required keys are reported with their dotted path") {
  auto j = nlohmann::json::parse(kConfig);
  j["apd"].erase("mean_gain");
  try {
    scenario_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("apd.mean_gain") != std::string::npos);
  }

  j = nlohmann::json::parse(kConfig);
  j["source"].erase("n_pulses");
  CHECK_THROWS_WITH_AS(scenario_from_json(j),
                       "missing required key: source.n_pulses", ConfigError);
}

TEST_CASE("bad enum values are rejected") {
  auto j = nlohmann::json::parse(kConfig);
  j["source"]["mode"] = "strobed";
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
  j = nlohmann::json::parse(kConfig);
  j["apd"]["gain_model"] = "magic";
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
}

TEST_CASE("scenario round-trips through JSON losslessly") {
  const Scenario s = scenario_from_json(nlohmann::json::parse(kConfig));
  const auto j = scenario_to_json(s);
  const Scenario s2 = scenario_from_json(j);
  CHECK(s2.seed == s.seed);
  CHECK(s2.source.mean_photons_per_pulse == s.source.mean_photons_per_pulse);
  CHECK(s2.source.n_pulses == s.source.n_pulses);
  CHECK(s2.apd.mean_gain == s.apd.mean_gain);
  CHECK(s2.apd.excess_noise_override == s.apd.excess_noise_override);
  CHECK(s2.readout.read_noise == s.readout.read_noise);
  CHECK(s2.histogram_bin_width == s.histogram_bin_width);
  CHECK(scenario_to_json(s2) == j);
}

TEST_CASE("run config emit list is validated") {
  auto j = nlohmann::json::parse(kConfig);
  j["emit"] = {"charges", "summary"};
  const RunConfig cfg = run_config_from_json(j);
  CHECK(cfg.emit == std::set<std::string>{"charges", "summary"});
  j["emit"] = {"plots"};
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
}

TEST_CASE("charges CSV round-trips exactly") {
  ChargeSamples s;
  s.charges = {0.0, -3.25, 108.0, 1e-9, 12345.678901234567};
  s.pulse_indices = {0, 1, 2, 3, 4};
  const auto p = temp_file("apdsim_charges_rt.csv", "");
  write_charges_csv(s, p.string());
  const auto back = read_charges_csv(p.string());
  CHECK(back.charges == s.charges);
  CHECK(back.pulse_indices == s.pulse_indices);
  fs::remove(p);
}

TEST_CASE("headerless charges CSV is rejected") {
  const auto p = temp_file("apdsim_noheader.csv", "0,1.5\n1,2.5\n");
  CHECK_THROWS_AS(read_charges_csv(p.string()), CsvError);
  fs::remove(p);
}

TEST_CASE("malformed CSV rows report the line number") {
  const auto p = temp_file("apdsim_bad.csv",
                           "pulse_index,charge_e\n0,1.5\nnot,a number\n");
  try {
    read_charges_csv(p.string());
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  fs::remove(p);
}

TEST_CASE("trace and histogram CSV headers") {
  VoltageTrace t;
  t.sample_times = {0.0, 0.05};
  t.voltages = {0.0, 1e-6};
  t.electrons_per_volt = 6.24e6;
  t.window = 0.04;
  t.sample_interval = 0.05;
  const auto pt = fs::temp_directory_path() / "apdsim_trace.csv";
  write_trace_csv(t, pt.string());
  std::ifstream f(pt);
  std::string header;
  std::getline(f, header);
  CHECK(header == "time_s,volts");
  fs::remove(pt);

  ElectronHistogram h;
  h.bin_edges = {0.0, 5.0, 10.0};
  h.counts = {2, 1};
  h.total = 3;
  h.bin_width = 5.0;
  const auto ph = fs::temp_directory_path() / "apdsim_hist.csv";
  write_histogram_csv(h, ph.string());
  std::ifstream fh(ph);
  std::getline(fh, header);
  CHECK(header == "bin_left_e,bin_right_e,count");
  fs::remove(ph);
}
