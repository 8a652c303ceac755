// ============================================================================
// core.hpp -- scenario configuration and end-to-end orchestration of
// source -> APD -> readout -> analysis.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apdsim/avalanche.hpp"
#include "apdsim/random.hpp"
#include "apdsim/readout.hpp"
#include "apdsim/statistics.hpp"

namespace apdsim {

enum class SourceMode { pulsed, continuum, dark };

struct SourceSpec {
  SourceMode mode = SourceMode::pulsed;
  double mean_photons_per_pulse = 0.0;  // mu
  double pulse_interval = 0.05;         // s
  std::optional<double> pulse_width;    // s, informational only
  double continuum_rate = 0.0;          // photons/s, continuum mode
  std::int64_t n_pulses = 0;

  void validate() const {
    if (mean_photons_per_pulse < 0.0)
      throw std::invalid_argument("source.mean_photons_per_pulse must be >= 0");
    if (mode == SourceMode::dark && mean_photons_per_pulse != 0.0)
      throw std::invalid_argument(
          "source.mean_photons_per_pulse must be 0 in dark mode");
    if (mode == SourceMode::pulsed && mean_photons_per_pulse == 0.0)
      throw std::invalid_argument(
          "source.mean_photons_per_pulse must be > 0 in pulsed mode");
    if (pulse_interval <= 0.0)
      throw std::invalid_argument("source.pulse_interval must be > 0");
    if (mode == SourceMode::continuum && continuum_rate < 0.0)
      throw std::invalid_argument("source.continuum_rate must be >= 0");
    if (n_pulses < 1)
      throw std::invalid_argument("source.n_pulses must be >= 1");
  }
};

struct Scenario {
  SourceSpec source;
  APDSpec apd;
  ReadoutSpec readout;
  std::uint64_t seed = 0;
  double histogram_bin_width = 5.0;

  void validate() const {
    source.validate();
    apd.validate();
    // trace_duration is derived per run; validate the remaining fields
    ReadoutSpec r = readout;
    r.trace_duration = source.pulse_interval;
    r.validate();
    if (source.pulse_interval <= readout.window)
      throw std::invalid_argument(
          "source.pulse_interval must exceed readout.window");
    if (source.mode == SourceMode::pulsed &&
        std::abs(source.pulse_interval - readout.sample_interval) > 1e-12)
      throw std::invalid_argument(
          "source.pulse_interval must equal readout.sample_interval for pulsed sources");
    if (histogram_bin_width <= 0.0)
      throw std::invalid_argument("histogram_bin_width must be > 0");
  }

  // Expected mean primary electrons per interval, n = mu eta + dark contribution.
  double expected_primaries_per_interval() const {
    double n = apd.dark_rate * source.pulse_interval;
    if (source.mode == SourceMode::pulsed)
      n += source.mean_photons_per_pulse * apd.quantum_efficiency;
    else if (source.mode == SourceMode::continuum)
      n += source.continuum_rate * source.pulse_interval * apd.quantum_efficiency;
    return n;
  }
};

struct ScenarioResult {
  VoltageTrace trace;
  ChargeSamples charges;
  ElectronHistogram histogram;
  std::map<std::string, double> summary;
};

// Photoelectrons by explicit binomial thinning of a Poisson photon count.
// Distributionally identical to Poisson(mu * eta); the direct draw is used in
// the hot path and the equivalence is property-tested.
inline std::int64_t sample_photoelectrons_thinned(double mu, double eta, Rng& rng) {
  std::poisson_distribution<std::int64_t> photons(mu);
  const std::int64_t k = photons(rng);
  if (k == 0) return 0;
  std::binomial_distribution<std::int64_t> thin(k, eta);
  return thin(rng);
}

inline ScenarioResult run_scenario(const Scenario& s) {
  s.validate();

  Rng rng = make_rng(s.seed, 0);
  const double interval = s.source.pulse_interval;
  const double mean_pe =
      s.source.mode == SourceMode::pulsed
          ? s.source.mean_photons_per_pulse * s.apd.quantum_efficiency
          : (s.source.mode == SourceMode::continuum
                 ? s.source.continuum_rate * interval * s.apd.quantum_efficiency
                 : 0.0);
  const double mean_dark = s.apd.dark_rate * interval;

  // Pulse i deposits its charge in the gap between window i and window i+1,
  // so Q_i recovers pulse i exactly.
  std::vector<ChargeEvent> events;
  events.reserve(static_cast<std::size_t>(s.source.n_pulses));
  std::poisson_distribution<std::int64_t> pe_dist(mean_pe > 0.0 ? mean_pe : 1.0);
  std::poisson_distribution<std::int64_t> dark_dist(mean_dark > 0.0 ? mean_dark : 1.0);
  for (std::int64_t i = 0; i < s.source.n_pulses; ++i) {
    std::int64_t primaries = mean_pe > 0.0 ? pe_dist(rng) : 0;
    std::int64_t dark = mean_dark > 0.0 ? dark_dist(rng) : 0;
    double anode = 0.0;
    if (s.apd.dark_multiplied) {
      anode = static_cast<double>(
          multiply_primaries(primaries + dark, s.apd, rng).anode_electrons);
    } else {
      anode = static_cast<double>(
                  multiply_primaries(primaries, s.apd, rng).anode_electrons) +
              static_cast<double>(dark);
    }
    if (anode != 0.0) {
      const double t = static_cast<double>(i) * interval +
                       0.5 * (s.readout.window + interval);
      events.emplace_back(t, anode);
    }
  }

  ReadoutSpec rspec = s.readout;
  rspec.trace_duration =
      static_cast<double>(s.source.n_pulses + 1) * rspec.sample_interval;
  ScenarioResult result;
  result.trace = simulate_trace(events, rspec, rng);
  result.charges = extract_pulse_charges(result.trace);
  result.histogram = build_histogram(result.charges, s.histogram_bin_width);

  const double n_expected = s.expected_primaries_per_interval();
  double mean_charge = 0.0;
  for (double q : result.charges.charges) mean_charge += q;
  mean_charge /= static_cast<double>(result.charges.charges.size());

  auto& sum = result.summary;
  sum["n_expected"] = n_expected;
  sum["mean_gain"] = s.apd.mean_gain;
  sum["sigma"] = s.readout.read_noise;
  sum["mean_charge_e"] = mean_charge;
  sum["n_estimated"] = mean_charge / s.apd.mean_gain;
  sum["n_samples"] = static_cast<double>(result.charges.charges.size());

  // Each extracted charge is the difference of two window readings, so its
  // readout noise is sqrt(2) * per-window sigma; all charge-domain analysis
  // uses this effective value.
  const double sigma_charge = std::sqrt(2.0) * s.readout.read_noise;
  sum["sigma_charge"] = sigma_charge;

  if (n_expected > 0.0 && result.charges.charges.size() >= 1000) {
    const auto est = estimate_excess_noise(result.charges, n_expected,
                                           s.apd.mean_gain, sigma_charge);
    sum["f_apd"] = est.f_apd;
    sum["f_total"] = est.f_total;
    sum["f_stderr"] = est.stderr_f;
  }
  if (result.charges.charges.size() >= 100 && s.readout.read_noise > 0.0) {
    const ModelParams mp{n_expected, s.apd.mean_gain, sigma_charge};
    const auto ks = ks_distance(result.charges, mp);
    sum["ks_distance"] = ks.distance;
    sum["ks_p_value"] = ks.p_value;
  }
  sum["limit_photons_pulse"] =
      photodetection_limit(s.readout.read_noise, s.apd.mean_gain,
                           s.apd.quantum_efficiency, LimitMode::pulse);
  sum["limit_photons_continuum_cds"] =
      photodetection_limit(s.readout.read_noise, s.apd.mean_gain,
                           s.apd.quantum_efficiency, LimitMode::continuum_cds);
  return result;
}

}  // namespace apdsim
