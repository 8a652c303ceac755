#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "apdsim/core.hpp"

using namespace apdsim;

namespace {

Scenario base_scenario(double n, double gain, double sigma, std::int64_t pulses,
                       std::uint64_t seed) {
  Scenario s;
  s.source.mode = SourceMode::pulsed;
  s.source.mean_photons_per_pulse = n;  // with eta = 1, n photoelectrons
  s.source.n_pulses = pulses;
  s.apd.mean_gain = gain;
  s.apd.quantum_efficiency = 1.0;
  s.apd.gain_model = GainModel::deterministic;
  s.readout.read_noise = sigma;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("dark mode with no charge sources yields all-zero charges") {
  Scenario s = base_scenario(1.0, 10.8, 0.0, 200, 5);
  s.source.mode = SourceMode::dark;
  s.source.mean_photons_per_pulse = 0.0;
  s.apd.dark_rate = 0.0;
  const auto res = run_scenario(s);
  for (double q : res.charges.charges) CHECK(q == 0.0);
  CHECK(res.histogram.total ==
        static_cast<std::int64_t>(res.charges.charges.size()));
}

TEST_CASE("identical scenarios give bit-identical results") {
  Scenario s = base_scenario(3.0, 10.8, 7.0, 2000, 99);
  s.apd.gain_model = GainModel::gamma_variance;
  s.apd.excess_noise_override = 1.5;
  const auto a = run_scenario(s);
  const auto b = run_scenario(s);
  REQUIRE(a.charges.charges.size() == b.charges.charges.size());
  for (std::size_t i = 0; i < a.charges.charges.size(); ++i)
    CHECK(a.charges.charges[i] == b.charges.charges[i]);
  CHECK(a.summary == b.summary);
}

TEST_CASE("mean of the chain: n = 3, M = 10, deterministic, sigma = 0") {
  const auto res = run_scenario(base_scenario(3.0, 10.0, 0.0, 100'000, 7));
  const double mean = res.summary.at("mean_charge_e");
  // Var(x) = n M^2 = 300 per pulse; 3 standard errors of the mean
  const double se = std::sqrt(300.0 / 100'000.0);
  CHECK(std::abs(mean - 30.0) < 3.0 * se);
  CHECK(std::abs(res.summary.at("n_estimated") - 3.0) < 3.0 * se / 10.0);
}

TEST_CASE("mean chain includes multiplied dark electrons") {
  Scenario s = base_scenario(1.0, 10.0, 0.0, 100'000, 21);
  s.apd.dark_rate = 20.0;  // 1 primary dark electron per 50-ms interval
  const auto res = run_scenario(s);
  const double n_expected = s.expected_primaries_per_interval();
  CHECK(n_expected == doctest::Approx(2.0).epsilon(1e-12));
  const double se = std::sqrt(2.0 * 100.0 / 100'000.0);
  CHECK(std::abs(res.summary.at("mean_charge_e") - 20.0) < 3.0 * se);
}

TEST_CASE("unmultiplied dark electrons bypass the gain") {
  Scenario s = base_scenario(1.0, 10.0, 0.0, 50'000, 22);
  s.apd.dark_rate = 20.0;
  s.apd.dark_multiplied = false;
  const auto res = run_scenario(s);
  // expectation: 1 * 10 + 1 * 1 = 11 e per pulse
  const double se = std::sqrt((100.0 + 1.0) / 50'000.0);
  CHECK(std::abs(res.summary.at("mean_charge_e") - 11.0) < 3.0 * se);
}

TEST_CASE("binomial thinning equals the direct Poisson(mu*eta) draw") {
  const double mu = 3.2, eta = 0.61;
  Rng rng = make_rng(123321, 0);
  const int n = 400'000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(sample_photoelectrons_thinned(mu, eta, rng));
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double lambda = mu * eta;
  const double se_mean = std::sqrt(lambda / n);
  CHECK(std::abs(mean - lambda) < 3.0 * se_mean);
  // Poisson: variance = mean; SE of sample variance ~ sqrt((lambda + 2 lambda^2)... keep 5% band
  CHECK(var == doctest::Approx(lambda).epsilon(0.05));
}

TEST_CASE("Fig. 3(a)-style run agrees with the model by KS") {
  Scenario s = base_scenario(1.0, 10.8, 7.0, 100'000, 2024);
  s.apd.gain_model = GainModel::gamma_variance;
  s.apd.excess_noise_override = 1.02;
  const auto res = run_scenario(s);
  CHECK(res.summary.at("ks_p_value") > 0.01);
}

TEST_CASE("trial results are order-independent") {
  std::vector<double> forward, backward;
  for (int i = 0; i < 3; ++i) {
    Scenario s = base_scenario(1.0, 10.8, 7.0, 500, derive_trial_seed(10, i));
    const auto res = run_scenario(s);
    forward.insert(forward.end(), res.charges.charges.begin(),
                   res.charges.charges.end());
  }
  for (int i = 2; i >= 0; --i) {
    Scenario s = base_scenario(1.0, 10.8, 7.0, 500, derive_trial_seed(10, i));
    const auto res = run_scenario(s);
    backward.insert(backward.end(), res.charges.charges.begin(),
                    res.charges.charges.end());
  }
  std::sort(forward.begin(), forward.end());
  std::sort(backward.begin(), backward.end());
  CHECK(forward == backward);
}

TEST_CASE("validation errors name the offending field") {
  Scenario s = base_scenario(1.0, 10.8, 7.0, 100, 1);
  s.apd.mean_gain = 0.5;
  CHECK_THROWS_WITH_AS(run_scenario(s), "apd.mean_gain must be >= 1",
                       std::invalid_argument);

  Scenario s2 = base_scenario(1.0, 10.8, 7.0, 100, 1);
  s2.source.mean_photons_per_pulse = -1.0;
  CHECK_THROWS_WITH_AS(run_scenario(s2),
                       "source.mean_photons_per_pulse must be >= 0",
                       std::invalid_argument);

  Scenario s3 = base_scenario(1.0, 10.8, 7.0, 100, 1);
  s3.readout.window = 0.06;  // exceeds the 50-ms interval
  CHECK_THROWS_AS(run_scenario(s3), std::invalid_argument);
}

TEST_CASE("dark mode rejects a nonzero photon mean") {
  Scenario s = base_scenario(1.0, 10.8, 7.0, 100, 1);
  s.source.mode = SourceMode::dark;
  CHECK_THROWS_AS(run_scenario(s), std::invalid_argument);
}

TEST_CASE("continuum mode mean matches rate * interval * eta") {
  Scenario s = base_scenario(1.0, 10.0, 0.0, 50'000, 8);
  s.source.mode = SourceMode::continuum;
  s.source.mean_photons_per_pulse = 0.0;
  s.source.continuum_rate = 40.0;  // 2 photons per 50-ms interval
  s.apd.quantum_efficiency = 0.5;
  const auto res = run_scenario(s);
  const double se = std::sqrt(1.0 * 100.0 / 50'000.0);
  CHECK(std::abs(res.summary.at("mean_charge_e") - 10.0) < 3.0 * se);
}
