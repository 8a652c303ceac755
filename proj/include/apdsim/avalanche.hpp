// ============================================================================
// avalanche.hpp -- stochastic multiplication models and analytic
// excess-noise / gain-curve formulas for a linear-mode APD.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apdsim/random.hpp"

namespace apdsim {

// ----------------------------------------------------------------------------
// McIntyre excess noise factor, F = kM + (2 - 1/M)(1 - k).
// Electron-injection form; k is the hole-to-electron ionization rate ratio.
// ----------------------------------------------------------------------------
inline double mcintyre_excess_noise(double mean_gain, double ionization_ratio) {
  if (mean_gain < 1.0)
    throw std::domain_error("mcintyre_excess_noise: mean_gain must be >= 1");
  if (ionization_ratio < 0.0 || ionization_ratio > 1.0)
    throw std::domain_error("mcintyre_excess_noise: ionization_ratio must be in [0,1]");
  return ionization_ratio * mean_gain +
         (2.0 - 1.0 / mean_gain) * (1.0 - ionization_ratio);
}

// ----------------------------------------------------------------------------
// GainCurve: Miller empirical form M(V) = 1 / (1 - (V/V_br)^m).
// ----------------------------------------------------------------------------
struct GainCurve {
  double breakdown_voltage = 0.0;  // V_br
  double exponent = 0.0;           // m
  std::vector<std::pair<double, double>> calibration_points;  // (bias, gain)
  double fit_residual = 0.0;  // RMS residual of log M over the input points
  bool monotone_warning = false;

  double gain_at(double bias) const {
    if (bias < 0.0 || bias >= breakdown_voltage)
      throw std::domain_error("GainCurve::gain_at: bias must be in [0, V_br)");
    return 1.0 / (1.0 - std::pow(bias / breakdown_voltage, exponent));
  }
};

namespace detail {

// For a fixed V_br the model is log(1 - 1/M_i) = m * log(V_i / V_br), a
// zero-intercept linear fit in m.  Returns (m, sum of squared residuals).
inline std::pair<double, double> miller_fit_exponent(
    const std::vector<std::pair<double, double>>& pts, double v_br) {
  double sab = 0.0, sbb = 0.0;
  for (const auto& [v, g] : pts) {
    const double a = std::log(1.0 - 1.0 / g);
    const double b = std::log(v / v_br);
    sab += a * b;
    sbb += b * b;
  }
  const double m = sab / sbb;
  double ss = 0.0;
  for (const auto& [v, g] : pts) {
    const double r = std::log(1.0 - 1.0 / g) - m * std::log(v / v_br);
    ss += r * r;
  }
  return {m, ss};
}

}  // namespace detail

// Least-squares fit of the Miller form on log M: a 1-D golden-section search
// over V_br with the exponent solved in closed form at each candidate.
inline GainCurve fit_gain_curve(
    const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2)
    throw std::invalid_argument("fit_gain_curve: need at least 2 points");
  double v_max = 0.0;
  for (const auto& [v, g] : points) {
    if (v <= 0.0) throw std::invalid_argument("fit_gain_curve: bias must be > 0");
    if (g < 1.0) throw std::invalid_argument("fit_gain_curve: gains must be >= 1");
    v_max = std::max(v_max, v);
  }
  auto sorted = points;
  std::sort(sorted.begin(), sorted.end());
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (sorted[i].first == sorted[i + 1].first)
      throw std::invalid_argument("fit_gain_curve: biases must be distinct");
    if (sorted[i].second >= sorted[i + 1].second) monotone = false;
  }

  const auto cost = [&](double v_br) {
    return detail::miller_fit_exponent(sorted, v_br).second;
  };

  // Bracket V_br by coarse scan above the largest bias, then refine.
  double lo = v_max * (1.0 + 1e-6), hi = v_max * 20.0;
  double best_v = lo, best_c = cost(lo);
  for (int i = 0; i <= 400; ++i) {
    const double v = lo * std::pow(hi / lo, i / 400.0);
    const double c = cost(v);
    if (c < best_c) { best_c = c; best_v = v; }
  }
  double a = std::max(lo, best_v / 1.05), b = std::min(hi, best_v * 1.05);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = cost(x1), f2 = cost(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) { b = x2; x2 = x1; f2 = f1; x1 = b - gr * (b - a); f1 = cost(x1); }
    else         { a = x1; x1 = x2; f1 = f2; x2 = a + gr * (b - a); f2 = cost(x2); }
  }

  GainCurve curve;
  curve.breakdown_voltage = 0.5 * (a + b);
  auto [m, ss] = detail::miller_fit_exponent(sorted, curve.breakdown_voltage);
  curve.exponent = m;
  curve.fit_residual = std::sqrt(ss / static_cast<double>(sorted.size()));
  curve.calibration_points = sorted;
  curve.monotone_warning = !monotone;
  return curve;
}

// ----------------------------------------------------------------------------
// APDSpec
// ----------------------------------------------------------------------------
enum class GainModel { deterministic, gamma_variance, branching };

struct APDSpec {
  double mean_gain = 1.0;          // M
  double ionization_ratio = 0.006; // k
  double quantum_efficiency = 1.0; // eta
  double dark_rate = 0.0;          // primary dark electrons / s at cathode
  bool dark_multiplied = true;     // false models unmultiplied surface dark current
  GainModel gain_model = GainModel::deterministic;
  std::optional<double> excess_noise_override;  // F, used by gamma_variance
  std::optional<GainCurve> gain_curve;

  // Effective excess noise factor for the gamma_variance model.
  double effective_excess_noise() const {
    if (excess_noise_override) return *excess_noise_override;
    return mcintyre_excess_noise(mean_gain, ionization_ratio);
  }

  void validate() const {
    if (mean_gain < 1.0)
      throw std::invalid_argument("apd.mean_gain must be >= 1");
    if (ionization_ratio < 0.0 || ionization_ratio > 1.0)
      throw std::invalid_argument("apd.ionization_ratio must be in [0,1]");
    if (quantum_efficiency <= 0.0 || quantum_efficiency > 1.0)
      throw std::invalid_argument("apd.quantum_efficiency must be in (0,1]");
    if (dark_rate < 0.0)
      throw std::invalid_argument("apd.dark_rate must be >= 0");
    if (excess_noise_override && *excess_noise_override < 1.0)
      throw std::invalid_argument("apd.excess_noise_override must be >= 1");
  }
};

struct GainSample {
  std::int64_t primary_electrons = 0;
  std::int64_t anode_electrons = 0;
};

namespace detail {

// Below this margin above F = 1 the gamma shape parameter explodes; the
// sampler degenerates to the deterministic model (documented, not an error).
inline constexpr double kGammaDegenerateTol = 1e-9;

struct BranchingChain {
  int stages;
  double duplication_prob;
};

// Stage count S = ceil(log2(M)); per-stage duplication probability p solved
// by bisection on (1+p)^S = M.
inline BranchingChain solve_branching_chain(double mean_gain) {
  const int stages =
      std::max(1, static_cast<int>(std::ceil(std::log2(mean_gain))));
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::pow(1.0 + mid, stages) < mean_gain) lo = mid; else hi = mid;
  }
  return {stages, 0.5 * (lo + hi)};
}

inline std::int64_t sample_branching_gain(const BranchingChain& chain, Rng& rng) {
  std::int64_t count = 1;
  for (int s = 0; s < chain.stages; ++s) {
    std::binomial_distribution<std::int64_t> dup(count, chain.duplication_prob);
    count += dup(rng);
  }
  return count;
}

// Real-valued single-electron gain; rounding happens once at the summed
// anode charge (see multiply_primaries).
inline double sample_gain_real(const APDSpec& spec, Rng& rng) {
  switch (spec.gain_model) {
    case GainModel::deterministic:
      return spec.mean_gain;
    case GainModel::gamma_variance: {
      const double f = spec.effective_excess_noise();
      if (f < 1.0 + kGammaDegenerateTol) return spec.mean_gain;
      const double shape = 1.0 / (f - 1.0);
      const double scale = spec.mean_gain * (f - 1.0);
      std::gamma_distribution<double> gamma(shape, scale);
      return gamma(rng);
    }
    case GainModel::branching:
      return static_cast<double>(
          sample_branching_gain(solve_branching_chain(spec.mean_gain), rng));
  }
  throw std::logic_error("unreachable gain model");
}

}  // namespace detail

inline std::int64_t sample_single_electron_gain(const APDSpec& spec, Rng& rng) {
  spec.validate();
  const double g = detail::sample_gain_real(spec, rng);
  return std::max<std::int64_t>(0, std::llround(g));
}

// Anode charge of l primaries: sum of l independent single-electron gains,
// rounded once at the sum.  The gamma model uses gamma additivity (the sum of
// l iid Gamma(a, s) draws is one Gamma(l*a, s) draw, the identical
// distribution) to avoid the per-electron loop.
inline GainSample multiply_primaries(std::int64_t primaries, const APDSpec& spec,
                                     Rng& rng) {
  if (primaries < 0)
    throw std::invalid_argument("multiply_primaries: primaries must be >= 0");
  GainSample out;
  out.primary_electrons = primaries;
  if (primaries == 0) return out;

  double total = 0.0;
  switch (spec.gain_model) {
    case GainModel::deterministic:
      total = static_cast<double>(primaries) * spec.mean_gain;
      break;
    case GainModel::gamma_variance: {
      const double f = spec.effective_excess_noise();
      if (f < 1.0 + detail::kGammaDegenerateTol) {
        total = static_cast<double>(primaries) * spec.mean_gain;
      } else {
        const double shape = static_cast<double>(primaries) / (f - 1.0);
        const double scale = spec.mean_gain * (f - 1.0);
        std::gamma_distribution<double> gamma(shape, scale);
        total = gamma(rng);
      }
      break;
    }
    case GainModel::branching: {
      const auto chain = detail::solve_branching_chain(spec.mean_gain);
      std::int64_t sum = 0;
      for (std::int64_t i = 0; i < primaries; ++i)
        sum += detail::sample_branching_gain(chain, rng);
      total = static_cast<double>(sum);
      break;
    }
  }
  out.anode_electrons = std::max<std::int64_t>(0, std::llround(total));
  return out;
}

}  // namespace apdsim
