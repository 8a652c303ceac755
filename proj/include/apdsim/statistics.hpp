// ============================================================================
// statistics.hpp -- model electron-number distribution, histogramming,
// KS comparison, excess-noise and gain estimators, photodetection limits.
//
// The model density is a Poisson mixture of Gaussians,
//   N(x) = (1/sqrt(2 pi) sigma) Sum_l P_n(l) exp(-(x - M l)^2 / 2 sigma^2),
// i.e. the anode-electron distribution for noiseless multiplication by the
// mean gain M plus Gaussian readout noise sigma.  The excess-noise estimator
// backbone is the compound-Poisson identity Var(x) = n M^2 F + sigma^2.
// ============================================================================
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "apdsim/readout.hpp"

namespace apdsim {

struct ModelParams {
  double n = 0.0;      // mean photoelectron number
  double mean_gain = 1.0;
  double sigma = 7.0;  // readout noise, electrons

  void validate() const {
    if (n < 0.0) throw std::domain_error("ModelParams: n must be >= 0");
    if (mean_gain < 1.0) throw std::domain_error("ModelParams: mean_gain must be >= 1");
    if (sigma < 0.0) throw std::domain_error("ModelParams: sigma must be >= 0");
  }
};

namespace detail {

// Poisson weights P_n(l) for l = 0..l_max, with the truncation
// l_max = max(20, ceil(n + 10 sqrt(n) + 10)).  The tail above l_max carries
// less than 1e-12 of the total mass for any n (10-sigma Poisson tail).
inline std::vector<double> poisson_weights(double n) {
  const auto l_max = static_cast<std::size_t>(
      std::max(20.0, std::ceil(n + 10.0 * std::sqrt(n) + 10.0)));
  std::vector<double> w(l_max + 1);
  // log-space recurrence, stable for large n
  double log_p = -n;  // log P(0)
  for (std::size_t l = 0; l <= l_max; ++l) {
    w[l] = std::exp(log_p);
    log_p += std::log(n) - std::log(static_cast<double>(l) + 1.0);
  }
  return w;
}

inline double gaussian_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2_v<double>);
}

}  // namespace detail

inline double model_density(double x, const ModelParams& p) {
  p.validate();
  if (p.sigma == 0.0)
    throw std::domain_error("model_density: sigma = 0 requires the discrete companion");
  const auto w = detail::poisson_weights(p.n);
  const double inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
  double sum = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    const double d = x - p.mean_gain * static_cast<double>(l);
    sum += w[l] * std::exp(-d * d * inv2s2);
  }
  return sum / (std::sqrt(2.0 * std::numbers::pi) * p.sigma);
}

// Point masses P_n(l) at x = M l; the sigma = 0 companion of model_density.
inline double model_pmf_discrete(std::int64_t l, const ModelParams& p) {
  p.validate();
  if (l < 0) return 0.0;
  const auto w = detail::poisson_weights(p.n);
  return static_cast<std::size_t>(l) < w.size() ? w[static_cast<std::size_t>(l)] : 0.0;
}

inline double model_cdf(double x, const ModelParams& p) {
  p.validate();
  if (p.sigma == 0.0)
    throw std::domain_error("model_cdf: sigma = 0 requires the discrete companion");
  const auto w = detail::poisson_weights(p.n);
  double sum = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    const double z = (x - p.mean_gain * static_cast<double>(l)) / p.sigma;
    if (z > 8.0) { sum += w[l]; continue; }   // Phi(z) = 1 to < 1e-15
    if (z < -8.0) continue;                    // Phi(z) = 0 to < 1e-15
    sum += w[l] * detail::gaussian_cdf(z);
  }
  return std::clamp(sum, 0.0, 1.0);
}

// ----------------------------------------------------------------------------
// Histogram
// ----------------------------------------------------------------------------
struct ElectronHistogram {
  std::vector<double> bin_edges;     // uniform width, 0 is always an edge
  std::vector<std::int64_t> counts;  // counts.size() = bin_edges.size() - 1
  std::int64_t total = 0;
  double bin_width = 0.0;
};

inline ElectronHistogram build_histogram(const ChargeSamples& samples,
                                         double bin_width = 5.0) {
  if (bin_width <= 0.0)
    throw std::invalid_argument("build_histogram: bin_width must be > 0");
  if (samples.charges.empty())
    throw std::invalid_argument("build_histogram: empty samples");

  const auto [mn_it, mx_it] =
      std::minmax_element(samples.charges.begin(), samples.charges.end());
  // edges at integer multiples of bin_width so 0 lands on an edge
  const auto lo = static_cast<std::int64_t>(std::floor(*mn_it / bin_width)) - 1;
  const auto hi = static_cast<std::int64_t>(std::floor(*mx_it / bin_width)) + 2;

  ElectronHistogram h;
  h.bin_width = bin_width;
  h.bin_edges.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t k = lo; k <= hi; ++k)
    h.bin_edges.push_back(static_cast<double>(k) * bin_width);
  h.counts.assign(h.bin_edges.size() - 1, 0);
  for (double x : samples.charges) {
    auto idx = static_cast<std::int64_t>(std::floor(x / bin_width)) - lo;
    idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(h.counts.size()) - 1);
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  h.total = static_cast<std::int64_t>(samples.charges.size());
  return h;
}

// ----------------------------------------------------------------------------
// One-sample Kolmogorov-Smirnov test against the model CDF
// ----------------------------------------------------------------------------
struct KsResult {
  double distance = 0.0;
  double p_value = 0.0;
};

namespace detail {

// Asymptotic Kolmogorov survival function Q(t) = 2 Sum_j (-1)^{j-1} e^{-2 j^2 t^2}.
inline double kolmogorov_q(double t) {
  if (t < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * std::exp(-2.0 * static_cast<double>(j) *
                                       static_cast<double>(j) * t * t);
    sum += (j % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace detail

inline KsResult ks_distance(const ChargeSamples& samples, const ModelParams& p) {
  if (samples.charges.size() < 100)
    throw std::invalid_argument("ks_distance: need at least 100 samples");
  std::vector<double> sorted = samples.charges;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  const auto w = detail::poisson_weights(p.n);
  p.validate();
  if (p.sigma == 0.0)
    throw std::domain_error("ks_distance: sigma = 0 requires the discrete companion");
  std::vector<double> cum(w.size() + 1, 0.0);  // cum[l] = Sum_{j<l} w[j]
  for (std::size_t l = 0; l < w.size(); ++l) cum[l + 1] = cum[l] + w[l];

  // CDF evaluated with only the +-8 sigma band of Poisson terms per point;
  // terms fully left of the band enter through the cumulative weight.
  const auto cdf_at = [&](double x) {
    const double inv_m = 1.0 / p.mean_gain;
    auto l_lo = static_cast<std::int64_t>(std::floor((x - 8.0 * p.sigma) * inv_m));
    auto l_hi = static_cast<std::int64_t>(std::ceil((x + 8.0 * p.sigma) * inv_m));
    l_lo = std::clamp<std::int64_t>(l_lo, 0, static_cast<std::int64_t>(w.size()));
    l_hi = std::clamp<std::int64_t>(l_hi, -1, static_cast<std::int64_t>(w.size()) - 1);
    double sum = cum[static_cast<std::size_t>(l_lo)];
    for (std::int64_t l = l_lo; l <= l_hi; ++l) {
      const double z = (x - p.mean_gain * static_cast<double>(l)) / p.sigma;
      sum += w[static_cast<std::size_t>(l)] * detail::gaussian_cdf(z);
    }
    return std::clamp(sum, 0.0, 1.0);
  };

  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf_at(sorted[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }

  KsResult r;
  r.distance = d;
  const double t = d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
  r.p_value = detail::kolmogorov_q(t);
  return r;
}

// ----------------------------------------------------------------------------
// Excess-noise estimation: Var(x) = n M^2 F + sigma^2
// ----------------------------------------------------------------------------
struct ExcessNoiseEstimate {
  double f_apd = 0.0;
  double f_apd_raw = 0.0;  // before the physical floor at 1
  double f_total = 0.0;
  double stderr_f = 0.0;
  double n_used = 0.0;
  double m_used = 0.0;
  bool sub_unity = false;        // raw f_apd fell below the physical floor of 1
  bool inconsistent_sigma = false;  // Var < sigma^2 by more than 3 stderr
};

inline ExcessNoiseEstimate estimate_excess_noise(const ChargeSamples& samples,
                                                 double n, double mean_gain,
                                                 double sigma) {
  if (n <= 0.0) throw std::domain_error("estimate_excess_noise: n must be > 0");
  if (mean_gain < 1.0)
    throw std::domain_error("estimate_excess_noise: mean_gain must be >= 1");
  const std::size_t count = samples.charges.size();
  if (count < 1000)
    throw std::invalid_argument("estimate_excess_noise: need at least 1000 samples");

  double mean = 0.0;
  for (double x : samples.charges) mean += x;
  mean /= static_cast<double>(count);
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples.charges) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double nn = static_cast<double>(count);
  const double var = m2 / (nn - 1.0);
  m2 /= nn;
  m4 /= nn;
  // asymptotic variance of the sample variance
  const double var_of_var = (m4 - (nn - 3.0) / (nn - 1.0) * m2 * m2) / nn;

  ExcessNoiseEstimate e;
  e.n_used = n;
  e.m_used = mean_gain;
  const double denom = n * mean_gain * mean_gain;
  e.f_total = var / denom;
  e.stderr_f = std::sqrt(std::max(0.0, var_of_var)) / denom;
  const double raw_apd = (var - sigma * sigma) / denom;
  e.f_apd_raw = raw_apd;
  if (var < sigma * sigma &&
      (sigma * sigma - var) > 3.0 * std::sqrt(std::max(0.0, var_of_var))) {
    e.inconsistent_sigma = true;
    e.f_apd = raw_apd;  // reported as-is, flagged
  } else if (raw_apd < 1.0) {
    e.sub_unity = true;
    e.f_apd = 1.0;  // physical floor
  } else {
    e.f_apd = raw_apd;
  }
  return e;
}

// ----------------------------------------------------------------------------
// Gain calibration: M = biased mean charge / unity-gain mean charge
// ----------------------------------------------------------------------------
struct GainCalibration {
  double mean_gain = 0.0;
  double stderr_ = 0.0;
};

inline double calibrate_gain(double biased_mean_charge,
                             double unity_gain_mean_charge) {
  if (unity_gain_mean_charge <= 0.0)
    throw std::domain_error("calibrate_gain: unity-gain mean charge must be > 0");
  return biased_mean_charge / unity_gain_mean_charge;
}

// Ratio with the relative standard errors of the two sample means propagated
// in quadrature.
inline GainCalibration calibrate_gain_with_error(double biased_mean,
                                                 double biased_se,
                                                 double unity_mean,
                                                 double unity_se) {
  GainCalibration c;
  c.mean_gain = calibrate_gain(biased_mean, unity_mean);
  const double rb = biased_se / biased_mean;
  const double ru = unity_se / unity_mean;
  c.stderr_ = std::abs(c.mean_gain) * std::sqrt(rb * rb + ru * ru);
  return c;
}

// ----------------------------------------------------------------------------
// Photodetection limit (SNR = 1) and noise budget
// ----------------------------------------------------------------------------
enum class LimitMode { pulse, continuum_cds };

// Photon number at which the signal equals the RMS noise.  Continuum sources
// read through correlated double samples pay the sqrt(2) CDS factor.
inline double photodetection_limit(double sigma_total, double mean_gain,
                                   double eta, LimitMode mode) {
  if (mean_gain < 1.0)
    throw std::domain_error("photodetection_limit: mean_gain must be >= 1");
  if (eta <= 0.0 || eta > 1.0)
    throw std::domain_error("photodetection_limit: eta must be in (0,1]");
  if (sigma_total < 0.0)
    throw std::domain_error("photodetection_limit: sigma_total must be >= 0");
  const double base = sigma_total / (mean_gain * eta);
  return mode == LimitMode::pulse ? base : std::sqrt(2.0) * base;
}

struct NoiseBudget {
  double readout_e = 0.0;
  double apd_excess_e = 0.0;
  double dark_e = 0.0;
  double total_e = 0.0;
  double limit_photons = 0.0;
};

// apd_excess_e = M sqrt(n (F - 1)), from the Var(x) = n M^2 F decomposition.
inline NoiseBudget noise_budget(double readout_e, double f_apd, double n,
                                double mean_gain, double eta, double dark_e,
                                LimitMode mode) {
  if (f_apd < 1.0) throw std::domain_error("noise_budget: f_apd must be >= 1");
  if (readout_e < 0.0 || dark_e < 0.0 || n < 0.0)
    throw std::domain_error("noise_budget: noise components must be >= 0");
  NoiseBudget b;
  b.readout_e = readout_e;
  b.apd_excess_e = mean_gain * std::sqrt(n * (f_apd - 1.0));
  b.dark_e = dark_e;
  b.total_e = std::sqrt(b.readout_e * b.readout_e +
                        b.apd_excess_e * b.apd_excess_e + b.dark_e * b.dark_e);
  b.limit_photons = photodetection_limit(b.total_e, mean_gain, eta, mode);
  return b;
}

}  // namespace apdsim
