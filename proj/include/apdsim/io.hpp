// ============================================================================
// io.hpp -- CSV serialization for traces, charge samples, and histograms.
//
// Formats (headers mandatory, '.' decimal point, UTF-8):
//   trace:     time_s,volts
//   charges:   pulse_index,charge_e
//   histogram: bin_left_e,bin_right_e,count
// ============================================================================
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "apdsim/readout.hpp"
#include "apdsim/statistics.hpp"

namespace apdsim {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CsvError("cannot open for writing: " + path);
  return f;
}

}  // namespace detail

inline void write_trace_csv(const VoltageTrace& trace, const std::string& path) {
  auto f = detail::open_out(path);
  f << "time_s,volts\n";
  for (std::size_t i = 0; i < trace.n_windows(); ++i)
    f << detail::fmt_double(trace.sample_times[i]) << ','
      << detail::fmt_double(trace.voltages[i]) << '\n';
}

inline void write_charges_csv(const ChargeSamples& samples,
                              const std::string& path) {
  auto f = detail::open_out(path);
  f << "pulse_index,charge_e\n";
  for (std::size_t i = 0; i < samples.charges.size(); ++i)
    f << samples.pulse_indices[i] << ','
      << detail::fmt_double(samples.charges[i]) << '\n';
}

inline void write_histogram_csv(const ElectronHistogram& h,
                                const std::string& path) {
  auto f = detail::open_out(path);
  f << "bin_left_e,bin_right_e,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    f << detail::fmt_double(h.bin_edges[i]) << ','
      << detail::fmt_double(h.bin_edges[i + 1]) << ',' << h.counts[i] << '\n';
}

inline ChargeSamples read_charges_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CsvError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw CsvError(path + ": empty file (line 1)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "pulse_index,charge_e")
    throw CsvError(path + ": line 1: expected header 'pulse_index,charge_e'");

  ChargeSamples out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw CsvError(path + ": line " + std::to_string(lineno) +
                     ": expected 'pulse_index,charge_e' row");
    try {
      std::size_t used = 0;
      const long long idx = std::stoll(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing chars");
      const std::string rest = line.substr(comma + 1);
      const double q = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing chars");
      out.pulse_indices.push_back(idx);
      out.charges.push_back(q);
    } catch (const std::exception&) {
      throw CsvError(path + ": line " + std::to_string(lineno) +
                     ": malformed value");
    }
  }
  return out;
}

}  // namespace apdsim
