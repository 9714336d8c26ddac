#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vsmooth/error.hpp"
#include "vsmooth/smoother.hpp"
#include "vsmooth/trace.hpp"

namespace vsmooth {

// Coefficient of variation: population standard deviation over the mean.
inline double variability(std::span<const double> rates) {
  if (rates.empty()) throw ValidationError("variability of an empty rate series");
  const double n = static_cast<double>(rates.size());
  const double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / n;
  if (!(mean > 0.0)) throw ValidationError("variability undefined for non-positive mean rate");
  double ss = 0.0;
  for (double r : rates) ss += (r - mean) * (r - mean);
  return std::sqrt(ss / n) / mean;
}

// Unsmoothed reference: each frame sent at its own rate size*8*fps.
inline std::vector<double> baseline_rates(const FrameTrace& t) {
  std::vector<double> out;
  out.reserve(t.frames.size());
  for (const auto& f : t.frames) out.push_back(static_cast<double>(f.size_bytes) * 8.0 * t.fps);
  return out;
}

inline std::vector<double> transmitted_rates(const TransmissionLog& log) {
  std::vector<double> out;
  out.reserve(log.records.size());
  for (const auto& r : log.records) out.push_back(r.rate);
  return out;
}

struct RunMetrics {
  double variability = 0.0;
  double p_r1 = 0.0;
  double p_cer = 0.0;
  double p_r2 = 0.0;
  std::int64_t max_buffer = 0;
  double net_per_second = 0.0;
  std::int64_t overflows = 0;
  std::int64_t underflows = 0;
  double cer_t_obtained_ratio = 0.0;  // mean transmitted rate / CER
};

inline RunMetrics run_metrics(const TransmissionLog& log, const BillingStatement& bill, const SmootherConfig& cfg) {
  if (log.records.empty()) throw ValidationError("empty transmission log");
  RunMetrics m;
  std::size_t n1 = 0, nc = 0, n2 = 0;
  double rate_sum = 0.0;
  for (const auto& r : log.records) {
    switch (r.label) {
      case RateState::R1: ++n1; break;
      case RateState::CER: ++nc; break;
      case RateState::R2: ++n2; break;
    }
    m.max_buffer = std::max({m.max_buffer, r.buffer_before, r.buffer_after});
    if (r.sent > r.buffer_before || r.buffer_after < 0 || r.sent < 0) ++m.underflows;
    rate_sum += r.rate;
  }
  const double n = static_cast<double>(log.records.size());
  m.p_r1 = static_cast<double>(n1) / n;
  m.p_r2 = static_cast<double>(n2) / n;
  m.p_cer = static_cast<double>(nc) / n;
  const auto rates = transmitted_rates(log);
  m.variability = rate_sum > 0.0 ? variability(rates) : 0.0;
  m.net_per_second = bill.net_per_second;
  m.overflows = log.overflow_events;
  m.cer_t_obtained_ratio = rate_sum / n / cfg.cer();
  return m;
}

inline std::string metrics_csv_header() {
  return "net_bytes_per_second,pct_r1,pct_cer,pct_r2,max_buffer_bytes,cer_t_obtained_over_cer,variability,"
         "overflows,underflows";
}

inline std::string metrics_csv_row(const RunMetrics& m) {
  return fmt::format("{:.4f},{:.4f},{:.4f},{:.4f},{},{:.6f},{:.6f},{},{}", m.net_per_second, 100.0 * m.p_r1,
                     100.0 * m.p_cer, 100.0 * m.p_r2, m.max_buffer, m.cer_t_obtained_ratio, m.variability,
                     m.overflows, m.underflows);
}

// Relative reduction of `after` against `before`, in percent.
inline double improvement_pct(double before, double after) {
  return before == 0.0 ? 0.0 : 100.0 * (before - after) / before;
}

}  // namespace vsmooth
