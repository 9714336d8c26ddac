#pragma once

// Per-RTP-window bandwidth feedback built from a per-TTI PRB bit-rate trace.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vsmooth/detail/text.hpp"
#include "vsmooth/error.hpp"

namespace vsmooth {

struct ChannelTrace {
  std::vector<double> tti_rates;  // bps per PRB, one per TTI
  double tti = 0.001;             // s
};

struct FeedbackWindow {
  double r_c = 0.0;
  double r_max = 0.0;
};

struct ChannelFeed {
  std::vector<FeedbackWindow> windows;
  double window = 0.030;  // s
};

// R_c: prbs_per_alloc PRBs every alloc_every_n_ttis TTIs.
struct AveragePolicy {
  int prbs_per_alloc = 1;
  int alloc_every_n_ttis = 4;
};

// R_max: prbs_per_tti PRBs in every TTI.
struct MaxPolicy {
  int prbs_per_tti = 9;
};

inline void validate(const ChannelTrace& ct) {
  if (!(ct.tti > 0.0)) throw ValidationError("tti must be > 0");
  for (double r : ct.tti_rates)
    if (!(r >= 0.0)) throw ValidationError("channel rates must be >= 0");
}

inline ChannelFeed aggregate_feedback(const ChannelTrace& ct, double rtp_period, AveragePolicy avg = {},
                                      MaxPolicy max = {}) {
  validate(ct);
  if (avg.prbs_per_alloc <= 0 || avg.alloc_every_n_ttis <= 0 || max.prbs_per_tti <= 0)
    throw ValidationError("PRB policies must be positive");
  if (!(rtp_period > 0.0)) throw ValidationError("rtp_period must be > 0");
  const double ratio = rtp_period / ct.tti;
  const auto per_window = static_cast<std::size_t>(std::llround(ratio));
  if (per_window == 0 || std::abs(ratio - static_cast<double>(per_window)) > 1e-9 * ratio)
    throw ValidationError("rtp_period must be an integer multiple of the TTI");

  ChannelFeed feed;
  feed.window = rtp_period;
  const auto n_windows = ct.tti_rates.size() / per_window;
  feed.windows.reserve(n_windows);
  const double avg_share = static_cast<double>(avg.prbs_per_alloc) / avg.alloc_every_n_ttis;
  for (std::size_t w = 0; w < n_windows; ++w) {
    double sum = 0.0;
    for (std::size_t k = 0; k < per_window; ++k) sum += ct.tti_rates[w * per_window + k];
    const double mean = sum / static_cast<double>(per_window);
    feed.windows.push_back({mean * avg_share, mean * max.prbs_per_tti});
  }
  return feed;
}

// Replaces every window by the run-level mean of (R_c, R_max).
inline ChannelFeed freeze(const ChannelFeed& feed) {
  if (feed.windows.empty()) return feed;
  FeedbackWindow m;
  for (const auto& w : feed.windows) {
    m.r_c += w.r_c;
    m.r_max += w.r_max;
  }
  m.r_c /= static_cast<double>(feed.windows.size());
  m.r_max /= static_cast<double>(feed.windows.size());
  ChannelFeed out = feed;
  for (auto& w : out.windows) w = m;
  return out;
}

// Normal per-TTI rates clamped at zero.
inline ChannelTrace synth_channel(double mean_prb_bps, double rel_stddev, std::size_t n_ttis, std::uint64_t seed,
                                  double tti = 0.001) {
  if (!(mean_prb_bps > 0.0)) throw ValidationError("mean PRB rate must be > 0");
  if (!(rel_stddev >= 0.0)) throw ValidationError("rel_stddev must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  ChannelTrace ct;
  ct.tti = tti;
  ct.tti_rates.reserve(n_ttis);
  for (std::size_t k = 0; k < n_ttis; ++k) {
    const double z = unit(rng);
    ct.tti_rates.push_back(std::max(0.0, mean_prb_bps * (1.0 + rel_stddev * z)));
  }
  return ct;
}

// CSV `tti_index,prb_bps`, with an optional `#tti_seconds=<s>` directive.
inline ChannelTrace parse_channel_trace(std::string_view text) {
  if (detail::trim(text).empty()) throw ParseError(1, "empty channel trace");
  ChannelTrace ct;
  bool header_seen = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const auto line = detail::trim(raw);
    if (line.empty()) return;
    if (line.front() == '#') {
      constexpr std::string_view key = "#tti_seconds=";
      if (line.rfind(key, 0) == 0) {
        const auto v = detail::to_double(line.substr(key.size()));
        if (!v || !(*v > 0.0)) throw ParseError(line_no, "bad tti_seconds");
        ct.tti = *v;
      }
      return;
    }
    if (!header_seen && line.rfind("tti_index", 0) == 0) {
      header_seen = true;
      return;
    }
    header_seen = true;
    const auto cols = detail::split(line, ',');
    if (cols.size() != 2) throw ParseError(line_no, "expected tti_index,prb_bps");
    const auto idx = detail::to_int(cols[0]);
    const auto rate = detail::to_double(cols[1]);
    if (!idx || !rate) throw ParseError(line_no, "non-numeric field");
    if (*idx != static_cast<std::int64_t>(ct.tti_rates.size())) throw ParseError(line_no, "tti_index out of sequence");
    if (*rate < 0.0) throw ValidationError("line " + std::to_string(line_no) + ": negative PRB rate");
    ct.tti_rates.push_back(*rate);
  });
  if (ct.tti_rates.empty()) throw ParseError(1, "no data lines");
  return ct;
}

inline std::string serialize_csv(const ChannelTrace& ct) {
  std::ostringstream os;
  os.precision(17);
  os << "#tti_seconds=" << ct.tti << "\ntti_index,prb_bps\n";
  for (std::size_t k = 0; k < ct.tti_rates.size(); ++k) os << k << ',' << ct.tti_rates[k] << '\n';
  return os.str();
}

}  // namespace vsmooth
