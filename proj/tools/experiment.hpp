#pragma once

// Resolution of command-line experiment descriptions into traces, smoother
// configurations and channel feeds. Shared by `smooth` and `compare`.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsmooth/vsmooth.hpp"

namespace vsmooth::cli {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

// `key=value` tokens; later keys override earlier ones.
inline std::map<std::string, std::string> parse_kv_tokens(const std::vector<std::string>& tokens) {
  std::map<std::string, std::string> kv;
  for (const auto& tok : tokens) {
    for (auto piece : detail::split(tok, ',')) {
      piece = detail::trim(piece);
      if (piece.empty()) continue;
      const auto eq = piece.find('=');
      if (eq == std::string_view::npos) throw UsageError("expected key=value, got '" + std::string(piece) + "'");
      kv[std::string(piece.substr(0, eq))] = std::string(piece.substr(eq + 1));
    }
  }
  return kv;
}

inline double kv_number(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const auto v = detail::to_double(it->second);
  if (!v) throw UsageError("'" + key + "' must be numeric");
  return *v;
}

inline void reject_unknown(const std::map<std::string, std::string>& kv, std::initializer_list<std::string_view> known,
                           std::string_view what) {
  for (const auto& [k, v] : kv)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw UsageError("unknown " + std::string(what) + " key '" + k + "'");
}

struct TraceSource {
  std::string path;
  std::string format = "csv";
  std::vector<std::string> synth;
  double fps = 30.0;
};

struct ChannelSource {
  std::string path;
  std::vector<std::string> synth;
  int prbs_per_alloc = 1;
  int alloc_every = 4;
  int rmax_prbs = 9;
  bool freeze = false;
};

struct ExperimentSpec {
  TraceSource trace;
  std::string mode = "baseline";
  double alpha = 0.0;
  double prefill_multiple = 1.0;
  std::int64_t capacity = 0;  // 0 = unbounded
  double rtp_period = 0.030;
  ChannelSource channel;
  bool no_smooth = false;
  std::optional<std::uint64_t> seed;
};

inline void add_trace_options(CLI::App& app, TraceSource& t) {
  app.add_option("--trace", t.path, "Frame-size trace file");
  app.add_option("--trace-format", t.format, "Trace file layout")->check(CLI::IsMember({"csv", "asu"}));
  app.add_option("--synth", t.synth,
                 "Synthetic trace: gop=G16B3 n=<frames> i=<bytes> p=<bytes> b=<bytes> jitter=<rel> "
                 "[jitter_i= jitter_p= jitter_b=] [fps=]")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--fps", t.fps, "Frame rate of a trace file");
}

inline void add_experiment_options(CLI::App& app, ExperimentSpec& e) {
  add_trace_options(app, e.trace);
  app.add_option("--mode", e.mode, "Smoothing variant")->check(CLI::IsMember({"baseline", "credit", "feedback"}));
  app.add_option("--alpha", e.alpha, "Variability factor: CER_t = CER*(1+alpha)");
  app.add_option("--prefill-multiple", e.prefill_multiple, "Prefill level in units of A1");
  app.add_option("--capacity", e.capacity, "Buffer capacity in bytes (0 = unbounded)");
  app.add_option("--rtp-period", e.rtp_period, "Transmission period in seconds");
  app.add_option("--channel", e.channel.path, "Per-TTI PRB rate trace (tti_index,prb_bps)");
  app.add_option("--channel-synth", e.channel.synth,
                 "Synthetic channel: mean=<bps> | rc_over_cer=<x>, sd=<rel>, [rmax_over_per=<x>] [ttis=] [tti=]")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--rc-prbs", e.channel.prbs_per_alloc, "PRBs per R_c allocation");
  app.add_option("--rc-every", e.channel.alloc_every, "TTIs between R_c allocations");
  app.add_option("--rmax-prbs", e.channel.rmax_prbs, "PRBs per TTI for R_max");
  app.add_flag("--freeze-feedback", e.channel.freeze, "Hold run-level mean (R_c, R_max) for every window");
  app.add_flag("--no-smooth", e.no_smooth, "Send every frame at its own rate instead of smoothing");
}

inline FrameTrace resolve_trace(const TraceSource& t, const std::optional<std::uint64_t>& seed) {
  if (!t.path.empty() && !t.synth.empty()) throw UsageError("give either --trace or --synth, not both");
  if (!t.path.empty()) {
    const auto fmt = t.format == "asu" ? TraceFormat::Asu : TraceFormat::Csv;
    return parse_trace(read_file(t.path), fmt, t.fps, t.path);
  }
  if (t.synth.empty()) throw UsageError("no trace source: use --trace FILE or --synth ...");
  if (!seed) throw UsageError("--seed is required with --synth");
  const auto kv = parse_kv_tokens(t.synth);
  reject_unknown(kv, {"gop", "n", "i", "p", "b", "jitter", "jitter_i", "jitter_p", "jitter_b", "fps"}, "--synth");
  const auto gop = kv.count("gop") ? kv.at("gop") : std::string("G16B3");
  const double n = kv_number(kv, "n", 1800);
  if (!(n >= 1) || n != std::floor(n)) throw UsageError("n must be a positive integer");
  const PerKind mean{kv_number(kv, "i", 10000), kv_number(kv, "p", 4000), kv_number(kv, "b", 1000)};
  const double j = kv_number(kv, "jitter", 0.3);
  const PerKind jitter{kv_number(kv, "jitter_i", j), kv_number(kv, "jitter_p", j), kv_number(kv, "jitter_b", j)};
  return synth_trace(gop, mean, jitter, static_cast<std::size_t>(n), *seed, kv_number(kv, "fps", 30.0));
}

inline Mode parse_mode(const std::string& m) {
  if (m == "credit") return Mode::CreditGated;
  if (m == "feedback") return Mode::Feedback;
  return Mode::Baseline;
}

inline SmootherConfig resolve_config(const ExperimentSpec& e, const TraceStats& stats) {
  std::optional<std::int64_t> cap;
  if (e.capacity < 0) throw UsageError("--capacity must be >= 0");
  if (e.capacity > 0) cap = e.capacity;
  return make_config(stats, e.alpha, e.rtp_period, parse_mode(e.mode), e.prefill_multiple, cap);
}

inline std::optional<ChannelFeed> resolve_channel(const ExperimentSpec& e, const FrameTrace& trace,
                                                  const TraceStats& stats) {
  const auto& c = e.channel;
  if (!c.path.empty() && !c.synth.empty()) throw UsageError("give either --channel or --channel-synth, not both");
  if (c.path.empty() && c.synth.empty()) {
    if (e.mode == "feedback") throw UsageError("feedback mode needs --channel or --channel-synth");
    return std::nullopt;
  }
  AveragePolicy avg{c.prbs_per_alloc, c.alloc_every};
  MaxPolicy max{c.rmax_prbs};
  ChannelTrace ct;
  if (!c.path.empty()) {
    ct = parse_channel_trace(read_file(c.path));
  } else {
    if (!e.seed) throw UsageError("--seed is required with --channel-synth");
    const auto kv = parse_kv_tokens(c.synth);
    reject_unknown(kv, {"mean", "rc_over_cer", "sd", "rmax_over_per", "ttis", "tti"}, "--channel-synth");
    if (avg.prbs_per_alloc <= 0 || avg.alloc_every_n_ttis <= 0) throw UsageError("R_c policy must be positive");
    const double share = static_cast<double>(avg.prbs_per_alloc) / avg.alloc_every_n_ttis;
    double mean = kv_number(kv, "mean", 0.0);
    if (kv.count("rc_over_cer")) mean = kv_number(kv, "rc_over_cer", 1.0) * stats.cer / share;
    if (!(mean > 0.0)) throw UsageError("--channel-synth needs mean= or rc_over_cer=");
    if (kv.count("rmax_over_per"))
      max.prbs_per_tti = std::max(1, static_cast<int>(std::lround(kv_number(kv, "rmax_over_per", 1.0) * stats.per / mean)));
    const double tti = kv_number(kv, "tti", 0.001);
    // Enough TTIs to outlast the trace by a wide margin; the last window persists anyway.
    const double duration = static_cast<double>(trace.size()) / trace.fps;
    const double ttis = kv_number(kv, "ttis", std::ceil(2.0 * duration / tti) + 1000.0);
    ct = synth_channel(mean, kv_number(kv, "sd", 0.0), static_cast<std::size_t>(ttis), *e.seed + 1, tti);
  }
  auto feed = aggregate_feedback(ct, e.rtp_period, avg, max);
  if (c.freeze) feed = freeze(feed);
  return feed;
}

}  // namespace vsmooth::cli
