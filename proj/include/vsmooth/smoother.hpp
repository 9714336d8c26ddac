#pragma once

// Two-threshold smoothing buffer.
//
// Frames enter the buffer on the frame clock (frame k at k*Tf). Every RTP
// period the buffer occupancy B picks a transmission rate:
//
//   B <  A1         R = 8*B/Tf                       (R1, earns credit)
//   A1 <= B <= A2   R = CER_t                        (CER)
//   B >  A2         R = max(CER_t, min(PER, 8*(B-A2)/Tf))   (R2, owes debt)
//
// with A1 = CER_t*Tf/8 and A2 = PER*Tf/8. The credit-gated variant funds the
// R2 branch from accumulated net credit instead of from the excess above A2;
// the feedback variant caps every branch by the connection bandwidth reported
// for the current RTP window. Credit and debt are kept in bytes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "vsmooth/channel.hpp"
#include "vsmooth/error.hpp"
#include "vsmooth/trace.hpp"

namespace vsmooth {

enum class Mode { Baseline, CreditGated, Feedback };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Baseline: return "baseline";
    case Mode::CreditGated: return "credit";
    case Mode::Feedback: return "feedback";
  }
  return "?";
}

enum class RateState { R1, CER, R2 };

inline std::string_view to_string(RateState s) {
  switch (s) {
    case RateState::R1: return "R1";
    case RateState::CER: return "CER";
    case RateState::R2: return "R2";
  }
  return "?";
}

struct SmootherConfig {
  double cer_t = 0.0;  // bps
  double per = 0.0;    // bps
  double alpha = 0.0;
  double tf = 1.0 / 30.0;       // s
  double rtp_period = 0.030;    // s
  double a1 = 0.0;              // bytes
  double a2 = 0.0;              // bytes
  double prefill = 0.0;         // bytes
  std::optional<std::int64_t> capacity;  // bytes; nullopt = unbounded
  Mode mode = Mode::Baseline;

  // Mean encoding rate before the alpha inflation.
  double cer() const { return cer_t / (1.0 + alpha); }
};

inline void validate(const SmootherConfig& c) {
  if (!(c.cer_t > 0.0)) throw ValidationError("cer_t must be > 0");
  if (!(c.alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  if (c.per < c.cer_t) throw ValidationError("PER < CER_t: thresholds cross (lower alpha)");
  if (!(c.tf > 0.0)) throw ValidationError("frame period must be > 0");
  if (!(c.rtp_period > 0.0)) throw ValidationError("rtp_period must be > 0");
  // Branch a sends B*rtp/Tf bytes; that never exceeds B only if rtp <= Tf.
  if (c.rtp_period > c.tf * (1.0 + 1e-12)) throw ValidationError("rtp_period must not exceed the frame period");
  if (!(c.a1 > 0.0) || c.a1 > c.a2) throw ValidationError("need 0 < A1 <= A2");
  if (c.prefill < 0.0) throw ValidationError("prefill must be >= 0");
  if (c.capacity && *c.capacity <= 0) throw ValidationError("capacity must be > 0");
}

inline SmootherConfig make_config(const TraceStats& stats, double alpha, double rtp_period = 0.030,
                                  Mode mode = Mode::Baseline, double prefill_multiple = 1.0,
                                  std::optional<std::int64_t> capacity = std::nullopt) {
  if (!(stats.cer > 0.0) || !(stats.fps > 0.0)) throw ValidationError("trace stats must have cer > 0");
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be >= 0");
  if (!(prefill_multiple >= 0.0)) throw ValidationError("prefill multiple must be >= 0");
  SmootherConfig c;
  c.alpha = alpha;
  c.cer_t = stats.cer * (1.0 + alpha);
  c.per = stats.per;
  c.tf = 1.0 / stats.fps;
  c.rtp_period = rtp_period;
  c.a1 = c.cer_t / 8.0 * c.tf;
  c.a2 = c.per / 8.0 * c.tf;
  c.prefill = prefill_multiple * c.a1;
  c.capacity = capacity;
  c.mode = mode;
  validate(c);
  return c;
}

// Worst-case buffering delay Tf*(PER/CER_t + 1).
inline double delay_bound(double tf, double per, double cer_t) { return tf * (per / cer_t + 1.0); }

inline double delay_bound(const SmootherConfig& c) {
  const double d = delay_bound(c.tf, c.per, c.cer_t);
  const double via_a2 = c.a2 / c.cer_t * 8.0 + c.tf;
  if (std::abs(d - via_a2) > 1e-9 * std::max(1.0, d))
    throw ValidationError("A2 is inconsistent with PER*Tf/8; delay forms disagree");
  return d;
}

struct SmootherState {
  std::int64_t buffer = 0;  // B, bytes
  double credit = 0.0;      // bytes
  double debt = 0.0;        // bytes
  std::int64_t tick = 0;    // RTP periods since t = 0
  double clock = 0.0;       // tick * rtp_period
  std::size_t next_frame = 0;
  bool started = false;
};

struct Feedback {
  double r_c = 0.0;    // average connection bandwidth, bps
  double r_max = 0.0;  // maximum connection bandwidth, bps
};

enum class Branch { Low, Mid, High };

struct RateDecision {
  double rate = 0.0;
  RateState label = RateState::CER;
  Branch branch = Branch::Mid;
};

inline RateState classify(double rate, double cer_t) {
  if (rate < cer_t) return RateState::R1;
  if (rate > cer_t) return RateState::R2;
  return RateState::CER;
}

inline RateDecision select_rate(const SmootherState& s, const SmootherConfig& c,
                                std::optional<Feedback> fb = std::nullopt) {
  if (c.mode == Mode::Feedback && !fb) throw UsageError("feedback mode needs (R_c, R_max)");
  const double b = static_cast<double>(s.buffer);
  RateDecision d;
  if (b < c.a1) {
    d.branch = Branch::Low;
    d.rate = b / c.tf * 8.0;
    if (c.mode == Mode::Feedback) d.rate = std::min(d.rate, fb->r_c);
  } else if (b <= c.a2) {
    d.branch = Branch::Mid;
    d.rate = c.cer_t;
    if (c.mode == Mode::Feedback) d.rate = std::min(c.cer_t, fb->r_c);
  } else {
    d.branch = Branch::High;
    if (c.mode == Mode::CreditGated) {
      const double net_credit = s.credit - s.debt;
      d.rate = net_credit > 0.0 ? std::max(c.cer_t, std::min(c.per, net_credit / c.tf * 8.0)) : c.cer_t;
    } else {
      d.rate = std::max(c.cer_t, std::min(c.per, (b - c.a2) / c.tf * 8.0));
      if (c.mode == Mode::Feedback) d.rate = std::min(d.rate, fb->r_max);
    }
  }
  d.label = classify(d.rate, c.cer_t);
  return d;
}

struct LogRecord {
  double time = 0.0;
  double rate = 0.0;
  std::int64_t sent = 0;
  std::int64_t buffer_before = 0;
  std::int64_t buffer_after = 0;
  RateState label = RateState::CER;
  double credit_delta = 0.0;
  double debt_delta = 0.0;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

struct TransmissionLog {
  std::vector<LogRecord> records;
  std::int64_t overflow_events = 0;
  std::int64_t overflow_bytes = 0;
  double startup_delay = 0.0;
  double rtp_period = 0.030;

  friend bool operator==(const TransmissionLog&, const TransmissionLog&) = default;
};

struct StepResult {
  SmootherState state;
  LogRecord record;
  std::int64_t overflow_bytes = 0;  // bytes dropped at the capacity cap this period
};

namespace detail {

inline std::int64_t enqueue_capped(std::int64_t buffer, std::int64_t bytes, const std::optional<std::int64_t>& cap,
                                   std::int64_t& dropped) {
  buffer += bytes;
  if (cap && buffer > *cap) {
    dropped += buffer - *cap;
    buffer = *cap;
  }
  return buffer;
}

// Arrival coincident with a transmission instant counts as already arrived.
inline bool arrived_by(std::size_t k, double tf, double t) {
  return static_cast<double>(k) * tf <= t + 1e-9;
}

}  // namespace detail

// One RTP period: transmit min(R*rtp/8, B) bytes, book the ledger, then add
// the frames that arrive during (clock, clock + rtp] and apply the cap.
inline StepResult step(const SmootherState& s, const SmootherConfig& c, const RateDecision& d,
                       const FrameTrace& trace) {
  StepResult out;
  out.state = s;
  auto& ns = out.state;
  auto& rec = out.record;
  rec.time = s.clock;
  rec.rate = d.rate;
  rec.label = d.label;
  rec.buffer_before = s.buffer;

  const double want = d.rate * c.rtp_period / 8.0;
  // Once every frame is in, round up so the tail actually drains.
  const bool draining = s.next_frame >= trace.frames.size();
  const auto quota = static_cast<std::int64_t>(draining ? std::ceil(want - 1e-9) : std::floor(want + 1e-9));
  rec.sent = std::clamp<std::int64_t>(quota, 0, s.buffer);

  const double dev = (d.rate - c.cer_t) / 8.0 * c.rtp_period;
  if (d.label == RateState::R1) {
    rec.credit_delta = -dev;
  } else if (d.label == RateState::R2) {
    if (c.mode == Mode::CreditGated && d.branch == Branch::High) {
      const double spend = std::min(dev, ns.credit);
      rec.credit_delta = -spend;
      rec.debt_delta = dev - spend;
    } else {
      rec.debt_delta = dev;
    }
  }
  ns.credit = std::max(0.0, ns.credit + rec.credit_delta);
  ns.debt += rec.debt_delta;

  std::int64_t b = s.buffer - rec.sent;
  ns.tick = s.tick + 1;
  ns.clock = static_cast<double>(ns.tick) * c.rtp_period;
  while (ns.next_frame < trace.frames.size() && detail::arrived_by(ns.next_frame, c.tf, ns.clock)) {
    b = detail::enqueue_capped(b, trace.frames[ns.next_frame].size_bytes, c.capacity, out.overflow_bytes);
    ++ns.next_frame;
  }
  ns.buffer = b;
  rec.buffer_after = b;
  return out;
}

// Per-window connection feedback; the last window persists past the end.
inline Feedback feedback_at(const ChannelFeed& feed, std::size_t window) {
  if (feed.windows.empty()) throw UsageError("channel feed has no windows");
  const auto& w = feed.windows[std::min(window, feed.windows.size() - 1)];
  return {w.r_c, w.r_max};
}

struct BillingStatement {
  double total_credit = 0.0;  // bytes
  double total_debt = 0.0;    // bytes
  double net = 0.0;           // debt - credit, bytes
  double net_per_second = 0.0;
  double duration = 0.0;  // s, first transmission to end of last period
};

inline BillingStatement billing(const TransmissionLog& log) {
  if (log.records.empty()) throw ValidationError("empty transmission log");
  BillingStatement b;
  for (const auto& r : log.records) {
    b.total_credit += r.credit_delta;
    b.total_debt += r.debt_delta;
  }
  b.net = b.total_debt - b.total_credit;
  b.duration = log.records.back().time - log.records.front().time + log.rtp_period;
  b.net_per_second = b.net / b.duration;
  return b;
}

struct RunResult {
  TransmissionLog log;
  BillingStatement bill;
};

// Consecutive zero-byte periods tolerated while draining before giving up.
inline constexpr std::int64_t kStallLimit = 100000;

inline RunResult run(const FrameTrace& trace, const SmootherConfig& c, const ChannelFeed* channel = nullptr) {
  validate(trace);
  validate(c);
  if (c.mode == Mode::Feedback && (channel == nullptr || channel->windows.empty()))
    throw UsageError("feedback mode needs a channel feed");

  RunResult out;
  auto& log = out.log;
  log.rtp_period = c.rtp_period;

  // Prefill: frames accumulate until B reaches the prefill level; transmission
  // starts on the first RTP boundary at or after that arrival.
  const auto n = trace.frames.size();
  std::size_t trigger = n - 1;
  {
    std::int64_t cum = 0;
    for (std::size_t k = 0; k < n; ++k) {
      cum += trace.frames[k].size_bytes;
      if (static_cast<double>(cum) >= c.prefill) {
        trigger = k;
        break;
      }
    }
  }
  const double trigger_time = static_cast<double>(trigger) * c.tf;
  SmootherState s;
  s.tick = static_cast<std::int64_t>(std::ceil(trigger_time / c.rtp_period - 1e-9));
  s.clock = static_cast<double>(s.tick) * c.rtp_period;
  s.started = true;
  log.startup_delay = s.clock;
  {
    std::int64_t dropped = 0;
    while (s.next_frame < n && detail::arrived_by(s.next_frame, c.tf, s.clock)) {
      const auto before = dropped;
      s.buffer = detail::enqueue_capped(s.buffer, trace.frames[s.next_frame].size_bytes, c.capacity, dropped);
      if (dropped > before) ++log.overflow_events;
      ++s.next_frame;
    }
    log.overflow_bytes += dropped;
  }

  std::int64_t idle = 0;
  while (s.next_frame < n || s.buffer > 0) {
    std::optional<Feedback> fb;
    if (c.mode == Mode::Feedback) fb = feedback_at(*channel, log.records.size());
    const auto d = select_rate(s, c, fb);
    auto r = step(s, c, d, trace);
    if (r.overflow_bytes > 0) {
      ++log.overflow_events;
      log.overflow_bytes += r.overflow_bytes;
    }
    idle = (s.next_frame >= n && r.record.sent == 0) ? idle + 1 : 0;
    if (idle > kStallLimit) throw UsageError("transmission stalled: channel feed allows no data while draining");
    log.records.push_back(r.record);
    s = r.state;
  }
  if (log.records.empty()) {
    // Trace of all-zero frames: nothing to send, but keep one record so billing is defined.
    LogRecord r;
    r.time = s.clock;
    r.label = classify(0.0, c.cer_t);
    log.records.push_back(r);
  }
  out.bill = billing(log);
  return out;
}

inline std::string log_csv(const TransmissionLog& log) {
  std::string out = "time_s,rate_bps,sent_bytes,buffer_before,buffer_after,label,credit_delta,debt_delta\n";
  for (const auto& r : log.records) {
    out += fmt::format("{:.6f},{:.3f},{},{},{},{},{:.6f},{:.6f}\n", r.time, r.rate, r.sent, r.buffer_before,
                       r.buffer_after, to_string(r.label), r.credit_delta, r.debt_delta);
  }
  return out;
}

inline std::string billing_text(const BillingStatement& b) {
  return fmt::format(
      "total_credit_bytes={:.6f}\ntotal_debt_bytes={:.6f}\nnet_bytes={:.6f}\nnet_bytes_per_second={:.6f}\n"
      "duration_s={:.6f}\n",
      b.total_credit, b.total_debt, b.net, b.net_per_second, b.duration);
}

}  // namespace vsmooth
