#pragma once

// VBR frame-size traces: parsing (CSV and ASU verbose layouts), summary
// statistics and a seeded GOP-patterned generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vsmooth/detail/text.hpp"
#include "vsmooth/error.hpp"

namespace vsmooth {

enum class FrameKind { I, P, B, Unknown };

inline std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::I: return "I";
    case FrameKind::P: return "P";
    case FrameKind::B: return "B";
    case FrameKind::Unknown: break;
  }
  return "unknown";
}

inline FrameKind frame_kind_from(std::string_view s) {
  s = detail::trim(s);
  if (s == "I" || s == "i" || s == "IDR") return FrameKind::I;
  if (s == "P" || s == "p") return FrameKind::P;
  if (s == "B" || s == "b") return FrameKind::B;
  return FrameKind::Unknown;
}

struct Frame {
  std::int64_t index = 0;
  FrameKind kind = FrameKind::Unknown;
  std::int64_t size_bytes = 0;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct FrameTrace {
  std::vector<Frame> frames;
  double fps = 30.0;
  std::string name;

  // Frame period in seconds, exactly 1/fps.
  double frame_period() const { return 1.0 / fps; }
  std::size_t size() const { return frames.size(); }

  friend bool operator==(const FrameTrace&, const FrameTrace&) = default;
};

inline void validate(const FrameTrace& t) {
  if (t.frames.empty()) throw ValidationError("trace has no frames");
  if (!(t.fps > 0.0) || !std::isfinite(t.fps)) throw ValidationError("fps must be > 0");
  for (std::size_t k = 0; k < t.frames.size(); ++k) {
    const auto& f = t.frames[k];
    if (f.index != static_cast<std::int64_t>(k))
      throw ValidationError("frame indices must run 0,1,2,... (frame " + std::to_string(k) +
                            " has index " + std::to_string(f.index) + ")");
    if (f.size_bytes < 0)
      throw ValidationError("negative size at frame " + std::to_string(k));
  }
}

struct TraceStats {
  double cer = 0.0;  // mean frame bit rate, bps
  double per = 0.0;  // peak frame bit rate, bps
  std::size_t n_frames = 0;
  double mean_frame_bytes = 0.0;
  double fps = 30.0;
};

inline TraceStats trace_stats(const FrameTrace& t) {
  validate(t);
  TraceStats s;
  s.n_frames = t.frames.size();
  s.fps = t.fps;
  std::int64_t total = 0;
  std::int64_t peak = 0;
  for (const auto& f : t.frames) {
    total += f.size_bytes;
    peak = std::max(peak, f.size_bytes);
  }
  const auto n = static_cast<double>(s.n_frames);
  s.mean_frame_bytes = static_cast<double>(total) / n;
  s.cer = static_cast<double>(total) * 8.0 / (n / t.fps);
  s.per = static_cast<double>(peak) * 8.0 * t.fps;
  return s;
}

enum class TraceFormat { Csv, Asu };

namespace detail {

inline FrameTrace parse_csv_trace(std::string_view text) {
  FrameTrace t;
  bool header_seen = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    if (!header_seen && line.rfind("index", 0) == 0) {
      header_seen = true;
      return;
    }
    header_seen = true;
    const auto cols = split(line, ',');
    if (cols.size() != 3) throw ParseError(line_no, "expected 3 columns index,kind,size_bytes");
    const auto idx = to_int(cols[0]);
    const auto size = to_int(cols[2]);
    if (!idx || !size) throw ParseError(line_no, "non-integer index or size");
    if (*size < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative frame size");
    t.frames.push_back({*idx, frame_kind_from(cols[1]), *size});
  });
  return t;
}

struct AsuColumns {
  int index = -1;
  int size = -1;
  int type = -1;
  bool bits = false;
};

inline AsuColumns parse_asu_directive(std::size_t line_no, std::string_view line) {
  AsuColumns c;
  bool unit_seen = false;
  const auto toks = split_ws(line.substr(5));  // past "#cols"
  for (const auto tok : toks) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "bad #cols token");
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "unit") {
      if (val == "bits") c.bits = true;
      else if (val == "bytes") c.bits = false;
      else throw ParseError(line_no, "unit must be bits or bytes");
      unit_seen = true;
      continue;
    }
    const auto v = to_int(val);
    if (!v || *v < 0) throw ParseError(line_no, "column number must be a non-negative integer");
    if (key == "index") c.index = static_cast<int>(*v);
    else if (key == "size") c.size = static_cast<int>(*v);
    else if (key == "type") c.type = static_cast<int>(*v);
    else throw ParseError(line_no, "unknown #cols key '" + std::string(key) + "'");
  }
  if (c.index < 0 || c.size < 0 || !unit_seen)
    throw ParseError(line_no, "#cols needs index=, size= and unit=");
  return c;
}

// Rows keep file order (transmission order); indices are renumbered from 0.
inline FrameTrace parse_asu_trace(std::string_view text) {
  FrameTrace t;
  std::optional<AsuColumns> cols;
  for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const auto line = trim(raw);
    if (line.empty()) return;
    if (line.front() == '#') {
      if (line.rfind("#cols", 0) == 0) cols = parse_asu_directive(line_no, line);
      return;
    }
    if (!cols) throw ParseError(line_no, "data before #cols directive");
    const auto fields = split_ws(line);
    const auto need = static_cast<std::size_t>(std::max({cols->index, cols->size, cols->type})) + 1;
    if (fields.size() < need) throw ParseError(line_no, "too few columns");
    if (!to_int(fields[cols->index])) throw ParseError(line_no, "non-integer index column");
    std::int64_t size = 0;
    if (auto iv = to_int(fields[cols->size])) {
      size = *iv;
    } else if (auto dv = to_double(fields[cols->size])) {
      size = static_cast<std::int64_t>(std::llround(*dv));
    } else {
      throw ParseError(line_no, "non-numeric size column");
    }
    if (size < 0) throw ValidationError("line " + std::to_string(line_no) + ": negative frame size");
    if (cols->bits) size = (size + 7) / 8;
    const auto kind = cols->type >= 0 ? frame_kind_from(fields[cols->type]) : FrameKind::Unknown;
    t.frames.push_back({static_cast<std::int64_t>(t.frames.size()), kind, size});
  });
  return t;
}

}  // namespace detail

inline FrameTrace parse_trace(std::string_view text, TraceFormat format, double fps = 30.0,
                              std::string name = {}) {
  if (detail::trim(text).empty()) throw ParseError(1, "empty trace input");
  FrameTrace t = format == TraceFormat::Csv ? detail::parse_csv_trace(text)
                                            : detail::parse_asu_trace(text);
  if (t.frames.empty()) throw ParseError(1, "no data lines");
  t.fps = fps;
  t.name = std::move(name);
  validate(t);
  return t;
}

inline std::string serialize_csv(const FrameTrace& t) {
  std::ostringstream os;
  os << "index,kind,size_bytes\n";
  for (const auto& f : t.frames) os << f.index << ',' << to_string(f.kind) << ',' << f.size_bytes << '\n';
  return os.str();
}

// Per-kind parameter triple used by the generator.
struct PerKind {
  double i = 0.0;
  double p = 0.0;
  double b = 0.0;

  double operator[](FrameKind k) const {
    switch (k) {
      case FrameKind::I: return i;
      case FrameKind::P: return p;
      default: return b;
    }
  }
};

// 16-frame G16B3 group of pictures.
inline constexpr std::string_view kG16B3 = "IBBBPBBBBPBBBBPB";

inline std::string expand_gop(std::string_view pattern) {
  if (pattern == "G16B3") return std::string(kG16B3);
  return std::string(pattern);
}

// Frame k takes kind pattern[k mod len]; sizes are lognormal with the given
// mean and relative standard deviation, rounded and clamped to >= 1 byte.
inline FrameTrace synth_trace(std::string_view gop, const PerKind& mean_sizes, const PerKind& jitter,
                              std::size_t n_frames, std::uint64_t seed, double fps = 30.0) {
  const auto pattern = expand_gop(gop);
  if (pattern.empty()) throw ValidationError("empty GOP pattern");
  for (char c : pattern)
    if (c != 'I' && c != 'P' && c != 'B') throw ValidationError(std::string("bad GOP symbol '") + c + "'");
  if (n_frames == 0) throw ValidationError("n_frames must be > 0");
  for (auto k : {FrameKind::I, FrameKind::P, FrameKind::B}) {
    if (pattern.find(to_string(k)[0]) == std::string::npos) continue;
    if (!(mean_sizes[k] > 0.0)) throw ValidationError("mean size must be > 0 for kind " + std::string(to_string(k)));
    if (!(jitter[k] >= 0.0)) throw ValidationError("jitter must be >= 0");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  FrameTrace t;
  t.fps = fps;
  t.name = "synth:" + pattern;
  t.frames.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const auto kind = frame_kind_from(std::string_view(&pattern[k % pattern.size()], 1));
    const double mean = mean_sizes[kind];
    const double j = jitter[kind];
    double x = mean;
    const double z = unit(rng);  // drawn unconditionally so the stream does not depend on jitter
    if (j > 0.0) {
      const double s2 = std::log1p(j * j);
      x = std::exp(std::log(mean) - 0.5 * s2 + std::sqrt(s2) * z);
    }
    const auto size = std::max<std::int64_t>(1, std::llround(x));
    t.frames.push_back({static_cast<std::int64_t>(k), kind, size});
  }
  return t;
}

}  // namespace vsmooth
