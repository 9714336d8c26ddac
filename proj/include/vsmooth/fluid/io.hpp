#pragma once

#include <map>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "vsmooth/detail/text.hpp"
#include "vsmooth/error.hpp"
#include "vsmooth/fluid/solve.hpp"

namespace vsmooth::fluid {

// Flat `key = value` text with the nine FluidParams fields; `#` starts a comment.
inline FluidParams parse_params(std::string_view text) {
  std::map<std::string, double, std::less<>> kv;
  vsmooth::detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    auto line = raw.substr(0, raw.find('#'));
    line = vsmooth::detail::trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = std::string(vsmooth::detail::trim(line.substr(0, eq)));
    const auto val = vsmooth::detail::to_double(line.substr(eq + 1));
    if (!val) throw ParseError(line_no, "non-numeric value for '" + key + "'");
    static constexpr std::string_view known[] = {"n", "rho", "beta", "lambda", "cer_t", "alpha", "a1", "a2", "k"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ParseError(line_no, "unknown key '" + key + "'");
    kv[key] = *val;
  });
  auto get = [&](std::string_view key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("missing parameter '" + std::string(key) + "'");
    return it->second;
  };
  FluidParams p;
  const double n = get("n");
  if (n != std::floor(n)) throw ValidationError("n must be an integer");
  p.n = static_cast<int>(n);
  p.rho = get("rho");
  p.beta = get("beta");
  p.lambda = get("lambda");
  p.cer_t = get("cer_t");
  p.alpha = get("alpha");
  p.a1 = get("a1");
  p.a2 = get("a2");
  p.k = get("k");
  return p;
}

inline std::string params_text(const FluidParams& p) {
  return fmt::format("n = {}\nrho = {:.17g}\nbeta = {:.17g}\nlambda = {:.17g}\ncer_t = {:.17g}\nalpha = {:.17g}\n"
                     "a1 = {:.17g}\na2 = {:.17g}\nk = {:.17g}\n",
                     p.n, p.rho, p.beta, p.lambda, p.cer_t, p.alpha, p.a1, p.a2, p.k);
}

// (x, F_0(x), ..., F_N(x)) on `points` evenly spaced levels over [0, K].
inline std::string cdf_csv(const FluidSolution& sol, int points) {
  if (points < 2) throw ValidationError("grid needs at least 2 points");
  std::string out = "x";
  for (int i = 0; i < sol.states(); ++i) out += fmt::format(",F_{}", i);
  out += '\n';
  for (int g = 0; g < points; ++g) {
    const double x = sol.capacity() * g / (points - 1);
    out += fmt::format("{:.9g}", x);
    for (int i = 0; i < sol.states(); ++i) out += fmt::format(",{:.12e}", sol.cdf(i, x));
    out += '\n';
  }
  return out;
}

struct Summary {
  double throughput = 0.0;
  double arrival = 0.0;
  double loss = 0.0;
  RegimeProbabilities regimes;
  double mean_occupancy = 0.0;
  QualityReport quality;
};

inline Summary summarize(const FluidSolution& sol) {
  return {throughput(sol), sol.arrival_rate(), loss_probability(sol), regime_probabilities(sol),
          mean_occupancy(sol), assess(sol)};
}

inline std::string summary_text(const Summary& s) {
  return fmt::format(
      "throughput={:.12g}\narrival_rate={:.12g}\nloss_probability={:.12g}\np_low={:.12g}\np_mid={:.12g}\n"
      "p_high={:.12g}\nmean_occupancy={:.12g}\nnormalization={:.12g}\neigen_residual={:.3e}\n",
      s.throughput, s.arrival, s.loss, s.regimes.low, s.regimes.mid, s.regimes.high, s.mean_occupancy,
      s.quality.normalization, s.quality.eigen_residual);
}

}  // namespace vsmooth::fluid
