#pragma once

// Event-driven simulation of the same fluid queue: the ON-count jumps at
// exponential times, the level moves linearly in between and is stopped at
// 0, at K, and at any threshold where the drift reverses sign. Statistics are
// batch means over equal-length time batches after one batch of warm-up.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vsmooth/error.hpp"
#include "vsmooth/fluid/model.hpp"

namespace vsmooth::fluid {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean over batches
};

struct McResult {
  Estimate throughput;        // packets/s carried
  Estimate loss_probability;  // lost / offered
  Estimate cdf_a1;            // P(X <= A1)
  Estimate cdf_a2;            // P(X <= A2)
  Estimate below_k;           // P(X < K)
  Estimate p_low, p_mid, p_high;
  std::uint64_t transitions = 0;
  int batches = 0;
};

struct McOptions {
  int batches = 30;
  double min_transitions = 1e5;
};

namespace detail {

struct BatchAcc {
  double time_low = 0.0, time_mid = 0.0, time_high = 0.0, time_cap = 0.0;
  double offered = 0.0, carried = 0.0, lost = 0.0;
};

inline Estimate batch_estimate(const std::vector<double>& xs) {
  Estimate e;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) e.mean += x;
  e.mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return e;
}

}  // namespace detail

inline double expected_transition_rate(const FluidParams& p) {
  // sum_i P_i ((N-i) rho + i beta) = 2 N rho beta / (rho + beta)
  return 2.0 * p.n * p.rho * p.beta / (p.rho + p.beta);
}

inline McResult mc_oracle(const FluidParams& p, double horizon, std::uint64_t seed, McOptions opt = {}) {
  validate(p);
  if (opt.batches < 2) throw ValidationError("need at least two batches");
  if (horizon * expected_transition_rate(p) < opt.min_transitions)
    throw ValidationError("horizon too short: expected fewer than " + std::to_string(opt.min_transitions) +
                          " source transitions");

  const std::array<double, 4> edge{0.0, p.a1, p.a2, p.k};
  const std::array<double, 3> rate{p.service_rate(0), p.service_rate(1), p.service_rate(2)};
  const int n = p.n;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::binomial_distribution<int> start(n, on_probability(p.rho, p.beta));

  const double batch_len = horizon / opt.batches;
  const double warmup = batch_len;
  const double t_end = warmup + horizon;
  std::vector<detail::BatchAcc> acc(opt.batches);

  // Where the level is: strictly inside region r, or pinned to edge e.
  struct Pos {
    bool on_edge = true;
    int idx = 0;  // region index, or edge index when on_edge
  };

  // regime: 0 low, 1 mid, 2 high; cap flags x == K.
  auto account = [&](double t0, double t1, int regime, bool cap, double in, double out) {
    while (t0 < t1) {
      if (t0 < warmup) {
        t0 = std::min(t1, warmup);
        continue;
      }
      auto b = std::min(opt.batches - 1, static_cast<int>((t0 - warmup) / batch_len));
      if (b < opt.batches - 1 && warmup + (b + 1) * batch_len <= t0) ++b;
      const double b_end = warmup + (b + 1) * batch_len;
      const double seg_end = (b == opt.batches - 1) ? t1 : std::min(t1, b_end);
      const double dt = seg_end - t0;
      auto& a = acc[b];
      (regime == 0 ? a.time_low : regime == 1 ? a.time_mid : a.time_high) += dt;
      if (cap) a.time_cap += dt;
      a.offered += in * dt;
      a.carried += out * dt;
      a.lost += (in - out > 0.0 && cap) ? (in - out) * dt : 0.0;
      t0 = seg_end;
    }
  };

  int i = start(rng);
  double x = 0.0;
  Pos pos{true, 0};
  double t = 0.0;
  McResult res;
  res.batches = opt.batches;

  while (t < t_end) {
    const double q = (n - i) * p.rho + i * p.beta;
    const double jump_at = t - std::log(1.0 - uni(rng)) / q;
    const double stop = std::min(jump_at, t_end);
    const double in = i * p.lambda;

    while (t < stop) {
      if (pos.on_edge) {
        const int e = pos.idx;
        if (e < 3 && in - rate[e] > 0.0) {
          pos = {false, e};  // leave upward
          continue;
        }
        if (e > 0 && in - rate[e - 1] < 0.0) {
          pos = {false, e - 1};  // leave downward
          continue;
        }
        // Pinned: at 0 the queue passes input straight through; at a threshold
        // input equals output; at K the surplus is lost.
        const bool cap = e == 3;
        account(t, stop, e == 0 ? 0 : e - 1, cap, in, cap ? rate[2] : in);
        t = stop;
        break;
      }
      const int r = pos.idx;
      const double d = in - rate[r];
      const double target = d > 0.0 ? edge[r + 1] : edge[r];
      const double hit = t + (target - x) / d;
      if (hit <= stop) {
        account(t, hit, r, false, in, rate[r]);
        t = hit;
        x = target;
        pos = {true, d > 0.0 ? r + 1 : r};
      } else {
        account(t, stop, r, false, in, rate[r]);
        x += d * (stop - t);
        t = stop;
      }
    }

    if (jump_at <= t_end) {
      if (uni(rng) * q < (n - i) * p.rho) ++i;
      else --i;
      ++res.transitions;
    }
  }

  std::vector<double> thr, pl, c1, c2, bk, lo, mi, hi;
  for (const auto& a : acc) {
    thr.push_back(a.carried / batch_len);
    pl.push_back(a.offered > 0.0 ? a.lost / a.offered : 0.0);
    c1.push_back(a.time_low / batch_len);
    c2.push_back((a.time_low + a.time_mid) / batch_len);
    bk.push_back(1.0 - a.time_cap / batch_len);
    lo.push_back(a.time_low / batch_len);
    mi.push_back(a.time_mid / batch_len);
    hi.push_back(a.time_high / batch_len);
  }
  res.throughput = detail::batch_estimate(thr);
  res.loss_probability = detail::batch_estimate(pl);
  res.cdf_a1 = detail::batch_estimate(c1);
  res.cdf_a2 = detail::batch_estimate(c2);
  res.below_k = detail::batch_estimate(bk);
  res.p_low = detail::batch_estimate(lo);
  res.p_mid = detail::batch_estimate(mi);
  res.p_high = detail::batch_estimate(hi);
  return res;
}

}  // namespace vsmooth::fluid
