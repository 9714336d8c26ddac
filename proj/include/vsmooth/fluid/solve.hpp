#pragma once

// Stationary solution of the three-regime finite fluid queue.
//
// Boundary conditions:
//   F_i(0)  = 0    for up-drift states of the first region,
//   F_i(K-) = P_i  for down-drift states of the last region,
//   F_i continuous at each interior threshold, except for states whose drift
//   is up below the threshold and down above it. Those states hold the level
//   at the threshold and carry a probability atom there, which enters the
//   system as one extra unknown per state.
// Unknowns and equations then always match; the count is checked anyway.
//
// F is taken right-continuous: F_i(x) includes any atom at x.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vsmooth/error.hpp"
#include "vsmooth/fluid/model.hpp"

namespace vsmooth::fluid {

struct FluidRegion {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double c = 0.0;
  SpectralRegion spectrum;
  std::vector<double> a;       // coefficient per eigenpair
  std::vector<double> anchor;  // F term j is a_j v_j e^{z_j (x - anchor_j)}

  double term(std::size_t j, double x) const { return std::exp(spectrum.z[j] * (x - anchor[j])); }

  double eval(int i, double x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * spectrum.vectors(i, static_cast<Eigen::Index>(j)) * term(j, x);
    return s;
  }

  double derivative(int i, double x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
      s += a[j] * spectrum.z[j] * spectrum.vectors(i, static_cast<Eigen::Index>(j)) * term(j, x);
    return s;
  }

  // Sum over states of the integral of F_i over [x_lo, x_hi].
  double integral_total() const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double z = spectrum.z[j];
      const double colsum = spectrum.vectors.col(static_cast<Eigen::Index>(j)).sum();
      const double integral = z == 0.0 ? (x_hi - x_lo) : (term(j, x_hi) - term(j, x_lo)) / z;
      s += a[j] * colsum * integral;
    }
    return s;
  }
};

struct FluidSolution {
  FluidParams params;
  std::vector<FluidRegion> regions;
  std::vector<double> pmf;
  // atoms[m][i]: mass held at the lower edge of regions[m + 1] in state i.
  std::vector<std::vector<double>> atoms;
  double assembly_residual = 0.0;

  int states() const { return params.n + 1; }
  double capacity() const { return regions.back().x_hi; }

  // Right-continuous F_i(x).
  double cdf(int i, double x) const {
    if (x < 0.0) return 0.0;
    if (x >= capacity()) return pmf[i];
    for (const auto& r : regions)
      if (x < r.x_hi) return r.eval(i, x);
    return pmf[i];
  }

  // F_i(x-).
  double cdf_left(int i, double x) const {
    if (x <= 0.0) return 0.0;
    if (x > capacity()) return pmf[i];
    for (const auto& r : regions)
      if (x <= r.x_hi) return r.eval(i, x);
    return pmf[i];
  }

  double total_cdf(double x) const {
    double s = 0.0;
    for (int i = 0; i < states(); ++i) s += cdf(i, x);
    return s;
  }

  double total_cdf_left(double x) const {
    double s = 0.0;
    for (int i = 0; i < states(); ++i) s += cdf_left(i, x);
    return s;
  }

  double arrival_rate() const {
    double a = 0.0;
    for (int i = 0; i < states(); ++i) a += i * params.lambda * pmf[i];
    return a;
  }
};

namespace detail {

inline FluidSolution solve_piecewise(const FluidParams& p, const std::vector<double>& edges,
                                     const std::vector<double>& rates) {
  const int n = p.n;
  const int s = n + 1;
  const int nr = static_cast<int>(rates.size());
  FluidSolution sol;
  sol.params = p;
  sol.pmf = on_pmf(n, p.rho, p.beta);

  for (int r = 0; r < nr; ++r) {
    FluidRegion reg;
    reg.x_lo = edges[r];
    reg.x_hi = edges[r + 1];
    reg.c = rates[r];
    reg.spectrum = spectral_region(p, rates[r]);
    reg.anchor.resize(s);
    for (int j = 0; j < s; ++j) reg.anchor[j] = reg.spectrum.z[j] > 0.0 ? reg.x_hi : reg.x_lo;
    sol.regions.push_back(std::move(reg));
  }

  // Atom unknowns: states trapped at each interior threshold.
  std::vector<std::vector<int>> trapped(nr > 0 ? nr - 1 : 0);
  for (int m = 1; m < nr; ++m) {
    const auto& below = sol.regions[m - 1].spectrum.drift;
    const auto& above = sol.regions[m].spectrum.drift;
    for (int i = 0; i < s; ++i) {
      if (below(i) > 0.0 && above(i) < 0.0) trapped[m - 1].push_back(i);
      if (below(i) < 0.0 && above(i) > 0.0)
        throw ModelDegenerateError("state " + std::to_string(i) + " is repelled from threshold " +
                                   std::to_string(edges[m]) + "; service rates must be nondecreasing in x");
    }
  }

  int n_atoms = 0;
  std::vector<int> atom_offset(trapped.size());
  for (std::size_t m = 0; m < trapped.size(); ++m) {
    atom_offset[m] = nr * s + n_atoms;
    n_atoms += static_cast<int>(trapped[m].size());
  }
  const int unknowns = nr * s + n_atoms;

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  auto region_row = [&](int r, int i, double x, double sign, Eigen::RowVectorXd& row) {
    const auto& reg = sol.regions[r];
    for (int j = 0; j < s; ++j) row(r * s + j) += sign * reg.spectrum.vectors(i, j) * reg.term(j, x);
  };

  const auto& first = sol.regions.front();
  for (int i = 0; i < s; ++i) {
    if (first.spectrum.drift(i) > 0.0) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(unknowns);
      region_row(0, i, first.x_lo, 1.0, row);
      rows.push_back(row);
      rhs.push_back(0.0);
    }
  }
  const auto& last = sol.regions.back();
  for (int i = 0; i < s; ++i) {
    if (last.spectrum.drift(i) < 0.0) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(unknowns);
      region_row(nr - 1, i, last.x_hi, 1.0, row);
      rows.push_back(row);
      rhs.push_back(sol.pmf[i]);
    }
  }
  for (int m = 1; m < nr; ++m) {
    const double x = edges[m];
    for (int i = 0; i < s; ++i) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(unknowns);
      region_row(m, i, x, 1.0, row);
      region_row(m - 1, i, x, -1.0, row);
      const auto& t = trapped[m - 1];
      if (auto it = std::find(t.begin(), t.end(), i); it != t.end())
        row(atom_offset[m - 1] + static_cast<int>(it - t.begin())) = -1.0;
      rows.push_back(row);
      rhs.push_back(0.0);
    }
  }

  if (static_cast<int>(rows.size()) != unknowns)
    throw ModelDegenerateError("boundary system is " + std::to_string(rows.size()) + "x" + std::to_string(unknowns) +
                               ", expected square");

  Eigen::MatrixXd a(unknowns, unknowns);
  Eigen::VectorXd b(unknowns);
  for (int r = 0; r < unknowns; ++r) {
    a.row(r) = rows[r];
    b(r) = rhs[r];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible())
    throw ModelDegenerateError("singular boundary system (N=" + std::to_string(n) + ", C=" +
                               std::to_string(rates.front()) + ".." + std::to_string(rates.back()) + ")");
  const Eigen::VectorXd x = lu.solve(b);
  const double scale = inf_norm(a) * x.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
  sol.assembly_residual = (a * x - b).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
  if (!x.allFinite() || sol.assembly_residual > 1e-10)
    throw NumericError("boundary system residual " + std::to_string(sol.assembly_residual) + " above 1e-10");

  for (int r = 0; r < nr; ++r) {
    auto& reg = sol.regions[r];
    reg.a.resize(s);
    for (int j = 0; j < s; ++j) reg.a[j] = x(r * s + j);
  }
  sol.atoms.assign(trapped.size(), std::vector<double>(s, 0.0));
  for (std::size_t m = 0; m < trapped.size(); ++m)
    for (std::size_t t = 0; t < trapped[m].size(); ++t) sol.atoms[m][trapped[m][t]] = x(atom_offset[m] + static_cast<int>(t));
  return sol;
}

}  // namespace detail

struct QualityReport {
  double min_value = 0.0;        // most negative F_i on the grid
  double max_excess = 0.0;       // largest F_i - P_i on the grid
  double max_decrease = 0.0;     // largest drop between neighbouring grid points
  double min_atom = 0.0;
  double normalization = 1.0;    // sum F_i(K-) + balance-derived cap masses
  double eigen_residual = 0.0;   // max over regions, relative to ||M||_inf
};

// Probability mass held at x = K in each up-drift state of the last region,
// derived from flux balance at the cap rather than from P_i - F_i(K-).
inline std::vector<double> cap_masses_from_balance(const FluidSolution& sol) {
  const int s = sol.states();
  const auto& last = sol.regions.back();
  const Eigen::MatrixXd m = generator(sol.params.n, sol.params.rho, sol.params.beta);
  std::vector<int> up;
  for (int i = 0; i < s; ++i)
    if (last.spectrum.drift(i) > 0.0) up.push_back(i);
  std::vector<double> out(s, 0.0);
  if (up.empty()) return out;
  const auto u = static_cast<int>(up.size());
  Eigen::MatrixXd a(u, u);
  Eigen::VectorXd b(u);
  for (int r = 0; r < u; ++r) {
    const int i = up[r];
    for (int q = 0; q < u; ++q) a(r, q) = (r == q ? -m(i, i) : -m(i, up[q]));
    b(r) = last.spectrum.drift(i) * last.derivative(i, last.x_hi);
  }
  const Eigen::VectorXd x = a.fullPivLu().solve(b);
  for (int r = 0; r < u; ++r) out[up[r]] = x(r);
  return out;
}

inline QualityReport assess(const FluidSolution& sol, int grid = 1000) {
  QualityReport q;
  const int s = sol.states();
  const double kcap = sol.capacity();
  for (int i = 0; i < s; ++i) {
    double prev = sol.cdf(i, 0.0);
    for (int g = 0; g < grid; ++g) {
      const double x = kcap * g / (grid - 1);
      // Evaluate the last point from the left so the cap atom is not counted as growth.
      const double v = g == grid - 1 ? sol.cdf_left(i, x) : sol.cdf(i, x);
      q.min_value = std::min(q.min_value, v);
      q.max_excess = std::max(q.max_excess, v - sol.pmf[i]);
      q.max_decrease = std::max(q.max_decrease, prev - v);
      prev = v;
    }
  }
  for (const auto& layer : sol.atoms)
    for (double a : layer) q.min_atom = std::min(q.min_atom, a);
  const auto caps = cap_masses_from_balance(sol);
  q.normalization = sol.total_cdf_left(kcap);
  for (double c : caps) q.normalization += c;
  const Eigen::MatrixXd m = generator(sol.params.n, sol.params.rho, sol.params.beta);
  for (const auto& r : sol.regions) q.eigen_residual = std::max(q.eigen_residual, r.spectrum.residual(m) / inf_norm(m));
  return q;
}

inline void require_quality(const FluidSolution& sol) {
  const auto q = assess(sol);
  constexpr double slack = 1e-9;
  if (q.min_value < -slack || q.max_excess > slack || q.max_decrease > slack || q.min_atom < -slack)
    throw NumericError("solution is not a valid CDF (min " + std::to_string(q.min_value) + ", excess " +
                       std::to_string(q.max_excess) + ", decrease " + std::to_string(q.max_decrease) + ", atom " +
                       std::to_string(q.min_atom) + ")");
  if (std::abs(q.normalization - 1.0) > 1e-6)
    throw NumericError("total probability at K is " + std::to_string(q.normalization));
}

// Three-regime solve: [0,A1] at CER_t(1-alpha), [A1,A2] at CER_t, [A2,K] at CER_t(1+alpha).
inline FluidSolution solve(const FluidParams& p) {
  validate(p);
  auto sol = detail::solve_piecewise(p, {0.0, p.a1, p.a2, p.k},
                                     {p.service_rate(0), p.service_rate(1), p.service_rate(2)});
  require_quality(sol);
  return sol;
}

// Classic one-regime finite fluid queue on [0,K] served at CER_t throughout.
inline FluidSolution solve_single_regime(const FluidParams& p) {
  validate(p);
  check_no_zero_drift(p.n, p.lambda, p.cer_t);
  auto sol = detail::solve_piecewise(p, {0.0, p.k}, {p.cer_t});
  require_quality(sol);
  return sol;
}

// Carried load: arrivals minus overflow at the cap.
inline double throughput(const FluidSolution& sol) {
  const auto& last = sol.regions.back();
  double loss = 0.0;
  for (int i = 0; i < sol.states(); ++i) {
    const double d = last.spectrum.drift(i);
    if (d > 0.0) loss += d * (sol.pmf[i] - last.eval(i, last.x_hi));
  }
  return sol.arrival_rate() - loss;
}

// Output rate summed over where the probability mass sits: the service rate
// inside each region, the input rate while pinned at 0 or at a threshold, and
// the top service rate while pinned at K.
inline double throughput_by_service(const FluidSolution& sol) {
  const auto& p = sol.params;
  double t = 0.0;
  for (int i = 0; i < sol.states(); ++i) {
    const double in = i * p.lambda;
    const auto& first = sol.regions.front();
    if (first.spectrum.drift(i) < 0.0) t += in * first.eval(i, first.x_lo);
    for (const auto& r : sol.regions) {
      const double lo = r.eval(i, r.x_lo);
      const double hi = r.eval(i, r.x_hi);
      t += r.c * (hi - lo);
    }
    for (const auto& layer : sol.atoms) t += in * layer[i];
    const auto& last = sol.regions.back();
    if (last.spectrum.drift(i) > 0.0) t += last.c * (sol.pmf[i] - last.eval(i, last.x_hi));
  }
  return t;
}

inline double loss_probability(const FluidSolution& sol) {
  const double a = sol.arrival_rate();
  if (!(a > 0.0)) throw ValidationError("arrival rate is zero");
  return std::clamp(1.0 - throughput(sol) / a, 0.0, 1.0);
}

struct RegimeProbabilities {
  double low = 0.0;   // level in [0, A1]
  double mid = 0.0;   // (A1, A2]
  double high = 0.0;  // (A2, K]
};

inline RegimeProbabilities regime_probabilities(const FluidSolution& sol) {
  const auto& p = sol.params;
  const double f1 = sol.total_cdf(p.a1);
  const double f2 = sol.total_cdf(p.a2);
  return {f1, f2 - f1, 1.0 - f2};
}

// E[X] = integral over [0,K] of (1 - sum_i F_i(x)).
inline double mean_occupancy(const FluidSolution& sol) {
  double covered = 0.0;
  for (const auto& r : sol.regions) covered += r.integral_total();
  return sol.capacity() - covered;
}

struct DelayProbability {
  double value = 0.0;
  double raw = 0.0;
  bool clamped = false;
};

// Experimental: (1/T) (1 - sum_i F_i(A_m)) C_x with C_x the service rate on
// [A_m, A_{m+1}]. Its probabilistic meaning is unclear, so it is only
// reported, clamped to [0, 1].
inline DelayProbability delay_probability(const FluidSolution& sol, int m) {
  if (m != 1 && m != 2) throw UsageError("threshold index must be 1 or 2");
  if (sol.regions.size() != 3) throw UsageError("delay probability needs the three-regime solution");
  const double x = m == 1 ? sol.params.a1 : sol.params.a2;
  const double c = sol.regions[m].c;
  DelayProbability d;
  d.raw = (1.0 - sol.total_cdf(x)) * c / throughput(sol);
  d.value = std::clamp(d.raw, 0.0, 1.0);
  d.clamped = d.value != d.raw;
  return d;
}

// Largest |F_i(x) difference| between two solutions on a uniform grid over [0,K).
inline double max_cdf_gap(const FluidSolution& a, const FluidSolution& b, int grid = 1000) {
  double gap = 0.0;
  const double kcap = std::min(a.capacity(), b.capacity());
  for (int g = 0; g < grid; ++g) {
    const double x = kcap * g / grid;
    for (int i = 0; i < a.states(); ++i) gap = std::max(gap, std::abs(a.cdf(i, x) - b.cdf(i, x)));
  }
  return gap;
}

}  // namespace vsmooth::fluid
