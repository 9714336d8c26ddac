#pragma once

// Fluid model of the smoothing buffer: N independent ON-OFF sources, each
// turning on at rate rho and off at rate beta, emit lambda packets/s while ON.
// The ON-count i is a birth-death chain (i -> i+1 at (N-i)*rho, i -> i-1 at
// i*beta). The buffer drains at C_x = CER_t(1-alpha), CER_t, CER_t(1+alpha)
// in [0,A1], [A1,A2], [A2,K]. Per region the joint CDF F(x) obeys
//
//   D F'(x) = M F(x),  D = diag(i*lambda - C_x),
//
// with M the transpose of the chain generator, so F is a combination of
// exponentials e^{z x} over the eigenpairs of D^{-1} M.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "vsmooth/error.hpp"

namespace vsmooth::fluid {

inline constexpr int kMaxSources = 64;

struct FluidParams {
  int n = 1;             // number of sources
  double rho = 1.0;      // OFF -> ON rate, 1/s
  double beta = 1.0;     // ON -> OFF rate, 1/s
  double lambda = 1.0;   // packets/s per ON source
  double cer_t = 1.0;    // packets/s
  double alpha = 0.0;    // in [0, 1]
  double a1 = 1.0;       // packets
  double a2 = 2.0;       // packets
  double k = 3.0;        // buffer capacity, packets

  double service_rate(int region) const {
    switch (region) {
      case 0: return cer_t * (1.0 - alpha);
      case 1: return cer_t;
      default: return cer_t * (1.0 + alpha);
    }
  }
};

inline double drift_tolerance(int n, double lambda, double c) {
  return 1e-12 * std::max({1.0, n * lambda, std::abs(c)});
}

// Throws SingularDriftError naming the first state with i*lambda == c.
inline void check_no_zero_drift(int n, double lambda, double c) {
  for (int i = 0; i <= n; ++i)
    if (std::abs(i * lambda - c) <= drift_tolerance(n, lambda, c)) throw SingularDriftError(i, c);
}

inline void validate(const FluidParams& p) {
  if (p.n < 1) throw ValidationError("need at least one source");
  if (p.n > kMaxSources)
    throw ValidationError("N > " + std::to_string(kMaxSources) +
                          " is not supported; aggregate sources or rescale lambda");
  if (!(p.rho > 0.0) || !(p.beta > 0.0) || !(p.lambda > 0.0)) throw ValidationError("rho, beta, lambda must be > 0");
  if (!(p.cer_t > 0.0)) throw ValidationError("cer_t must be > 0");
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (!(p.a1 > 0.0 && p.a1 < p.a2 && p.a2 < p.k)) throw ValidationError("need 0 < A1 < A2 < K");
  for (int r = 0; r < 3; ++r) check_no_zero_drift(p.n, p.lambda, p.service_rate(r));
}

inline double on_probability(double rho, double beta) { return rho / (rho + beta); }

// Binomial(N, rho/(rho+beta)) distribution of the ON-count.
inline std::vector<double> on_pmf(int n, double rho, double beta) {
  if (n < 0 || !(rho > 0.0) || !(beta > 0.0)) throw ValidationError("on_pmf needs n >= 0 and positive rates");
  const double p = on_probability(rho, beta);
  std::vector<double> pmf(n + 1);
  // log-space keeps the tails representable for every N we accept
  const double lp = std::log(p), lq = std::log1p(-p);
  for (int i = 0; i <= n; ++i) {
    const double lc = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    pmf[i] = std::exp(lc + i * lp + (n - i) * lq);
  }
  return pmf;
}

// M[i][i-1] = (N-i+1) rho, M[i][i+1] = (i+1) beta, M[i][i] = -((N-i) rho + i beta).
// Columns sum to zero.
inline Eigen::MatrixXd generator(int n, double rho, double beta) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int i = 0; i <= n; ++i) {
    if (i > 0) m(i, i - 1) = (n - i + 1) * rho;
    if (i < n) m(i, i + 1) = (i + 1) * beta;
    m(i, i) = -((n - i) * rho + i * beta);
  }
  const double scale = m.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::RowVectorXd col_sums = m.colwise().sum();
  if (col_sums.cwiseAbs().maxCoeff() > 1e-12 * scale) throw NumericError("generator columns do not sum to zero");
  return m;
}

// Diagonal of D: i*lambda - c.
inline Eigen::VectorXd drift(int n, double lambda, double c) {
  check_no_zero_drift(n, lambda, c);
  Eigen::VectorXd d(n + 1);
  for (int i = 0; i <= n; ++i) d(i) = i * lambda - c;
  return d;
}

// Eigen-data of D^{-1} M for one service rate. Columns of `vectors` are the
// eigenvectors, scaled to unit max-norm; eigenvalues ascending.
struct SpectralRegion {
  double c = 0.0;
  Eigen::VectorXd drift;
  std::vector<double> z;
  Eigen::MatrixXd vectors;
  int zero_index = -1;  // position of the stationary (z = 0) pair

  // max_j ||z_j D v_j - M v_j||_inf
  double residual(const Eigen::MatrixXd& m) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const Eigen::VectorXd v = vectors.col(static_cast<Eigen::Index>(j));
      const Eigen::VectorXd r = z[j] * drift.cwiseProduct(v) - m * v;
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    return worst;
  }
};

inline double inf_norm(const Eigen::MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

namespace detail {

inline Eigen::VectorXd normalized(Eigen::VectorXd v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  return v / v(arg);
}

// One pass of inverse iteration at a slightly offset shift.
inline Eigen::VectorXd polish(const Eigen::MatrixXd& g, double z, const Eigen::VectorXd& v) {
  const auto n = g.rows();
  const double shift = z + 1e-10 * std::max(1.0, std::abs(z));
  Eigen::MatrixXd a = g - shift * Eigen::MatrixXd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd w = lu.solve(v);
  if (!w.allFinite() || w.cwiseAbs().maxCoeff() == 0.0) return v;
  return normalized(w);
}

}  // namespace detail

inline SpectralRegion spectral_region(const FluidParams& p, double c) {
  const int n = p.n;
  SpectralRegion out;
  out.c = c;
  out.drift = drift(n, p.lambda, c);
  const Eigen::MatrixXd m = generator(n, p.rho, p.beta);
  const Eigen::MatrixXd g = out.drift.cwiseInverse().asDiagonal() * m;
  const double gnorm = inf_norm(g);

  Eigen::EigenSolver<Eigen::MatrixXd> es(g, true);
  if (es.info() != Eigen::Success)
    throw NumericError("eigen-solver did not converge for C_x = " + std::to_string(c) + ", N = " + std::to_string(n));
  const auto& evals = es.eigenvalues();
  const auto& evecs = es.eigenvectors();

  struct Pair {
    double z;
    Eigen::VectorXd v;
  };
  std::vector<Pair> pairs;
  for (int j = 0; j <= n; ++j) {
    if (std::abs(evals(j).imag()) > 1e-7 * std::max(1.0, gnorm))
      throw NumericError("complex eigenvalue " + std::to_string(evals(j).real()) + "+" +
                         std::to_string(evals(j).imag()) + "i for C_x = " + std::to_string(c));
    pairs.push_back({evals(j).real(), detail::normalized(evecs.col(j).real())});
  }

  // M p = 0 for the binomial pmf, so z = 0 always belongs to the spectrum;
  // pin that pair exactly.
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return std::abs(a.z) < std::abs(b.z); });
  const double zero_tol = 1e-8 * std::max(1.0, gnorm);
  if (std::abs(pairs[0].z) > zero_tol) throw NumericError("no zero eigenvalue found for C_x = " + std::to_string(c));
  if (n >= 1 && std::abs(pairs[1].z) <= zero_tol)
    throw ModelDegenerateError("zero mean drift at C_x = " + std::to_string(c) +
                               " (repeated zero eigenvalue); move C_x away from N*lambda*p_on");
  const auto pmf = on_pmf(n, p.rho, p.beta);
  pairs[0].z = 0.0;
  pairs[0].v = detail::normalized(Eigen::Map<const Eigen::VectorXd>(pmf.data(), n + 1));

  for (std::size_t j = 1; j < pairs.size(); ++j) pairs[j].v = detail::polish(g, pairs[j].z, pairs[j].v);

  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.z < b.z; });
  for (std::size_t j = 1; j < pairs.size(); ++j)
    if (pairs[j].z - pairs[j - 1].z <= 1e-10 * std::max(1.0, gnorm))
      throw ModelDegenerateError("repeated eigenvalue for C_x = " + std::to_string(c));

  out.z.resize(pairs.size());
  out.vectors.resize(n + 1, n + 1);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    out.z[j] = pairs[j].z;
    out.vectors.col(static_cast<Eigen::Index>(j)) = pairs[j].v;
    if (pairs[j].z == 0.0) out.zero_index = static_cast<int>(j);
  }

  const double res = out.residual(m);
  if (res > 1e-8 * inf_norm(m))
    throw NumericError("eigen residual " + std::to_string(res) + " exceeds 1e-8*||M|| for C_x = " + std::to_string(c));
  return out;
}

}  // namespace vsmooth::fluid
