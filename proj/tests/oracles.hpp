#pragma once
// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's numerical code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// Dense log density of row-stacked vec(gamma) under N(0, Sigma_D (x) Sigma_g).
inline double dense_kron_logpdf(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& sigma_d,
                                const Eigen::MatrixXd& sigma_g) {
  const auto n = gamma.rows(), q = gamma.cols();
  Eigen::MatrixXd big(n * q, n * q);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      big.block(i * q, k * q, q, q) = sigma_d(i, k) * sigma_g;
  Eigen::VectorXd v(n * q);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < q; ++c) v(i * q + c) = gamma(i, c);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(big);
  const double logdet = std::log(std::abs(lu.determinant()));
  const double quad = v.dot(lu.solve(v));
  return -0.5 * (static_cast<double>(n * q) * std::log(2.0 * kPi) + logdet + quad);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// P(X > h, Y > k) for a standard bivariate normal with correlation rho, by
// composite Simpson integration of phi(x) * P(Y > k | x) over x in [h, h + 12].
inline double bvn_upper(double h, double k, double rho) {
  const int n = 4000;
  const double a = h, b = std::max(h, 0.0) + 12.0;
  const double step = (b - a) / n;
  const double s = std::sqrt(1.0 - rho * rho);
  auto f = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi) * norm_cdf((rho * x - k) / s);
  };
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * step) * (i % 2 ? 4.0 : 2.0);
  return acc * step / 3.0;
}

// Maximum-likelihood tetrachoric correlation of [[a, b], [c, d]] with
// a = both, thresholds fixed at the observed margins. The likelihood is
// maximized by a grid search over rho followed by golden-section refinement.
inline double ml_tetrachoric(double a, double b, double c, double d) {
  const double n = a + b + c + d;
  const double h = norm_quantile(1.0 - (a + b) / n);
  const double k = norm_quantile(1.0 - (a + c) / n);
  const double p1 = (a + b) / n, p2 = (a + c) / n;
  auto loglik = [&](double rho) {
    const double p11 = std::clamp(bvn_upper(h, k, rho), 1e-300, 1.0);
    const double p10 = std::max(p1 - p11, 1e-300);
    const double p01 = std::max(p2 - p11, 1e-300);
    const double p00 = std::max(1.0 - p1 - p2 + p11, 1e-300);
    return a * std::log(p11) + b * std::log(p10) + c * std::log(p01) + d * std::log(p00);
  };
  double best = -0.999, best_ll = -1e300;
  for (int i = -999; i <= 999; i += 6) {
    const double r = i / 1000.0;
    const double ll = loglik(r);
    if (ll > best_ll) {
      best_ll = ll;
      best = r;
    }
  }
  double lo = std::max(-0.9999, best - 0.006), hi = std::min(0.9999, best + 0.006);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (loglik(x1) < loglik(x2)) lo = x1;
    else hi = x2;
  }
  return 0.5 * (lo + hi);
}

struct BruteSelection {
  double threshold;
  std::vector<int> selected;
  bool feasible;
};

// Exhaustive search over every distinct PIP as a threshold, evaluating both
// rates from their definitions.
inline BruteSelection brute_force_threshold(const std::vector<double>& pips, double alpha) {
  std::vector<double> cands = pips;
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  const double n = static_cast<double>(pips.size());
  bool found = false;
  double best_t = 0.0, best_fnr = 0.0;
  for (double t : cands) {
    double v = 0.0, f = 0.0, r = 0.0;
    for (double p : pips) {
      if (p >= t) {
        v += 1.0 - p;
        r += 1.0;
      } else {
        f += p;
      }
    }
    const double fdr = v / std::max(r, 1.0);
    const double fnr = f / std::max(n - r, 1.0);
    if (r == 0.0 || fdr > alpha) continue;
    if (!found || fnr < best_fnr || (fnr == best_fnr && t < best_t)) {
      found = true;
      best_t = t;
      best_fnr = fnr;
    }
  }
  BruteSelection out{found ? best_t : std::nextafter(1.0, 2.0), {}, found};
  for (std::size_t i = 0; i < pips.size(); ++i)
    if (found && pips[i] >= best_t) out.selected.push_back(static_cast<int>(i));
  return out;
}

// Largest k with p_(k) <= k alpha / n, found by checking every k.
inline std::vector<int> brute_force_bh(const std::vector<double>& p, double alpha) {
  const std::size_t n = p.size();
  std::size_t best_k = 0;
  double cutoff = -1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double line = static_cast<double>(k) * alpha / static_cast<double>(n);
    std::size_t count = 0;
    for (double v : p) count += v <= line ? 1 : 0;
    // the k-th smallest p-value is <= line iff at least k values are
    if (count >= k) {
      best_k = k;
      cutoff = line;
    }
  }
  std::vector<int> out;
  if (best_k == 0) return out;
  for (std::size_t i = 0; i < n; ++i)
    if (p[i] <= cutoff) out.push_back(static_cast<int>(i));
  return out;
}

// Two-drug toy with a single random-effect column (the exposure slope),
// beta held fixed, Sigma_gamma = exp(2 v) with v ~ N(0, 1), pi ~ Beta(1, 1)
// and gamma ~ N(0, exp(2 v) Sigma_D). Returns Pr(delta_i = 1 | data) for
// i = 0, 1 by enumerating delta and integrating gamma and v on grids.
struct ToyStratum {
  int drug;
  int post;
  double m;
  double y;
};

inline double binom_kernel(double y, double m, double eta) {
  const double l1pe = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
  return y * eta - m * l1pe;
}

inline std::array<double, 2> toy_inclusion(const std::vector<ToyStratum>& strata, double base_eta,
                                           double rho) {
  // Log-likelihood of drug i as a function of its exposure effect t.
  auto loglik = [&](int drug, double t) {
    double s = 0.0;
    for (const auto& st : strata)
      if (st.drug == drug) s += binom_kernel(st.y, st.m, base_eta + t * st.post);
    return s;
  };
  // pi integrated out: B(k + 1, 3 - k)
  const double beta_fn[3] = {1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0};

  const int nv = 201;
  const double v_lo = -6.0, v_hi = 4.0;
  const double dv = (v_hi - v_lo) / (nv - 1);
  const int ng = 801;
  const double g_lo = -6.0, g_hi = 6.0;
  const double dg = (g_hi - g_lo) / (ng - 1);
  std::vector<double> grid(ng), e0(ng), e1(ng);
  for (int k = 0; k < ng; ++k) {
    grid[k] = g_lo + k * dg;
    e0[k] = std::exp(loglik(0, grid[k]) - loglik(0, 0.0));
    e1[k] = std::exp(loglik(1, grid[k]) - loglik(1, 0.0));
  }
  // Weights relative to the all-excluded likelihood, for delta = 00, 10, 01, 11.
  double w[4] = {0, 0, 0, 0};
  const double det = 1.0 - rho * rho;
  for (int iv = 0; iv < nv; ++iv) {
    const double v = v_lo + iv * dv;
    const double pv = std::exp(-0.5 * v * v) / std::sqrt(2.0 * kPi) * (iv == 0 || iv == nv - 1 ? 0.5 : 1.0) * dv;
    const double s2 = std::exp(2.0 * v);
    const double sd = std::exp(v);
    if (sd < 8.0 * dg) {
      // Prior narrower than the fixed grid resolves: integrate in whitened
      // coordinates, where the likelihood is smooth on the prior's scale.
      const int na = 2001;
      const double lo = -8.0 * sd, step = 16.0 * sd / (na - 1);
      double m0 = 0.0, m1 = 0.0;
      for (int k = 0; k < na; ++k) {
        const double x = lo + k * step;
        const double wt = std::exp(-0.5 * x * x / s2) / (sd * std::sqrt(2.0 * kPi)) * step *
                          (k == 0 || k == na - 1 ? 0.5 : 1.0);
        m0 += wt * std::exp(loglik(0, x) - loglik(0, 0.0));
        m1 += wt * std::exp(loglik(1, x) - loglik(1, 0.0));
      }
      // Joint term on a grid in whitened coordinates.
      const int nz = 241;
      const double zl = -8.0, dz = 16.0 / (nz - 1);
      double m01 = 0.0;
      for (int a = 0; a < nz; ++a) {
        const double z1 = zl + a * dz;
        const double x1 = sd * z1;
        const double l1 = std::exp(loglik(0, x1) - loglik(0, 0.0));
        for (int b = 0; b < nz; ++b) {
          const double z2 = zl + b * dz;
          const double x2 = sd * (rho * z1 + std::sqrt(det) * z2);
          const double wt = std::exp(-0.5 * (z1 * z1 + z2 * z2)) / (2.0 * kPi) * dz * dz;
          m01 += wt * l1 * std::exp(loglik(1, x2) - loglik(1, 0.0));
        }
      }
      w[0] += pv;
      w[1] += pv * m0;
      w[2] += pv * m1;
      w[3] += pv * m01;
      continue;
    }
    double m0 = 0.0, m1 = 0.0, m01 = 0.0;
    std::vector<double> marg(ng);
    for (int k = 0; k < ng; ++k) {
      marg[k] = std::exp(-0.5 * grid[k] * grid[k] / s2) / (sd * std::sqrt(2.0 * kPi)) * dg;
      m0 += marg[k] * e0[k];
      m1 += marg[k] * e1[k];
    }
    const double norm2 = 1.0 / (2.0 * kPi * s2 * std::sqrt(det)) * dg * dg;
    for (int a = 0; a < ng; ++a) {
      if (e0[a] == 0.0) continue;
      for (int b = 0; b < ng; ++b) {
        const double x1 = grid[a], x2 = grid[b];
        const double q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (det * s2);
        if (q > 80.0) continue;
        m01 += norm2 * std::exp(-0.5 * q) * e0[a] * e1[b];
      }
    }
    w[0] += pv;
    w[1] += pv * m0;
    w[2] += pv * m1;
    w[3] += pv * m01;
  }
  const double p00 = w[0] * beta_fn[0];
  const double p10 = w[1] * beta_fn[1];
  const double p01 = w[2] * beta_fn[1];
  const double p11 = w[3] * beta_fn[2];
  const double z = p00 + p10 + p01 + p11;
  return {(p10 + p11) / z, (p01 + p11) / z};
}

}  // namespace oracle
