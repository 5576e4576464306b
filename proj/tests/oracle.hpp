#pragma once

// Dense reference implementations used only by the tests. They assemble V^-1,
// P and A as explicit n x n matrices with plain LU/LDLT solves, independent of
// the factorisation route taken by the library.

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace oracle {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd inverse(const MatrixXd& m) { return m.fullPivLu().inverse(); }

inline double logdet(const MatrixXd& m) {
  const Eigen::FullPivLU<MatrixXd> lu(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(std::abs(lu.matrixLU()(i, i)));
  return s;
}

/// P = V^-1 - V^-1 X (X'V^-1X)^-1 X'V^-1
inline MatrixXd p_matrix(const MatrixXd& x, const MatrixXd& v) {
  const MatrixXd vi = inverse(v);
  if (x.cols() == 0) return vi;
  return vi - vi * x * inverse(x.transpose() * vi * x) * x.transpose() * vi;
}

/// A = V^-1 - V^-1 X (X'V^-1X + W^-1)^-1 X'V^-1
inline MatrixXd a_matrix(const MatrixXd& x, const MatrixXd& v, const MatrixXd& w) {
  const MatrixXd vi = inverse(v);
  if (x.cols() == 0) return vi;
  return vi - vi * x * inverse(x.transpose() * vi * x + inverse(w)) * x.transpose() * vi;
}

/// A = (V + X W X')^-1
inline MatrixXd a_matrix_woodbury(const MatrixXd& x, const MatrixXd& v, const MatrixXd& w) {
  return inverse(v + x * w * x.transpose());
}

struct Dense {
  int n = 0;
  int p = 0;
  double ypy = 0.0;
  double yay = 0.0;
  double sigma2_hat = 0.0;
  double sigma2_tilde = 0.0;
  double logdet_v = 0.0;
  double logdet_xvx = 0.0;
  double logdet_wxvx_plus_i = 0.0;
};

inline Dense dense(const VectorXd& y, const MatrixXd& x, const MatrixXd& v, const MatrixXd& w) {
  Dense d;
  d.n = static_cast<int>(y.size());
  d.p = static_cast<int>(x.cols());
  d.ypy = y.dot(p_matrix(x, v) * y);
  d.yay = y.dot(a_matrix(x, v, w) * y);
  d.sigma2_hat = d.ypy / d.n;
  d.sigma2_tilde = d.ypy / (d.n - d.p);
  d.logdet_v = logdet(v);
  if (d.p > 0) {
    const MatrixXd xvx = x.transpose() * inverse(v) * x;
    d.logdet_xvx = logdet(xvx);
    d.logdet_wxvx_plus_i = logdet(w * xvx + MatrixXd::Identity(d.p, d.p));
  }
  return d;
}

inline double neg2_log_marginal(const Dense& d) {
  return d.n * std::log(2 * M_PI * d.sigma2_hat) + d.logdet_v + d.logdet_wxvx_plus_i + d.yay / d.sigma2_hat;
}

inline double neg2_log_residual(const Dense& d) {
  return (d.n - d.p) * std::log(2 * M_PI * d.sigma2_tilde) + d.logdet_v + d.logdet_xvx + d.ypy / d.sigma2_tilde;
}

inline double ic_pi1(const Dense& d) { return neg2_log_marginal(d) + 2.0 * d.n / (d.n - d.p - 2); }
inline double ic_pi1_star(const Dense& d) {
  return d.n * std::log(2 * M_PI * d.sigma2_hat) + d.logdet_v + d.p * std::log(d.n) + 2 + d.yay / d.sigma2_hat;
}
inline double ic_pi2(const Dense& d) {
  return d.n * std::log(2 * M_PI * d.sigma2_hat) + d.logdet_v + d.p * std::log(d.n) + d.p;
}
inline double ic_r(const Dense& d) { return neg2_log_residual(d) + 2.0 * (d.n - d.p) / (d.n - d.p - 2); }
inline double ic_r_star(const Dense& d) {
  const double m = d.n - d.p;
  return m * std::log(2 * M_PI * d.sigma2_tilde) + d.logdet_v + d.p * std::log(d.n) + m * m / (m - 2);
}
/// The simplified closed form of the residual information criterion.
inline double ric(const Dense& d) {
  return d.n * std::log(2 * M_PI * d.sigma2_tilde) + d.logdet_v + d.p * std::log(d.n) + 4.0 / (d.n - d.p - 2) -
         d.p;
}
inline double aic(const Dense& d) {
  return d.n * std::log(2 * M_PI * d.sigma2_hat) + d.logdet_v + d.n + 2.0 * (d.p + 1);
}
inline double bic(const Dense& d) {
  return d.n * std::log(2 * M_PI * d.sigma2_hat) + d.logdet_v + d.n + d.p * std::log(d.n);
}

/// DIC at sigma2_hat from the explicit posterior moments: the expected
/// deviance written as the trace expression, minus the deviance at the mean.
inline double dic(const VectorXd& y, const MatrixXd& x, const MatrixXd& v, const MatrixXd& w) {
  const Dense d = dense(y, x, v, w);
  const MatrixXd vi = inverse(v);
  const double s2 = d.sigma2_hat;
  const double base = d.n * std::log(2 * M_PI * s2) + d.logdet_v;
  if (d.p == 0) return base + y.dot(vi * y) / s2;
  const MatrixXd g = x.transpose() * vi * x;
  const MatrixXd post_cov = s2 * inverse(g + inverse(w));
  const VectorXd bt = inverse(g + inverse(w)) * x.transpose() * vi * y;
  const double two_ed = 2 * base + 2 * ((g * (post_cov + bt * bt.transpose())).trace() - 2 * y.dot(vi * x * bt) +
                                        y.dot(vi * y)) / s2;
  const VectorXd r = y - x * bt;
  const double d_mean = base + r.dot(vi * r) / s2;
  return two_ed - d_mean;
}

inline MatrixXd ar1_v(int n, double phi) {
  MatrixXd v(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v(i, j) = std::pow(phi, std::abs(i - j));
  return v;
}

inline MatrixXd random_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

inline MatrixXd random_spd(int n, std::mt19937_64& rng) {
  const MatrixXd b = random_normal(n, n, rng);
  return b * b.transpose() + n * MatrixXd::Identity(n, n);
}

/// Welford accumulator for Monte Carlo means.
struct Running {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / (count - 1) : 0.0; }
  double standard_error() const { return std::sqrt(variance() / count); }
};

}  // namespace oracle
