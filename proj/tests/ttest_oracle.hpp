// Independent reference for the paired t-test: the textbook sum-of-squares
// formula for t, Boost's Student's t distribution for p, and a Simpson-rule
// integral of the t density as a second p-value reference.
#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

namespace privaug::testing {

struct OracleTTest {
  double t = 0.0;
  double p = 1.0;
};

inline OracleTTest oracle_paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d;
    sum_sq += d * d;
  }
  const double sd = std::sqrt((sum_sq - sum * sum / n) / (n - 1.0));
  OracleTTest r;
  r.t = (sum / n) / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1.0);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

/// 1 - 2 * integral of the t density over [0, |t|] by composite Simpson.
inline double simpson_two_sided_p(double t, double dof, int intervals = 200000) {
  const double x_end = std::abs(t);
  const double norm = std::exp(std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0)) / std::sqrt(dof * M_PI);
  auto pdf = [&](double x) { return norm * std::pow(1.0 + x * x / dof, -(dof + 1.0) / 2.0); };
  const double h = x_end / intervals;
  double s = pdf(0.0) + pdf(x_end);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace privaug::testing
