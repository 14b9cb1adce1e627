#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "privaug/eval.hpp"

namespace privaug {

double top1_match(const NoisyChannelParser& p, const std::vector<ParallelPair>& test) {
  if (test.empty()) throw DataError("top1_match: empty test set");
  std::size_t hits = 0;
  for (const auto& pair : test) {
    try {
      hits += parse_top1(p, pair.natural).canonical == pair.canonical;
    } catch (const DecodeError&) {
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
}

TrialReport TrialReport::from_values(std::string method, std::vector<double> top1, std::vector<std::uint64_t> seeds) {
  if (top1.size() < 2) throw DataError("trial report needs at least 2 trials");
  if (seeds.size() != top1.size()) throw DataError("trial report: one seed per trial required");
  TrialReport r{std::move(method), std::move(top1), std::move(seeds)};
  const double n = static_cast<double>(r.top1.size());
  r.mean = std::accumulate(r.top1.begin(), r.top1.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r.top1) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / (n - 1));
  return r;
}

std::string TrialReport::to_json() const {
  nlohmann::ordered_json j{{"method", method}, {"top1", top1}, {"seeds", seeds}, {"mean", mean}, {"stddev", stddev}};
  return j.dump(2) + "\n";
}

TrialReport TrialReport::from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    return from_values(j.at("method").get<std::string>(), j.at("top1").get<std::vector<double>>(),
                       j.at("seeds").get<std::vector<std::uint64_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trial report: ") + e.what());
  }
}

namespace {

// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
double beta_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  auto guard = [&](double v) { return std::abs(v) < kTiny ? kTiny : v; };
  double c = 1.0;
  double d = 1.0 / guard(1.0 - (a + b) * x / (a + 1.0));
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    // Even term.
    double coeff = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 / guard(1.0 + coeff * d);
    c = guard(1.0 + coeff / c);
    h *= d * c;
    // Odd term.
    coeff = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 / guard(1.0 + coeff * d);
    c = guard(1.0 + coeff / c);
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || x < 0.0 || x > 1.0) throw DataError("incomplete_beta: argument out of range");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double dof) {
  if (!(dof > 0.0)) throw DataError("student_t: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("paired_ttest: samples differ in length");
  if (a.size() < 2) throw DataError("paired_ttest: at least 2 pairs required");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
  double ss = 0.0, scale = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean), scale = std::max(scale, std::abs(d));
  const double var = ss / (n - 1);
  // Differences equal up to rounding leave t undefined.
  if (!(std::sqrt(var) > 1e-12 * scale)) throw DataError("paired_ttest: differences have zero variance");
  TTestResult r;
  r.dof = a.size() - 1;
  r.t = mean / std::sqrt(var / n);
  r.p = student_t_two_sided(r.t, static_cast<double>(r.dof));
  return r;
}

}  // namespace privaug
