#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "bbmlab/errors.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

struct ExperimentRecord {
  std::string experiment;
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_index = 0;
  std::map<std::string, double> params;
  std::map<std::string, double> stats;
  std::map<std::string, std::uint64_t> flags;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  bool insufficient = false;
};

inline Estimate mean_se(const std::vector<double>& xs) {
  Estimate e;
  e.n = xs.size();
  if (xs.empty()) {
    e.insufficient = true;
    return e;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.value = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - e.value) * (x - e.value);
  if (xs.size() > 1)
    e.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                     static_cast<double>(xs.size()));
  return e;
}

inline Estimate binomial_estimate(std::size_t hits, std::size_t n) {
  Estimate e;
  e.n = n;
  if (n == 0) {
    e.insufficient = true;
    return e;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  e.value = p;
  e.se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return e;
}

// Runs fn(index, rng) over indices [0, n), distributing across workers.
// Per-index seeds derive from (master_seed, index), and results land in an
// index-addressed vector, so output is independent of worker count and
// scheduling.
template <class T>
inline std::vector<T> parallel_map(
    std::size_t n, std::uint64_t master_seed, unsigned workers,
    const std::function<T(std::size_t, Rng&)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  auto body = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      Rng rng(derive_seed(master_seed, i));
      out[i] = fn(i, rng);
    }
  };
  if (workers <= 1 || n <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  return out;
}

// Replication driver: per-replicate seed = derive_seed(master_seed, index);
// errors are recorded in the replicate's flags rather than aborting the run.
inline std::vector<ExperimentRecord> run(
    const std::string& experiment, std::size_t replicates,
    std::uint64_t master_seed, unsigned workers,
    const std::function<void(std::size_t, Rng&, ExperimentRecord&)>& body) {
  return parallel_map<ExperimentRecord>(
      replicates, master_seed, workers,
      [&](std::size_t i, Rng& rng) {
        ExperimentRecord rec;
        rec.experiment = experiment;
        rec.master_seed = master_seed;
        rec.replicate_index = i;
        try {
          body(i, rng, rec);
        } catch (const resource_error&) {
          rec.flags["resource_error"] += 1;
        }
        return rec;
      });
}

struct Regression {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
};

// Least-squares slope of log y on x (or on log x when log_x is set).
inline Regression regress_loglinear(
    const std::vector<std::pair<double, double>>& points, bool log_x = false) {
  if (points.size() < 3) throw input_error("regress_loglinear: need >= 3 points");
  std::vector<double> xs, ys;
  for (const auto& [x, y] : points) {
    if (!(y > 0.0)) throw input_error("regress_loglinear: nonpositive y");
    xs.push_back(log_x ? std::log(x) : x);
    ys.push_back(std::log(y));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  Regression r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - r.intercept - r.slope * xs[i];
    rss += e * e;
  }
  if (xs.size() > 2)
    r.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return r;
}

// Chi-square goodness of fit of integer counts against Poisson(mean), with
// tail bins merged until every expected count is at least 5.
inline double poisson_gof(const std::vector<std::size_t>& counts, double mean) {
  if (!(mean > 0.0)) throw input_error("poisson_gof: mean must be > 0");
  if (counts.size() < 500) throw input_error("poisson_gof: need >= 500 counts");
  const double n = static_cast<double>(counts.size());
  std::size_t kmax = 0;
  for (auto c : counts) kmax = std::max(kmax, c);

  // Poisson pmf over 0..kmax, remainder mass in the upper tail.
  std::vector<double> pmf(kmax + 1);
  double p = std::exp(-mean);
  double cum = 0.0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    pmf[k] = p;
    cum += p;
    p *= mean / static_cast<double>(k + 1);
  }
  const double tail = std::max(0.0, 1.0 - cum);

  std::vector<double> expected;
  std::vector<double> observed;
  std::vector<std::size_t> hist(kmax + 2, 0);
  for (auto c : counts) ++hist[c];

  // Accumulate adjacent cells until expected >= 5; remaining low-mass cells
  // and the upper tail join the last bin.
  double acc_e = 0.0, acc_o = 0.0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    acc_e += n * pmf[k];
    acc_o += static_cast<double>(hist[k]);
    if (acc_e >= 5.0) {
      expected.push_back(acc_e);
      observed.push_back(acc_o);
      acc_e = acc_o = 0.0;
    }
  }
  acc_e += n * tail;
  if (!expected.empty()) {
    expected.back() += acc_e;
    observed.back() += acc_o;
  } else {
    expected.push_back(acc_e);
    observed.push_back(acc_o);
  }
  if (expected.size() < 2) throw input_error("poisson_gof: insufficient data");

  double stat = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  boost::math::chi_squared dist(static_cast<double>(expected.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Integral of r^{-3/2} exp(-1/(2r)) over (0, inf). The substitutions
// u = 1/r, u = x^2 turn the integrand into 2 exp(-x^2 / 2) on (0, inf),
// integrated here by composite Simpson on [0, X] with a negligible tail.
inline double gamma_integral_unit() {
  const double X = 14.0;
  const std::size_t n = 1 << 16;  // even
  const double h = X / static_cast<double>(n);
  auto f = [](double x) { return 2.0 * std::exp(-0.5 * x * x); };
  double sum = f(0.0) + f(X);
  for (std::size_t i = 1; i < n; ++i)
    sum += f(h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace bbmlab
