#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bbmlab/bbm.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/mc.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// gamma_{t,s} = (3 / (2 sqrt(2))) (log+ s - (s/t) log+ t). Vanishes at both
// endpoints; |gamma_{t,s}| <= 1 + log+(s ^ (t-s)).
inline double gamma_drift(double t, double s) {
  if (s < 0.0 || s > t) throw input_error("gamma_drift: s outside [0, t]");
  return (3.0 / (2.0 * kSqrt2)) * (log_plus(s) - (s / t) * log_plus(t));
}

// Brownian bridge from (0, x) to (t, y), sampled sequentially at the given
// sorted times (first must be 0, last must be t). Conditional on the value
// already drawn at s_i, the value at s_{i+1} is Gaussian with the standard
// bridge mean and variance toward the fixed right endpoint.
inline std::vector<double> sample_bridge_at(double t, double x, double y,
                                            const std::vector<double>& times,
                                            Rng& rng) {
  std::vector<double> w(times.size());
  if (times.empty()) return w;
  w.front() = x;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double s0 = times[i], s1 = times[i + 1];
    const double rem = t - s0;
    if (s1 >= t) {
      w[i + 1] = y;
      continue;
    }
    const double frac = (s1 - s0) / rem;
    const double mean = w[i] + frac * (y - w[i]);
    const double var = (s1 - s0) * (t - s1) / rem;
    w[i + 1] = rng.normal(mean, std::sqrt(var));
  }
  w.back() = y;
  return w;
}

// Bridge values on a uniform grid union extra_times (0 and t always present).
inline std::pair<std::vector<double>, std::vector<double>> sample_bridge(
    double t, double x, double y, const std::vector<double>& extra_times,
    double grid_dt, Rng& rng) {
  if (!(t > 0.0)) throw input_error("sample_bridge: t must be > 0");
  std::vector<double> times{0.0, t};
  if (grid_dt > 0.0)
    for (double s = grid_dt; s < t; s += grid_dt) times.push_back(s);
  for (double s : extra_times)
    if (s > 0.0 && s < t) times.push_back(s);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return {times, sample_bridge_at(t, x, y, times, rng)};
}

// Empirical quantile tables of the centered BBM maximum h*_s - m_s per age,
// with nearest-age lookup. Coarse age resolution suffices for large ages
// because the centered maximum converges in law.
class DecorationTable {
 public:
  struct Entry {
    double age = 0.0;
    std::vector<double> quantiles;  // 1001 points, p = k / 1000
    std::size_t n = 0;
  };

  std::vector<Entry> entries;  // sorted by age

  bool empty() const { return entries.empty(); }

  const Entry& nearest(double age) const {
    if (entries.empty()) throw input_error("empty decoration table");
    std::size_t best = 0;
    double best_d = std::abs(entries[0].age - age);
    for (std::size_t i = 1; i < entries.size(); ++i) {
      const double d = std::abs(entries[i].age - age);
      if (d < best_d) {
        best = i;
        best_d = d;
      }
    }
    return entries[best];
  }

  double sample(double age, Rng& rng) const {
    const Entry& e = nearest(age);
    const double u = rng.uniform() * 1000.0;
    const std::size_t k = std::min<std::size_t>(999, static_cast<std::size_t>(u));
    const double frac = u - static_cast<double>(k);
    return e.quantiles[k] + frac * (e.quantiles[k + 1] - e.quantiles[k]);
  }

  static DecorationTable build(const std::vector<double>& ages, std::size_t n,
                               double barrier_b, std::uint64_t seed,
                               unsigned workers) {
    DecorationTable table;
    for (std::size_t a = 0; a < ages.size(); ++a) {
      const double age = ages[a];
      auto maxima = parallel_map<double>(
          n, derive_seed(seed, a), workers, [&](std::size_t, Rng& rng) {
            BbmConfig cfg;
            cfg.horizon_t = age;
            cfg.prune = age >= 8.0;
            cfg.barrier_B = barrier_b;
            cfg.max_population = 4'000'000;
            std::vector<double> heights;
            try {
              heights = simulate_heights(cfg, rng);
            } catch (const resource_error&) {
              // The barrier-restricted birth count is ~ e^{sqrt2 (y + B)}
              // for an overshoot y above the line, so an overflow pins the
              // centered max near the height implied by the budget.
              return std::log(4.0e6) / kSqrt2 - barrier_b +
                     (kSqrt2 * age - m(age));
            }
            // A fully pruned population means the max fell below the
            // barrier; stand in with the barrier floor.
            double best = kSqrt2 * age - barrier_b;
            for (double h : heights) best = std::max(best, h);
            return best - m(age);
          });
      std::sort(maxima.begin(), maxima.end());
      Entry e;
      e.age = age;
      e.n = n;
      e.quantiles.resize(1001);
      for (std::size_t k = 0; k <= 1000; ++k) {
        const double pos = static_cast<double>(k) / 1000.0 *
                           static_cast<double>(n - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        e.quantiles[k] = i + 1 < n
                             ? maxima[i] + frac * (maxima[i + 1] - maxima[i])
                             : maxima[n - 1];
      }
      table.entries.push_back(std::move(e));
    }
    return table;
  }

  static std::vector<double> default_ages() {
    return {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
  }

  void save(const std::string& path) const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : entries)
      j.push_back({{"age", e.age}, {"quantiles", e.quantiles}, {"n", e.n}});
    std::ofstream out(path);
    if (!out) throw input_error("cannot write " + path);
    out << j.dump() << "\n";
  }

  static DecorationTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot read " + path);
    nlohmann::json j;
    in >> j;
    DecorationTable table;
    for (const auto& ej : j) {
      Entry e;
      e.age = ej.at("age").get<double>();
      e.quantiles = ej.at("quantiles").get<std::vector<double>>();
      e.n = ej.at("n").get<std::size_t>();
      if (e.quantiles.size() != 1001)
        throw input_error("decoration table entry must have 1001 quantiles");
      table.entries.push_back(std::move(e));
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const Entry& a, const Entry& b) { return a.age < b.age; });
    return table;
  }
};

// One realization of the decorated random-walk-like process: drift-corrected
// bridge values at grid and Poisson times, with a decoration maximum per
// Poisson time.
struct DRWPath {
  double t = 0.0;
  std::vector<double> times;
  std::vector<double> w;      // bridge values
  std::vector<double> gamma;  // drift gamma_{t,s}
  std::vector<double> what;   // w - gamma
  std::vector<std::size_t> sigma_indices;
  std::vector<double> decorations;  // one per sigma, in sigma order
  bool stay_negative = false;
};

inline std::vector<double> poisson_times(double t, double rate, Rng& rng) {
  std::vector<double> out;
  double s = rng.exponential(rate);
  while (s < t) {
    out.push_back(s);
    s += rng.exponential(rate);
  }
  return out;
}

// Samples the DRW on [0, t] with Whats endpoints (x, y): Poisson(rate 2)
// times, bridge over grid union sigma, table decorations per sigma.
// stay_negative records whether What(sigma_k) + decoration <= 0 for all k.
inline DRWPath sample_drw(double t, double x, double y,
                          const DecorationTable& table, double grid_dt,
                          Rng& rng) {
  if (table.empty()) throw input_error("sample_drw: empty decoration table");
  DRWPath path;
  path.t = t;
  const auto sigmas = poisson_times(t, 2.0, rng);
  auto [times, w] = sample_bridge(t, x, y, sigmas, grid_dt, rng);
  path.times = std::move(times);
  path.w = std::move(w);
  path.gamma.resize(path.times.size());
  path.what.resize(path.times.size());
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    path.gamma[i] = gamma_drift(t, path.times[i]);
    path.what[i] = path.w[i] - path.gamma[i];
  }
  for (double s : sigmas) {
    const auto it =
        std::lower_bound(path.times.begin(), path.times.end(), s);
    path.sigma_indices.push_back(
        static_cast<std::size_t>(it - path.times.begin()));
  }
  path.stay_negative = true;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const double dec = table.sample(sigmas[k], rng);
    path.decorations.push_back(dec);
    if (path.what[path.sigma_indices[k]] + dec > 0.0)
      path.stay_negative = false;
  }
  return path;
}

namespace detail {

// Sequential stay-negative trial at the Poisson times only, aborting at the
// first violation. Law of the acceptance indicator is identical to the full
// sample_drw path; rejected proposals cost only a few draws.
inline bool stay_negative_trial(double t, double x, double y,
                                const DecorationTable& table, Rng& rng) {
  const auto sigmas = poisson_times(t, 2.0, rng);
  double prev_s = 0.0, prev_w = x;
  for (double s : sigmas) {
    const double rem = t - prev_s;
    const double frac = (s - prev_s) / rem;
    const double mean = prev_w + frac * (y - prev_w);
    const double var = (s - prev_s) * (t - s) / rem;
    const double ws = rng.normal(mean, std::sqrt(var));
    const double what = ws - gamma_drift(t, s);
    if (what + table.sample(s, rng) > 0.0) return false;
    prev_s = s;
    prev_w = ws;
  }
  return true;
}

// Stay-negative path with zero endpoints, sampled cheaply: the skeleton at
// the Poisson times is drawn sequentially with early abort, and the grid is
// filled in conditionally only after acceptance. The accepted-path law
// matches rejection sampling on the full sample_drw output.
inline bool conditioned_drw_path(double t, const DecorationTable& table,
                                 double grid_dt, DRWPath& path, Rng& rng) {
  const auto sigmas = poisson_times(t, 2.0, rng);
  std::vector<double> wsig(sigmas.size());
  std::vector<double> decs(sigmas.size());
  double prev_s = 0.0, prev_w = 0.0;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const double s = sigmas[k];
    const double rem = t - prev_s;
    const double frac = (s - prev_s) / rem;
    const double mean = prev_w - frac * prev_w;
    const double var = (s - prev_s) * (t - s) / rem;
    const double ws = rng.normal(mean, std::sqrt(var));
    const double dec = table.sample(s, rng);
    if (ws - gamma_drift(t, s) + dec > 0.0) return false;
    wsig[k] = ws;
    decs[k] = dec;
    prev_s = s;
    prev_w = ws;
  }
  std::vector<double> anchors{0.0}, avals{0.0};
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    anchors.push_back(sigmas[k]);
    avals.push_back(wsig[k]);
  }
  anchors.push_back(t);
  avals.push_back(0.0);

  path = DRWPath{};
  path.t = t;
  path.times.push_back(0.0);
  path.w.push_back(0.0);
  double next_grid = grid_dt > 0.0 ? grid_dt : kPlusInfinity;
  for (std::size_t j = 0; j + 1 < anchors.size(); ++j) {
    const double a0 = anchors[j], a1 = anchors[j + 1];
    std::vector<double> sub{0.0};
    while (next_grid < a1) {
      if (next_grid > a0) sub.push_back(next_grid - a0);
      next_grid += grid_dt;
    }
    sub.push_back(a1 - a0);
    const auto vals =
        sample_bridge_at(a1 - a0, avals[j], avals[j + 1], sub, rng);
    for (std::size_t i = 1; i < sub.size(); ++i) {
      const double s = a0 + sub[i];
      if (s <= path.times.back()) continue;
      path.times.push_back(s);
      path.w.push_back(vals[i]);
    }
    if (next_grid == a1) next_grid += grid_dt;
  }
  path.gamma.resize(path.times.size());
  path.what.resize(path.times.size());
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    path.gamma[i] = gamma_drift(t, path.times[i]);
    path.what[i] = path.w[i] - path.gamma[i];
  }
  for (double s : sigmas) {
    const auto it = std::lower_bound(path.times.begin(), path.times.end(), s);
    path.sigma_indices.push_back(
        static_cast<std::size_t>(it - path.times.begin()));
  }
  path.decorations = std::move(decs);
  path.stay_negative = true;
  return true;
}

}  // namespace detail

// Monte Carlo frequency of the stay-negative event with Whats endpoints
// (v, w); decays like 2 f(v) g(w) / t.
inline Estimate stay_negative_prob(double t, double v, double w, std::size_t n,
                                   const DecorationTable& table,
                                   std::uint64_t seed, unsigned workers = 1) {
  if (n == 0) throw input_error("stay_negative_prob: N must be > 0");
  auto hits = parallel_map<char>(n, seed, workers, [&](std::size_t, Rng& rng) {
    return static_cast<char>(detail::stay_negative_trial(t, v, w, table, rng));
  });
  std::size_t k = 0;
  for (char h : hits) k += static_cast<std::size_t>(h);
  return binomial_estimate(k, n);
}

struct RepulsionResult {
  Estimate estimate;   // P(max over grid times in [s, t-s] of What >= -M | accepted)
  std::size_t accepted = 0;
  std::size_t proposals = 0;
};

// Entropic repulsion: conditional on stay-negative (rejection sampled), how
// often the drift-corrected bridge comes back above -M in the bulk window.
// The max runs over grid times, which underestimates the continuous max.
inline RepulsionResult repulsion_prob(double s, double t, double big_m,
                                      std::size_t n, double grid_dt,
                                      const DecorationTable& table,
                                      std::uint64_t seed,
                                      unsigned workers = 1) {
  if (!(s >= 1.0) || !(s <= t / 2.0))
    throw input_error("repulsion_prob: need 1 <= s <= t/2");
  // 0: rejected, 1: accepted below -M, 2: accepted and above -M in window.
  auto outcome = parallel_map<char>(n, seed, workers, [&](std::size_t,
                                                          Rng& rng) {
    DRWPath p;
    if (!detail::conditioned_drw_path(t, table, grid_dt, p, rng))
      return static_cast<char>(0);
    for (std::size_t i = 0; i < p.times.size(); ++i) {
      if (p.times[i] >= s && p.times[i] <= t - s && p.what[i] >= -big_m)
        return static_cast<char>(2);
    }
    return static_cast<char>(1);
  });
  RepulsionResult res;
  res.proposals = n;
  std::size_t hits = 0;
  for (char o : outcome) {
    if (o > 0) ++res.accepted;
    if (o == 2) ++hits;
  }
  res.estimate = binomial_estimate(hits, res.accepted);
  if (res.accepted < 100) res.estimate.insufficient = true;
  return res;
}

// Monte Carlo estimate of the truncated first-moment functional J at age s:
// level-set count of an independent age-s BBM shifted by What(s), gated by
// |What(s)| >= M, the copy staying below -What(s), and global stay-negative.
inline Estimate estimate_J(double t, double v, double s_window, double big_m,
                           std::size_t n, const DecorationTable& table,
                           double barrier_b, std::uint64_t seed,
                           unsigned workers = 1) {
  if (!(s_window > 0.0) || s_window > t)
    throw input_error("estimate_J: s outside (0, t]");
  auto vals = parallel_map<double>(n, seed, workers, [&](std::size_t,
                                                         Rng& rng) {
    DRWPath p = sample_drw(t, 0.0, 0.0, table, 0.0, rng);
    if (!p.stay_negative) return 0.0;
    // What at the deterministic age s, bridged from the sampled skeleton.
    const auto it =
        std::upper_bound(p.times.begin(), p.times.end(), s_window);
    const std::size_t hi = static_cast<std::size_t>(it - p.times.begin());
    double ws;
    if (hi == 0 || p.times[hi - 1] == s_window) {
      ws = p.w[hi == 0 ? 0 : hi - 1];
    } else {
      const double s0 = p.times[hi - 1], s1 = p.times[hi];
      const double frac = (s_window - s0) / (s1 - s0);
      const double mean = p.w[hi - 1] + frac * (p.w[hi] - p.w[hi - 1]);
      const double var = (s_window - s0) * (s1 - s_window) / (s1 - s0);
      ws = rng.normal(mean, std::sqrt(var));
    }
    const double what_s = ws - gamma_drift(t, s_window);
    if (std::abs(what_s) < big_m) return 0.0;
    BbmConfig cfg;
    cfg.horizon_t = s_window;
    cfg.prune = true;
    cfg.barrier_B = barrier_b;
    auto heights = simulate_heights(cfg, rng);
    const double ms = m(s_window);
    double copy_max = -kPlusInfinity;
    for (double h : heights) copy_max = std::max(copy_max, h - ms);
    if (copy_max > -what_s) return 0.0;
    std::size_t count = 0;
    for (double h : heights) {
      const double atom = h - ms;
      if (atom >= -v - what_s && atom <= -what_s) ++count;
    }
    return static_cast<double>(count);
  });
  return mean_se(vals);
}

}  // namespace bbmlab
