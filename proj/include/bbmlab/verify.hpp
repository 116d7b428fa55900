#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/cluster_law.hpp"
#include "bbmlab/drw.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/limit.hpp"
#include "bbmlab/mc.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteResult {
  std::string criterion;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct VerifyOptions {
  std::uint64_t seed = 20260826;
  unsigned workers = 1;
  std::string work_dir = ".";  // cache for decoration table and nu pool
  std::string cli_path;        // binary used by the determinism criterion
};

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5g", x);
  return buf;
}

inline CheckResult within_3se(const std::string& name, const Estimate& e,
                              double target) {
  CheckResult c{name};
  const double dev = std::abs(e.value - target);
  c.pass = !e.insufficient && dev <= 3.0 * e.se;
  c.detail = "est=" + fmt(e.value) + " target=" + fmt(target) +
             " se=" + fmt(e.se);
  return c;
}

// "No monotone growth beyond CI overlap": each step up must stay within the
// joint 2 SE band of the previous point.
inline CheckResult no_monotone_growth(const std::string& name,
                                      const std::vector<Estimate>& es) {
  CheckResult c{name};
  c.pass = true;
  std::string vals;
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (es[i].insufficient) c.pass = false;
    if (i > 0 && es[i].value - 2.0 * es[i].se >
                     es[i - 1].value + 2.0 * es[i - 1].se)
      c.pass = false;
    vals += (i ? ", " : "") + fmt(es[i].value) + "+-" + fmt(es[i].se);
  }
  c.detail = vals;
  return c;
}

// Factor-2 constancy with 2 SE slack on both extremes.
inline CheckResult factor2_constancy(const std::string& name,
                                     const std::vector<Estimate>& es) {
  CheckResult c{name};
  double lo = kPlusInfinity, hi = -kPlusInfinity;
  bool ok = true;
  std::string vals;
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (es[i].insufficient || es[i].value <= 0.0) ok = false;
    lo = std::min(lo, es[i].value + 2.0 * es[i].se);
    hi = std::max(hi, es[i].value - 2.0 * es[i].se);
    vals += (i ? ", " : "") + fmt(es[i].value) + "+-" + fmt(es[i].se);
  }
  c.pass = ok && hi <= 2.0 * lo;
  c.detail = vals;
  return c;
}

}  // namespace detail

// ---- Shared artifacts ----------------------------------------------------

inline std::string table_path(const VerifyOptions& opts) {
  return opts.work_dir + "/decoration_table.json";
}

inline std::string pool_path(const VerifyOptions& opts) {
  return opts.work_dir + "/nu_pool.jsonl";
}

// Cache seeds are fixed so reruns in the same work dir reuse artifacts.
inline constexpr std::uint64_t kTableSeed = 0x7ab1e5eedULL;
inline constexpr std::uint64_t kPoolSeed = 0x9001feedULL;

inline DecorationTable ensure_table(const VerifyOptions& opts) {
  const std::string path = table_path(opts);
  if (std::filesystem::exists(path)) return DecorationTable::load(path);
  auto table = DecorationTable::build(DecorationTable::default_ages(), 10000,
                                      10.0, kTableSeed, opts.workers);
  table.save(path);
  return table;
}

inline NuConfig default_nu_config() {
  NuConfig cfg;
  cfg.seed = kPoolSeed;
  return cfg;
}

inline std::vector<ClusterSample> ensure_pool(const VerifyOptions& opts,
                                              const DecorationTable& table) {
  const NuConfig cfg = default_nu_config();
  const std::string path = pool_path(opts);
  if (std::filesystem::exists(path)) {
    auto pool = load_pool(path);
    if (pool.size() >= cfg.n_target) return pool;
  }
  auto result = build_pool(cfg, table, opts.workers);
  save_pool(result.samples, path);
  return result.samples;
}

// ---- Criterion 1: oracle suite ------------------------------------------

inline SuiteResult criterion_oracles(const VerifyOptions& opts) {
  SuiteResult suite{"criterion 1 (oracle suite)"};

  for (double t : {1.0, 2.0, 3.0}) {
    auto counts = parallel_map<double>(
        10000, derive_seed(opts.seed, 10 + static_cast<std::uint64_t>(t)),
        opts.workers, [&](std::size_t, Rng& rng) {
          BbmConfig cfg;
          cfg.horizon_t = t;
          return static_cast<double>(simulate_heights(cfg, rng).size());
        });
    suite.checks.push_back(detail::within_3se(
        "population mean, t=" + detail::fmt(t), mean_se(counts), std::exp(t)));
  }

  {
    const double t = 3.0, level = 2.0;
    auto counts = parallel_map<double>(
        10000, derive_seed(opts.seed, 20), opts.workers,
        [&](std::size_t, Rng& rng) {
          BbmConfig cfg;
          cfg.horizon_t = t;
          const auto hs = simulate_heights(cfg, rng);
          std::size_t k = 0;
          for (double h : hs) k += h >= level ? 1 : 0;
          return static_cast<double>(k);
        });
    const double target =
        std::exp(t) * 0.5 * std::erfc(level / std::sqrt(t) / std::sqrt(2.0));
    suite.checks.push_back(detail::within_3se("many-to-one, t=3 level=2",
                                              mean_se(counts), target));
  }

  {
    const double t = 2.0;
    auto zs = parallel_map<double>(
        200000, derive_seed(opts.seed, 21), opts.workers,
        [&](std::size_t, Rng& rng) {
          BbmConfig cfg;
          cfg.horizon_t = t;
          const auto hs = simulate_heights(cfg, rng);
          double z = 0.0;
          for (double h : hs)
            z += (kSqrt2 * t - h) * std::exp(kSqrt2 * (h - kSqrt2 * t));
          return z;
        });
    suite.checks.push_back(
        detail::within_3se("derivative martingale mean, t=2", mean_se(zs), 0.0));
  }

  {
    CheckResult c{"gamma integral"};
    const double got = gamma_integral_unit();
    const double target = std::sqrt(2.0 * std::acos(-1.0));
    c.pass = std::abs(got - target) <= 1e-6;
    c.detail = "est=" + detail::fmt(got) + " target=" + detail::fmt(target);
    suite.checks.push_back(c);
  }
  return suite;
}

// ---- Criterion 2: DRW suite ---------------------------------------------

inline SuiteResult criterion_drw(const VerifyOptions& opts,
                                 const DecorationTable& table) {
  SuiteResult suite{"criterion 2 (drw suite)"};

  {
    const double t = 4.0;
    const std::vector<double> probe{1.0, 2.0, 3.0};
    const std::size_t n = 20000;
    std::vector<std::vector<double>> vals(probe.size());
    auto rows = parallel_map<std::vector<double>>(
        n, derive_seed(opts.seed, 30), opts.workers,
        [&](std::size_t, Rng& rng) {
          auto [times, w] = sample_bridge(t, 0.0, 0.0, probe, 0.0, rng);
          std::vector<double> row;
          for (std::size_t i = 0; i < times.size(); ++i)
            for (double s : probe)
              if (times[i] == s) row.push_back(w[i]);
          return row;
        });
    for (const auto& row : rows)
      for (std::size_t i = 0; i < probe.size(); ++i)
        vals[i].push_back(row[i] * row[i]);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double s = probe[i];
      Estimate e = mean_se(vals[i]);
      // SE of a Gaussian second moment is var * sqrt(2/n).
      e.se = e.value * std::sqrt(2.0 / static_cast<double>(n));
      suite.checks.push_back(detail::within_3se(
          "bridge variance, s=" + detail::fmt(s), e, s * (t - s) / t));
    }
  }

  {
    CheckResult c{"drift bound"};
    c.pass = true;
    for (double t : {1.0, 10.0, 100.0, 512.0, 1000.0}) {
      for (int k = 0; k <= 2000; ++k) {
        const double s = t * static_cast<double>(k) / 2000.0;
        const double bound = 1.0 + log_plus(std::min(s, t - s));
        if (std::abs(gamma_drift(t, s)) > bound + 1e-12) {
          c.pass = false;
          c.detail = "violated at t=" + detail::fmt(t) + " s=" + detail::fmt(s);
        }
      }
    }
    if (c.pass) c.detail = "|gamma| <= 1 + log+(s ^ t-s) on all grids";
    suite.checks.push_back(c);
  }

  {
    CheckResult c{"stay-negative decay slope"};
    const std::vector<double> ts{64.0, 128.0, 256.0, 512.0};
    const std::vector<std::size_t> ns{200000, 300000, 400000, 600000};
    std::vector<std::pair<double, double>> points;
    std::string vals;
    bool ok = true;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const Estimate p = stay_negative_prob(ts[i], 0.0, 0.0, ns[i], table,
                                            derive_seed(opts.seed, 40 + i),
                                            opts.workers);
      vals += (i ? ", " : "") + detail::fmt(p.value);
      if (p.value <= 0.0) ok = false;
      points.push_back({ts[i], p.value});
    }
    if (ok) {
      const Regression reg = regress_loglinear(points, true);
      c.pass = std::abs(reg.slope - (-1.0)) <= 0.2;
      c.detail = "slope=" + detail::fmt(reg.slope) + "+-" +
                 detail::fmt(reg.slope_se) + " target=-1; p=[" + vals + "]";
    } else {
      c.pass = false;
      c.detail = "zero acceptance at some t; p=[" + vals + "]";
    }
    suite.checks.push_back(c);
  }

  {
    const double t = 256.0, big_m = 1.0;
    std::vector<Estimate> scaled;
    std::size_t i = 0;
    for (double s : {4.0, 16.0, 64.0}) {
      RepulsionResult r =
          repulsion_prob(s, t, big_m, 400000, 0.25, table,
                         derive_seed(opts.seed, 50 + i++), opts.workers);
      Estimate e = r.estimate;
      e.value *= std::sqrt(s);
      e.se *= std::sqrt(s);
      scaled.push_back(e);
    }
    suite.checks.push_back(
        detail::no_monotone_growth("sqrt(s)-scaled repulsion", scaled));
  }
  return suite;
}

// ---- Criterion 3: cluster-law suite -------------------------------------

inline SuiteResult criterion_cluster_law(const VerifyOptions& opts,
                                         const std::vector<ClusterSample>& pool) {
  SuiteResult suite{"criterion 3 (cluster-law suite)"};
  (void)opts;

  {
    CheckResult c{"mean growth slope"};
    std::vector<std::pair<double, double>> points;
    bool ok = true;
    for (double v : {2.0, 3.0, 4.0, 5.0}) {
      const Estimate e = estimate_cluster_mean(v, pool);
      if (e.value <= 0.0) ok = false;
      points.push_back({v, e.value});
    }
    if (ok) {
      const Regression reg = regress_loglinear(points, false);
      c.pass = std::abs(reg.slope - kSqrt2) <= 0.2;
      c.detail = "slope=" + detail::fmt(reg.slope) + "+-" +
                 detail::fmt(reg.slope_se) + " target=sqrt2";
    } else {
      c.detail = "nonpositive mean count";
    }
    suite.checks.push_back(c);
  }

  {
    std::vector<Estimate> es;
    for (double v : {3.0, 4.0, 5.0, 6.0}) {
      Estimate e = estimate_fat_prob(v, 0.05, pool);
      e.value *= v;
      e.se *= v;
      es.push_back(e);
    }
    suite.checks.push_back(detail::factor2_constancy("v * P(fat)", es));
  }

  {
    CheckResult c{"truncated mean vs delta"};
    const std::vector<double> deltas{0.02, 0.05, 0.1, 0.2};
    std::vector<Estimate> es;
    for (double d : deltas) es.push_back(estimate_truncated_mean(5.0, d, pool));
    c.pass = true;
    std::string vals;
    for (std::size_t i = 0; i < es.size(); ++i) {
      if (i > 0 && es[i].value + 2.0 * (es[i].se + es[i - 1].se) <
                       es[i - 1].value)
        c.pass = false;  // must be nondecreasing in delta, within slack
      vals += (i ? ", " : "") + detail::fmt(es[i].value);
    }
    if (es.front().value >= es.back().value) c.pass = false;
    c.detail = "ratios over delta {0.02,0.05,0.1,0.2}: " + vals;
    suite.checks.push_back(c);
  }

  {
    std::vector<Estimate> es;
    for (double v : {2.0, 3.0, 4.0, 5.0}) es.push_back(second_moment(v, pool));
    suite.checks.push_back(
        detail::no_monotone_growth("normalized second moment", es));
  }

  {
    std::vector<Estimate> es;
    for (double v : {3.0, 4.0, 5.0}) {
      std::size_t hits = 0;
      for (const auto& s : pool) hits += spine_event_B(s, v, 0.25, 4.0) ? 1 : 0;
      Estimate e = binomial_estimate(hits, pool.size());
      e.value *= v;
      e.se *= v;
      es.push_back(e);
    }
    suite.checks.push_back(detail::factor2_constancy("v * P(event B)", es));
  }
  return suite;
}

// ---- Criterion 4: limit suite -------------------------------------------

inline SuiteResult criterion_limit_profile(
    const VerifyOptions& opts, const std::vector<ClusterSample>& pool) {
  SuiteResult suite{"criterion 4abc (limit: counts, profile, prefactor)"};
  const std::size_t n_samples = 2000;

  {
    LimitConfig cfg;
    cfg.v_max = 2.0;
    cfg.seed = derive_seed(opts.seed, 60);
    auto rows = parallel_map<std::array<std::size_t, 3>>(
        n_samples, cfg.seed, opts.workers, [&](std::size_t, Rng& rng) {
          const auto lp = sample_limit_borrowed(cfg, pool, rng);
          std::array<std::size_t, 3> row{0, 0, 0};
          for (const auto& pair : lp.pairs)
            for (std::size_t j = 0; j < 3; ++j)
              row[j] += pair.u >= -static_cast<double>(j) ? 1 : 0;
          return row;
        });
    for (std::size_t j = 0; j < 3; ++j) {
      CheckResult c{"poisson counts, v=" + std::to_string(j)};
      std::vector<std::size_t> counts;
      for (const auto& row : rows) counts.push_back(row[j]);
      const double mean =
          cfg.z * std::exp(kSqrt2 * static_cast<double>(j)) / kSqrt2;
      const double p = poisson_gof(counts, mean);
      c.pass = p >= 0.01;
      c.detail = "gof p=" + detail::fmt(p) + " mean=" + detail::fmt(mean);
      suite.checks.push_back(c);
    }
  }

  {
    LimitConfig cfg;
    cfg.v_max = 6.0;
    cfg.seed = derive_seed(opts.seed, 61);
    const auto profiles = profile_check(cfg, pool, 6.0, {0.25, 0.5, 0.75},
                                        n_samples, 0.05, opts.workers);
    for (const auto& pc : profiles) {
      CheckResult c{"profile ratio, alpha=" + detail::fmt(pc.alpha)};
      c.pass = !pc.ratio.insufficient &&
               std::abs(pc.ratio.value - pc.alpha) <= 0.15;
      c.detail = "est=" + detail::fmt(pc.ratio.value) + "+-" +
                 detail::fmt(pc.ratio.se) + " undefined=" +
                 std::to_string(pc.undefined);
      suite.checks.push_back(c);
    }
  }

  {
    CheckResult c{"linear prefactor, v=4 vs v=8"};
    LimitConfig cfg;
    cfg.v_max = 8.0;
    cfg.seed = derive_seed(opts.seed, 62);
    const auto rows =
        growth_check(cfg, pool, {4.0, 8.0}, n_samples, opts.workers);
    const double a = rows[0].flat_ratio.value, b = rows[1].flat_ratio.value;
    const double hi = std::max(a, b), lo = std::min(a, b);
    c.pass = lo > 0.0 && hi / lo <= 1.3;
    c.detail = "E/(Z v e^{sqrt2 v}) = " + detail::fmt(a) + " (v=4), " +
               detail::fmt(b) + " (v=8)";
    suite.checks.push_back(c);
  }
  return suite;
}

inline SuiteResult criterion_limit_fat(const VerifyOptions& opts,
                                       const std::vector<ClusterSample>& pool) {
  SuiteResult suite{"criterion 4de (limit: fat carriers, corollary)"};
  const std::size_t n_samples = 2000;
  const double delta = 0.05, epsilon = 0.2;

  {
    std::vector<Estimate> scaled;
    double median_at_8 = 0.0;
    std::size_t undef_at_8 = 0;
    std::size_t i = 0;
    for (double v : {4.0, 6.0, 8.0}) {
      LimitConfig cfg;
      cfg.v_max = v;
      cfg.seed = derive_seed(opts.seed, 70 + i++);
      const auto fc = fat_carrier_check(cfg, pool, v, 0.5, delta, epsilon,
                                        n_samples, opts.workers);
      Estimate e = fc.mean_ratio_158;
      e.value *= v;
      e.se *= v;
      scaled.push_back(e);
      if (v == 8.0) {
        median_at_8 = fc.median_ratio_159;
        undef_at_8 = fc.undefined;
      }
    }
    CheckResult c{"median ratio_159, v=8"};
    c.pass = median_at_8 >= 0.8;
    c.detail = "median=" + detail::fmt(median_at_8) + " undefined=" +
               std::to_string(undef_at_8);
    suite.checks.push_back(c);
    suite.checks.push_back(
        detail::factor2_constancy("v * mean ratio_158", scaled));
  }

  {
    CheckResult c{"corollary filter, v=8"};
    LimitConfig cfg;
    cfg.v_max = 8.0;
    cfg.seed = derive_seed(opts.seed, 73);
    const auto cc = corollary_check(cfg, pool, 8.0, epsilon, delta, 0.8, 0.2,
                                    n_samples, opts.workers);
    c.pass = cc.joint_frac >= 0.7;
    c.detail = "joint fraction=" + detail::fmt(cc.joint_frac) +
               " first=" + detail::fmt(cc.first_ratio.value) +
               " second=" + detail::fmt(cc.second_ratio.value);
    suite.checks.push_back(c);
  }
  return suite;
}

// ---- Criterion 5: determinism -------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SuiteResult criterion_determinism(const VerifyOptions& opts) {
  SuiteResult suite{"criterion 5 (determinism)"};
  CheckResult c{"records identical across worker counts"};
  if (opts.cli_path.empty()) {
    c.detail = "no CLI binary path provided";
    suite.checks.push_back(c);
    return suite;
  }
  const std::string base = opts.work_dir + "/determinism";
  std::filesystem::create_directories(base + "/w1");
  std::filesystem::create_directories(base + "/w3");
  bool ran = true;
  for (const auto& [dir, workers] :
       {std::pair<std::string, int>{"w1", 1}, {"w3", 3}}) {
    const std::string cmd = "\"" + opts.cli_path +
                            "\" simulate --seed 12345 --replicates 64"
                            " --workers " +
                            std::to_string(workers) + " --set horizon_t=2" +
                            " --out \"" + base + "/" + dir + "\"";
    if (std::system(cmd.c_str()) != 0) ran = false;
  }
  if (!ran) {
    c.detail = "CLI invocation failed";
  } else {
    const std::string a = read_file(base + "/w1/records.jsonl");
    const std::string b = read_file(base + "/w3/records.jsonl");
    c.pass = !a.empty() && a == b;
    c.detail = c.pass ? "byte-identical records.jsonl"
                      : "records differ or are empty";
  }
  suite.checks.push_back(c);
  return suite;
}

inline void print_suite(const SuiteResult& suite, std::ostream& out) {
  for (const auto& c : suite.checks)
    out << "    " << (c.pass ? "ok  " : "FAIL") << "  " << c.name << ": "
        << c.detail << "\n";
  out << (suite.pass() ? "[PASS] " : "[FAIL] ") << suite.criterion << "\n";
}

}  // namespace bbmlab::verify
