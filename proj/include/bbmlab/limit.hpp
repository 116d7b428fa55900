#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "bbmlab/cluster_law.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/mc.hpp"
#include "bbmlab/point_measure.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

// Sampler of E_hat | Z ~ PPP(Z e^{-sqrt2 u} du (x) nu), truncated at
// u >= -v_max. Because every cluster is supported in (-inf, 0], the
// truncation is exact for level sets above -v_max: pairs below it cannot
// contribute, so no renormalization is needed.
struct LimitConfig {
  double z = 1.0;
  double v_max = 8.0;
  std::uint64_t seed = 0;

  double intensity_mass() const {
    return z * std::exp(kSqrt2 * v_max) / kSqrt2;
  }
};

inline std::size_t poisson_count(double mean, Rng& rng) {
  std::poisson_distribution<std::size_t> dist(mean);
  return dist(rng.engine());
}

// Limit sample over borrowed clusters: pairs reference measures owned by
// the pool, so replicate sampling never copies atom vectors.
struct LimitPair {
  double u = 0.0;
  const PointMeasure* cluster = nullptr;
};

inline const PointMeasure& cluster_of(const LimitPair& pair) {
  return *pair.cluster;
}

struct LimitProcess {
  std::vector<LimitPair> pairs;
};

// One structured-limit sample: K ~ Poisson(Z e^{sqrt2 v_max} / sqrt2),
// heights u = -v_max + Exp(sqrt2), clusters resampled uniformly with
// replacement from the nu pool, independently of u.
inline LimitProcess sample_limit_borrowed(const LimitConfig& cfg,
                                          const std::vector<ClusterSample>& pool,
                                          Rng& rng) {
  if (pool.empty()) throw input_error("sample_structured_limit: empty pool");
  if (cfg.z < 0.0) throw input_error("Z must be >= 0");
  LimitProcess sp;
  if (cfg.z == 0.0) return sp;
  const std::size_t k = poisson_count(cfg.intensity_mass(), rng);
  sp.pairs.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double u = -cfg.v_max + rng.exponential(kSqrt2);
    const std::size_t idx = std::min(
        static_cast<std::size_t>(rng.uniform() *
                                 static_cast<double>(pool.size())),
        pool.size() - 1);
    sp.pairs.push_back(LimitPair{u, &pool[idx].cluster});
  }
  return sp;
}

inline StructuredProcess sample_structured_limit(
    const LimitConfig& cfg, const std::vector<ClusterSample>& pool, Rng& rng) {
  const auto borrowed = sample_limit_borrowed(cfg, pool, rng);
  StructuredProcess sp;
  sp.pairs.reserve(borrowed.pairs.size());
  for (const auto& pair : borrowed.pairs)
    sp.pairs.push_back(ClusterPair{pair.u, *pair.cluster});
  return sp;
}

template <class Process>
inline PointMeasure flatten(const Process& sp) {
  std::vector<double> atoms;
  for (const auto& pair : sp.pairs)
    for (double a : cluster_of(pair).atoms()) atoms.push_back(a + pair.u);
  return PointMeasure(std::move(atoms));
}

template <class Process>
inline PointMeasure star(const Process& sp) {
  std::vector<double> atoms;
  atoms.reserve(sp.pairs.size());
  for (const auto& pair : sp.pairs) atoms.push_back(pair.u);
  return PointMeasure(std::move(atoms));
}

struct GrowthCheck {
  double v = 0.0;
  Estimate star_ratio;  // E*([-v, inf)) / (Z e^{sqrt2 v} / sqrt2), -> 1
  Estimate flat_ratio;  // E([-v, inf)) / (Z v e^{sqrt2 v}), -> C_star
};

// Per-v normalized level-set counts over replicate samples of the limit.
inline std::vector<GrowthCheck> growth_check(
    const LimitConfig& cfg, const std::vector<ClusterSample>& pool,
    const std::vector<double>& v_list, std::size_t n_samples,
    unsigned workers = 1) {
  struct Row {
    std::vector<double> star, flat;
  };
  auto rows = parallel_map<Row>(
      n_samples, cfg.seed, workers, [&](std::size_t, Rng& rng) {
        const auto sp = sample_limit_borrowed(cfg, pool, rng);
        Row row;
        for (double v : v_list) {
          double star_count = 0.0, flat_count = 0.0;
          for (const auto& pair : sp.pairs) {
            if (pair.u >= -v) {
              star_count += 1.0;
              flat_count += static_cast<double>(
                  pair.cluster->count_in(-v - pair.u, 0.0));
            }
          }
          row.star.push_back(star_count /
                             (cfg.z * std::exp(kSqrt2 * v) / kSqrt2));
          row.flat.push_back(flat_count /
                             (cfg.z * v * std::exp(kSqrt2 * v)));
        }
        return row;
      });
  std::vector<GrowthCheck> out;
  for (std::size_t i = 0; i < v_list.size(); ++i) {
    std::vector<double> star, flat;
    for (const auto& row : rows) {
      star.push_back(row.star[i]);
      flat.push_back(row.flat[i]);
    }
    out.push_back(GrowthCheck{v_list[i], mean_se(star), mean_se(flat)});
  }
  return out;
}

struct ProfileCheck {
  double alpha = 0.0;
  Estimate ratio;  // mean ratio_37, -> alpha
  std::size_t undefined = 0;
};

inline std::vector<ProfileCheck> profile_check(
    const LimitConfig& cfg, const std::vector<ClusterSample>& pool, double v,
    const std::vector<double>& alphas, std::size_t n_samples, double delta,
    unsigned workers = 1) {
  struct Row {
    std::vector<double> ratio;
    std::vector<char> defined;
  };
  auto rows = parallel_map<Row>(
      n_samples, cfg.seed, workers, [&](std::size_t, Rng& rng) {
        const auto sp = sample_limit_borrowed(cfg, pool, rng);
        Row row;
        for (double alpha : alphas) {
          const auto tr = theorem_ratios(sp, v, alpha, delta);
          row.ratio.push_back(tr.ratio_37.value_or(0.0));
          row.defined.push_back(tr.ratio_37.has_value() ? 1 : 0);
        }
        return row;
      });
  std::vector<ProfileCheck> out;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    ProfileCheck pc;
    pc.alpha = alphas[i];
    std::vector<double> xs;
    for (const auto& row : rows) {
      if (row.defined[i])
        xs.push_back(row.ratio[i]);
      else
        ++pc.undefined;
    }
    pc.ratio = mean_se(xs);
    out.push_back(pc);
  }
  return out;
}

struct FatCarrierCheck {
  double v = 0.0;
  double median_ratio_159 = 0.0;
  double frac_159_above = 0.0;  // fraction of samples with ratio_159 >= 1-eps
  Estimate mean_ratio_158;
  std::size_t undefined = 0;
};

inline FatCarrierCheck fat_carrier_check(
    const LimitConfig& cfg, const std::vector<ClusterSample>& pool, double v,
    double alpha, double delta, double epsilon, std::size_t n_samples,
    unsigned workers = 1) {
  struct Row {
    double r159 = 0.0, r158 = 0.0;
    char ok159 = 0, ok158 = 0;
  };
  auto rows = parallel_map<Row>(
      n_samples, cfg.seed, workers, [&](std::size_t, Rng& rng) {
        const auto sp = sample_limit_borrowed(cfg, pool, rng);
        const auto tr = theorem_ratios(sp, v, alpha, delta);
        Row row;
        if (tr.ratio_159) {
          row.r159 = *tr.ratio_159;
          row.ok159 = 1;
        }
        if (tr.ratio_158) {
          row.r158 = *tr.ratio_158;
          row.ok158 = 1;
        }
        return row;
      });
  FatCarrierCheck out;
  out.v = v;
  std::vector<double> r159, r158;
  for (const auto& row : rows) {
    if (row.ok159)
      r159.push_back(row.r159);
    else
      ++out.undefined;
    if (row.ok158)
      r158.push_back(row.r158);
    else
      ++out.undefined;
  }
  if (!r159.empty()) {
    std::sort(r159.begin(), r159.end());
    out.median_ratio_159 = r159[r159.size() / 2];
    std::size_t above = 0;
    for (double r : r159) above += r >= 1.0 - epsilon ? 1 : 0;
    out.frac_159_above =
        static_cast<double>(above) / static_cast<double>(r159.size());
  }
  out.mean_ratio_158 = mean_se(r158);
  return out;
}

// Composite filter of the corollary: height floor -(1 - eps/3) v plus the
// delta-fat requirement.
struct GEpsilonFilter {
  double height_floor = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
};

inline GEpsilonFilter build_G_epsilon(double v, double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw input_error("build_G_epsilon: epsilon in (0,1)");
  const double alpha = 1.0 - epsilon / 3.0;
  return GEpsilonFilter{-alpha * v, delta, alpha};
}

struct CorollaryCheck {
  // Fraction of samples where both displayed inequalities hold.
  double joint_frac = 0.0;
  Estimate first_ratio;   // E([-v,inf); G) / E([-v,inf)), target >= 1-eps
  Estimate second_ratio;  // E*([-v,inf); G) / E*([-v,inf)), target < eps
  std::size_t undefined = 0;
};

inline CorollaryCheck corollary_check(const LimitConfig& cfg,
                                      const std::vector<ClusterSample>& pool,
                                      double v, double epsilon, double delta,
                                      double first_min, double second_max,
                                      std::size_t n_samples,
                                      unsigned workers = 1) {
  const GEpsilonFilter g = build_G_epsilon(v, epsilon, delta);
  struct Row {
    double first = 0.0, second = 0.0;
    char defined = 0;
  };
  auto rows = parallel_map<Row>(
      n_samples, cfg.seed, workers, [&](std::size_t, Rng& rng) {
        const auto sp = sample_limit_borrowed(cfg, pool, rng);
        const FatParams fat{v, g.delta, g.alpha};
        const auto total = restricted_count(sp, v, -kPlusInfinity);
        const auto in_g = restricted_count(sp, v, g.height_floor, fat);
        const auto star_total = star_restricted_count(sp, -v);
        std::size_t star_in_g = 0;
        for (const auto& pair : sp.pairs) {
          if (pair.u < -v || pair.u < g.height_floor) continue;
          if (is_fat_pair(pair.u, *pair.cluster, v, g.delta)) ++star_in_g;
        }
        Row row;
        if (total > 0 && star_total > 0) {
          row.first = static_cast<double>(in_g) / static_cast<double>(total);
          row.second = static_cast<double>(star_in_g) /
                       static_cast<double>(star_total);
          row.defined = 1;
        }
        return row;
      });
  CorollaryCheck out;
  std::vector<double> first, second;
  std::size_t joint = 0, defined = 0;
  for (const auto& row : rows) {
    if (!row.defined) {
      ++out.undefined;
      continue;
    }
    ++defined;
    first.push_back(row.first);
    second.push_back(row.second);
    if (row.first >= first_min && row.second <= second_max) ++joint;
  }
  out.first_ratio = mean_se(first);
  out.second_ratio = mean_se(second);
  if (defined > 0)
    out.joint_frac = static_cast<double>(joint) / static_cast<double>(defined);
  return out;
}

}  // namespace bbmlab
