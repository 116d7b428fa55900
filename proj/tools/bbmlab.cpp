// Command-line laboratory driver: simulation runs, estimator suites, the nu
// pool builder, and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bbmlab/bbm.hpp"
#include "bbmlab/cluster_law.hpp"
#include "bbmlab/drw.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/limit.hpp"
#include "bbmlab/mc.hpp"
#include "bbmlab/records.hpp"
#include "bbmlab/verify.hpp"

namespace {

using bbmlab::input_error;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t replicates = 100;
  unsigned workers = 0;  // 0 = logical cores
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "master seed");
  cmd->add_option("--replicates", opts.replicates, "replicate count");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--workers", opts.workers, "worker threads (0 = cores)");
  cmd->add_option("--set", opts.sets, "override key=value")
      ->take_all();
}

// Schema-checked numeric config: defaults, then file, then --set overrides.
// Unknown keys are errors.
std::map<std::string, double> resolve_config(
    const std::map<std::string, double>& schema, const CommonOpts& opts) {
  auto cfg = schema;
  auto apply = [&](const std::string& key, double value) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) throw input_error("unknown config key: " + key);
    it->second = value;
  };
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw input_error("cannot read config " + opts.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw input_error("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!value.is_number()) throw input_error("config key not numeric: " + key);
      apply(key, value.get<double>());
    }
  }
  for (const auto& s : opts.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw input_error("--set expects key=value");
    try {
      apply(s.substr(0, eq), std::stod(s.substr(eq + 1)));
    } catch (const std::invalid_argument&) {
      throw input_error("--set value not numeric: " + s);
    }
  }
  return cfg;
}

nlohmann::json config_json(const std::map<std::string, double>& cfg) {
  nlohmann::json j;
  for (const auto& [k, v] : cfg) j[k] = v;
  return j;
}

void write_outputs(const std::vector<bbmlab::ExperimentRecord>& records,
                   const std::map<std::string, double>& cfg,
                   const CommonOpts& opts) {
  std::filesystem::create_directories(opts.out_dir);
  const nlohmann::json cj = config_json(cfg);
  bbmlab::write_manifest(cj, opts.seed, opts.out_dir + "/manifest.json");
  bbmlab::write_records(records, bbmlab::config_hash(cj),
                        opts.out_dir + "/records.jsonl");
  bbmlab::write_summary_csv(records, opts.out_dir + "/summary.csv");
}

bbmlab::BbmConfig bbm_config_from(const std::map<std::string, double>& cfg) {
  bbmlab::BbmConfig bc;
  bc.horizon_t = cfg.at("horizon_t");
  bc.branch_rate = cfg.at("branch_rate");
  bc.prune = cfg.at("prune") != 0.0;
  bc.barrier_B = cfg.at("barrier_B");
  bc.checkpoint_dt = cfg.at("checkpoint_dt");
  bc.max_population = static_cast<std::size_t>(cfg.at("max_population"));
  bc.validate();
  return bc;
}

const std::map<std::string, double> kBbmSchema{
    {"horizon_t", 1.0},     {"branch_rate", 1.0},
    {"prune", 0.0},         {"barrier_B", 10.0},
    {"checkpoint_dt", 0.5}, {"max_population", 5e7}};

int cmd_simulate(const CommonOpts& opts) {
  const auto cfg = resolve_config(kBbmSchema, opts);
  const auto bc = bbm_config_from(cfg);
  auto records = bbmlab::run(
      "simulate", opts.replicates, opts.seed, opts.workers,
      [&](std::size_t, bbmlab::Rng& rng, bbmlab::ExperimentRecord& rec) {
        bbmlab::BbmConfig c = bc;
        c.seed = rng.raw();
        const auto pop = bbmlab::simulate(c);
        rec.stats["population"] = static_cast<double>(pop.size());
        rec.stats["pruned_count"] = static_cast<double>(pop.pruned_count);
        if (pop.size() > 0) {
          rec.stats["centered_max"] = bbmlab::centered_max(pop);
          rec.stats["z"] = bbmlab::derivative_martingale(pop, 1.0);
        } else {
          rec.flags["extinct"] = 1;
        }
      });
  write_outputs(records, cfg, opts);
  return 0;
}

int cmd_extremal(const CommonOpts& opts) {
  auto schema = kBbmSchema;
  schema["horizon_t"] = 4.0;
  schema.insert({{"r", 0.0},  // 0 means horizon / 2
                 {"v", 2.0},
                 {"delta", 0.05},
                 {"alpha", 0.5}});
  const auto cfg = resolve_config(schema, opts);
  const auto bc = bbm_config_from(cfg);
  const double r = cfg.at("r") > 0.0 ? cfg.at("r") : bc.horizon_t / 2.0;
  const double v = cfg.at("v");
  const bbmlab::FatParams fat{v, cfg.at("delta"), cfg.at("alpha")};
  auto records = bbmlab::run(
      "extremal", opts.replicates, opts.seed, opts.workers,
      [&](std::size_t, bbmlab::Rng& rng, bbmlab::ExperimentRecord& rec) {
        bbmlab::BbmConfig c = bc;
        c.seed = rng.raw();
        const auto pop = bbmlab::simulate(c);
        const auto sp = bbmlab::structured_process(pop, r);
        rec.stats["n_local_maxima"] = static_cast<double>(sp.pairs.size());
        rec.stats["star_count"] = static_cast<double>(
            bbmlab::star_restricted_count(sp, -bbmlab::kPlusInfinity));
        rec.stats["flat_count"] = static_cast<double>(
            bbmlab::restricted_count(sp, v, -bbmlab::kPlusInfinity));
        rec.stats["fat_count"] = static_cast<double>(bbmlab::restricted_count(
            sp, v, -bbmlab::kPlusInfinity, fat));
        const auto ratios = bbmlab::theorem_ratios(sp, v, fat.alpha, fat.delta);
        rec.stats["ratio_37"] = ratios.ratio_37 ? *ratios.ratio_37 : -1.0;
        rec.stats["ratio_158"] = ratios.ratio_158 ? *ratios.ratio_158 : -1.0;
        rec.stats["ratio_159"] = ratios.ratio_159 ? *ratios.ratio_159 : -1.0;
        rec.flags["undefined_ratios"] = ratios.undefined;
      });
  write_outputs(records, cfg, opts);
  return 0;
}

bbmlab::DecorationTable ensure_table_at(const std::string& path,
                                        std::size_t table_n, unsigned workers) {
  if (std::filesystem::exists(path)) return bbmlab::DecorationTable::load(path);
  auto table = bbmlab::DecorationTable::build(
      bbmlab::DecorationTable::default_ages(), table_n, 10.0,
      bbmlab::verify::kTableSeed, workers);
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path().string().empty()
          ? "."
          : std::filesystem::path(path).parent_path().string());
  table.save(path);
  return table;
}

int cmd_drw(const CommonOpts& opts, const std::string& mode,
            std::string table_path) {
  const std::map<std::string, double> schema{
      {"t", 64.0},   {"v", 0.0},        {"w", 0.0},
      {"s", 4.0},    {"M", 1.0},        {"n", 100000.0},
      {"grid_dt", 0.25}, {"table_n", 10000.0}};
  const auto cfg = resolve_config(schema, opts);
  std::filesystem::create_directories(opts.out_dir);
  if (table_path.empty()) table_path = opts.out_dir + "/decoration_table.json";
  const std::size_t table_n = static_cast<std::size_t>(cfg.at("table_n"));
  if (mode == "build-table") {
    if (std::filesystem::exists(table_path))
      std::filesystem::remove(table_path);
    ensure_table_at(table_path, table_n, opts.workers);
    std::cout << "wrote " << table_path << "\n";
    return 0;
  }
  const auto table = ensure_table_at(table_path, table_n, opts.workers);
  const double t = cfg.at("t");
  const std::size_t n = static_cast<std::size_t>(cfg.at("n"));
  std::vector<bbmlab::ExperimentRecord> records;
  bbmlab::ExperimentRecord rec;
  rec.experiment = "drw-" + mode;
  rec.master_seed = opts.seed;
  rec.params = cfg;
  if (mode == "stay") {
    const auto e = bbmlab::stay_negative_prob(t, cfg.at("v"), cfg.at("w"), n,
                                              table, opts.seed, opts.workers);
    rec.stats["p"] = e.value;
    rec.stats["se"] = e.se;
  } else if (mode == "repulsion") {
    const auto r =
        bbmlab::repulsion_prob(cfg.at("s"), t, cfg.at("M"), n,
                               cfg.at("grid_dt"), table, opts.seed,
                               opts.workers);
    rec.stats["p"] = r.estimate.value;
    rec.stats["se"] = r.estimate.se;
    rec.stats["accepted"] = static_cast<double>(r.accepted);
    rec.flags["insufficient"] = r.estimate.insufficient ? 1 : 0;
  } else if (mode == "J") {
    const auto e = bbmlab::estimate_J(t, cfg.at("v"), cfg.at("s"), cfg.at("M"),
                                      n, table, 10.0, opts.seed, opts.workers);
    rec.stats["J"] = e.value;
    rec.stats["se"] = e.se;
  } else {
    throw input_error("unknown drw mode: " + mode);
  }
  records.push_back(rec);
  write_outputs(records, cfg, opts);
  for (const auto& [k, val] : rec.stats) std::cout << k << " = " << val << "\n";
  return 0;
}

int cmd_cluster_law(const CommonOpts& opts, std::string table_path) {
  const std::map<std::string, double> schema{
      {"t_horizon", 512.0}, {"r", 40.0},          {"s_exact", 40.0},
      {"barrier_B", 10.0},  {"n_target", 2000.0}, {"atom_floor", -14.0},
      {"grid_dt", 1.0},     {"proposal_budget", 1e6}, {"table_n", 10000.0}};
  const auto cfg = resolve_config(schema, opts);
  std::filesystem::create_directories(opts.out_dir);
  if (table_path.empty()) table_path = opts.out_dir + "/decoration_table.json";
  const auto table = ensure_table_at(
      table_path, static_cast<std::size_t>(cfg.at("table_n")), opts.workers);
  bbmlab::NuConfig nu;
  nu.t_horizon = cfg.at("t_horizon");
  nu.r = cfg.at("r");
  nu.s_exact = cfg.at("s_exact");
  nu.barrier_B = cfg.at("barrier_B");
  nu.n_target = static_cast<std::size_t>(cfg.at("n_target"));
  nu.atom_floor = cfg.at("atom_floor");
  nu.grid_dt = cfg.at("grid_dt");
  nu.proposal_budget = static_cast<std::size_t>(cfg.at("proposal_budget"));
  nu.seed = opts.seed;
  nu.validate();
  const auto pool = bbmlab::build_pool(nu, table, opts.workers);
  bbmlab::save_pool(pool.samples, opts.out_dir + "/nu_pool.jsonl");
  std::vector<bbmlab::ExperimentRecord> records;
  for (double v : {2.0, 3.0, 4.0, 5.0, 6.0}) {
    bbmlab::ExperimentRecord rec;
    rec.experiment = "cluster-law";
    rec.master_seed = opts.seed;
    rec.replicate_index = static_cast<std::uint64_t>(v);
    rec.params = cfg;
    rec.params["v"] = v;
    const auto mean = bbmlab::estimate_cluster_mean(v, pool.samples);
    const auto fat = bbmlab::estimate_fat_prob(v, 0.05, pool.samples);
    rec.stats["mean_count"] = mean.value;
    rec.stats["mean_count_se"] = mean.se;
    rec.stats["fat_prob"] = fat.value;
    rec.stats["fat_prob_se"] = fat.se;
    rec.stats["second_moment"] = bbmlab::second_moment(v, pool.samples).value;
    records.push_back(std::move(rec));
  }
  write_outputs(records, cfg, opts);
  std::cout << "pool size " << pool.samples.size() << ", acceptance rate "
            << pool.acceptance_rate() << "\n";
  return 0;
}

int cmd_limit(const CommonOpts& opts, const std::string& pool_path) {
  const std::map<std::string, double> schema{
      {"z", 1.0}, {"v_max", 4.0}, {"v", 2.0}, {"delta", 0.05},
      {"alpha", 0.5}};
  const auto cfg = resolve_config(schema, opts);
  if (!std::filesystem::exists(pool_path))
    throw input_error("pool file not found: " + pool_path);
  const auto pool = bbmlab::load_pool(pool_path);
  if (pool.empty()) throw input_error("empty pool: " + pool_path);
  bbmlab::LimitConfig lc;
  lc.z = cfg.at("z");
  lc.v_max = cfg.at("v_max");
  const double v = cfg.at("v");
  const bbmlab::FatParams fat{v, cfg.at("delta"), cfg.at("alpha")};
  auto records = bbmlab::run(
      "limit", opts.replicates, opts.seed, opts.workers,
      [&](std::size_t, bbmlab::Rng& rng, bbmlab::ExperimentRecord& rec) {
        const auto lp = bbmlab::sample_limit_borrowed(lc, pool, rng);
        rec.stats["n_pairs"] = static_cast<double>(lp.pairs.size());
        rec.stats["star_count"] = static_cast<double>(
            bbmlab::star_restricted_count(lp, -v));
        rec.stats["flat_count"] = static_cast<double>(
            bbmlab::restricted_count(lp, v, -bbmlab::kPlusInfinity));
        const auto ratios = bbmlab::theorem_ratios(lp, v, fat.alpha, fat.delta);
        rec.stats["ratio_37"] = ratios.ratio_37 ? *ratios.ratio_37 : -1.0;
        rec.stats["ratio_158"] = ratios.ratio_158 ? *ratios.ratio_158 : -1.0;
        rec.stats["ratio_159"] = ratios.ratio_159 ? *ratios.ratio_159 : -1.0;
        rec.flags["undefined_ratios"] = ratios.undefined;
      });
  write_outputs(records, cfg, opts);
  return 0;
}

int cmd_verify(const CommonOpts& opts, const std::string& suite,
               const std::string& self_path) {
  bbmlab::verify::VerifyOptions vo;
  vo.seed = opts.seed ? opts.seed : 20260826;
  vo.workers = opts.workers;
  vo.work_dir = opts.out_dir;
  vo.cli_path = self_path;
  std::filesystem::create_directories(vo.work_dir);

  std::vector<bbmlab::verify::SuiteResult> results;
  const bool all = suite == "all";
  if (all || suite == "oracle")
    results.push_back(bbmlab::verify::criterion_oracles(vo));
  if (all || suite == "drw" || suite == "growth" || suite == "profile" ||
      suite == "fat") {
    const auto table = bbmlab::verify::ensure_table(vo);
    if (all || suite == "drw")
      results.push_back(bbmlab::verify::criterion_drw(vo, table));
    if (all || suite == "growth" || suite == "profile" || suite == "fat") {
      const auto pool = bbmlab::verify::ensure_pool(vo, table);
      if (all || suite == "growth")
        results.push_back(bbmlab::verify::criterion_cluster_law(vo, pool));
      if (all || suite == "profile")
        results.push_back(bbmlab::verify::criterion_limit_profile(vo, pool));
      if (all || suite == "fat")
        results.push_back(bbmlab::verify::criterion_limit_fat(vo, pool));
    }
  }
  if (all) results.push_back(bbmlab::verify::criterion_determinism(vo));

  bool pass = true;
  for (const auto& r : results) {
    bbmlab::verify::print_suite(r, std::cout);
    pass = pass && r.pass();
  }
  return pass ? 0 : 1;
}

int cmd_report(const CommonOpts& opts, bool force) {
  const std::string path = opts.out_dir + "/records.jsonl";
  if (!std::filesystem::exists(path))
    throw input_error("no records in " + opts.out_dir);
  std::vector<std::uint64_t> hashes;
  const auto records = bbmlab::read_records(path, &hashes);
  if (records.empty()) throw input_error("no records in " + opts.out_dir);
  for (std::size_t i = 1; i < hashes.size(); ++i) {
    if (hashes[i] != hashes[0] && !force)
      throw input_error("mixed config hashes; pass --force to combine");
  }
  bbmlab::write_summary_csv(records, opts.out_dir + "/summary.csv");
  std::cout << "wrote " << opts.out_dir << "/summary.csv (" << records.size()
            << " records)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for branching Brownian extremes"};
  app.require_subcommand(1);

  CommonOpts sim_o, ext_o, drw_o, clu_o, lim_o, ver_o, rep_o;
  std::string drw_mode = "stay", drw_table, clu_table;
  std::string lim_pool = "out/nu_pool.jsonl";
  std::string ver_suite = "all";
  bool rep_force = false;

  auto* sim = app.add_subcommand("simulate", "population statistics");
  add_common(sim, sim_o);
  auto* ext = app.add_subcommand("extremal", "level-set statistics");
  add_common(ext, ext_o);
  auto* drw = app.add_subcommand("drw", "random-walk estimators");
  add_common(drw, drw_o);
  drw->add_option("--mode", drw_mode, "build-table | stay | repulsion | J");
  drw->add_option("--table", drw_table, "decoration table path");
  auto* clu = app.add_subcommand("cluster-law", "build the nu sample pool");
  add_common(clu, clu_o);
  clu->add_option("--table", clu_table, "decoration table path");
  auto* lim = app.add_subcommand("limit", "limit-object statistics");
  add_common(lim, lim_o);
  lim->add_option("--pool", lim_pool, "nu pool path");
  auto* ver = app.add_subcommand("verify", "acceptance criteria");
  add_common(ver, ver_o);
  ver->add_option("--suite", ver_suite, "oracle|growth|profile|fat|drw|all")
      ->check(CLI::IsMember({"oracle", "growth", "profile", "fat", "drw",
                             "all"}));
  auto* rep = app.add_subcommand("report", "summarize stored records");
  add_common(rep, rep_o);
  rep->add_flag("--force", rep_force, "combine mixed config hashes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_o);
    if (ext->parsed()) return cmd_extremal(ext_o);
    if (drw->parsed()) return cmd_drw(drw_o, drw_mode, drw_table);
    if (clu->parsed()) return cmd_cluster_law(clu_o, clu_table);
    if (lim->parsed()) return cmd_limit(lim_o, lim_pool);
    if (ver->parsed()) return cmd_verify(ver_o, ver_suite, argv[0]);
    if (rep->parsed()) return cmd_report(rep_o, rep_force);
  } catch (const bbmlab::input_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bbmlab::resource_error& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
