#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bbmlab/errors.hpp"
#include "bbmlab/mc.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab {

inline constexpr const char* kVersion = "0.1.0";

inline nlohmann::json record_to_json(const ExperimentRecord& rec,
                                     std::uint64_t config_hash) {
  nlohmann::json j;
  j["experiment"] = rec.experiment;
  j["master_seed"] = rec.master_seed;
  j["replicate_index"] = rec.replicate_index;
  j["config_hash"] = config_hash;
  j["params"] = rec.params;
  j["stats"] = rec.stats;
  j["flags"] = rec.flags;
  return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json& j,
                                         std::uint64_t* config_hash = nullptr) {
  ExperimentRecord rec;
  rec.experiment = j.at("experiment").get<std::string>();
  rec.master_seed = j.at("master_seed").get<std::uint64_t>();
  rec.replicate_index = j.at("replicate_index").get<std::uint64_t>();
  rec.params = j.at("params").get<std::map<std::string, double>>();
  rec.stats = j.at("stats").get<std::map<std::string, double>>();
  rec.flags = j.at("flags").get<std::map<std::string, std::uint64_t>>();
  if (config_hash) *config_hash = j.value("config_hash", std::uint64_t{0});
  return rec;
}

inline void write_records(const std::vector<ExperimentRecord>& records,
                          std::uint64_t config_hash, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  for (const auto& rec : records)
    out << record_to_json(rec, config_hash).dump() << "\n";
}

inline std::vector<ExperimentRecord> read_records(
    const std::string& path, std::vector<std::uint64_t>* hashes = nullptr) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot read " + path);
  std::vector<ExperimentRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::uint64_t h = 0;
    out.push_back(record_from_json(nlohmann::json::parse(line), &h));
    if (hashes) hashes->push_back(h);
  }
  return out;
}

// FNV-1a over the canonical JSON dump of a configuration.
inline std::uint64_t config_hash(const nlohmann::json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline void write_manifest(const nlohmann::json& config,
                           std::uint64_t master_seed, const std::string& path) {
  nlohmann::json j;
  j["config_hash"] = config_hash(config);
  j["config"] = config;
  j["master_seed"] = master_seed;
  j["version"] = kVersion;
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

// summary.csv columns: experiment, statistic, n, mean, se, extra.
inline void write_summary_csv(const std::vector<ExperimentRecord>& records,
                              const std::string& path) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> series;
  std::map<std::pair<std::string, std::string>, std::uint64_t> flags;
  for (const auto& rec : records) {
    for (const auto& [name, value] : rec.stats)
      series[{rec.experiment, name}].push_back(value);
    for (const auto& [name, count] : rec.flags)
      flags[{rec.experiment, name}] += count;
  }
  std::ofstream out(path);
  if (!out) throw input_error("cannot write " + path);
  out << "experiment,statistic,n,mean,se,extra\n";
  for (const auto& [key, values] : series) {
    const Estimate e = mean_se(values);
    out << key.first << "," << key.second << "," << e.n << "," << e.value
        << "," << e.se << ",\n";
  }
  for (const auto& [key, count] : flags)
    out << key.first << "," << key.second << ",," << "," << ",flag_count="
        << count << "\n";
}

}  // namespace bbmlab
