#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbda/corpus.hpp"

namespace mbda {

struct TokenSpec {
  std::string token;
  double probability = 0;  // baseline share of a day's entries
};

// Extra entries of each token on days [first_day, last_day] so that the
// expected count becomes multiplier x baseline.
struct AnomalySpec {
  std::string name;
  int first_day = 0;
  int last_day = 0;
  std::vector<std::string> tokens;
  double multiplier = 1;
};

struct SyntheticSpec {
  int n_days = 30;
  double entries_per_day = 10000;
  std::vector<TokenSpec> vocabulary;
  std::vector<AnomalySpec> anomalies;
  std::uint64_t rng_seed = 1;
  std::string start_date = "2012-01-01";
  double activity_sd = 0.1;  // log-normal day-to-day activity
  int n_controllers = 4;
  int n_aps = 40;
  int n_stations = 2000;
  int n_users = 1500;
  double user_share = 0.6;
  // Fraction of station-bearing entries emitted by one heavy station.
  double heavy_station_share = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct InjectedEntry {
  std::string path;
  std::uint64_t offset = 0;
  std::string token;
  std::string bin;
};

struct InjectedAnomaly {
  AnomalySpec spec;
  std::vector<std::string> bins;
  std::vector<InjectedEntry> entries;
};

struct GroundTruth {
  std::vector<InjectedAnomaly> anomalies;
  std::string heavy_station;  // empty when heavy_station_share == 0
};

nlohmann::json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct SyntheticCorpus {
  CorpusManifest manifest;
  GroundTruth truth;
};

// Writes one file per day, "day-YYYY-MM-DD.log", into out_dir. Output is a
// pure function of the spec (seed included).
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, const std::string& out_dir);

// Sixty days at ~50k traps/day with a three-day 10x burst of two
// authentication-failure traps and a two-day 40x burst of RADIUS timeouts.
SyntheticSpec default_synthetic_spec();

}  // namespace mbda
