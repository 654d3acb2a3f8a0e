#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "mbda/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mbda {

namespace {

// Prefixes drawn for ordinary stations; the last one is not in the
// manufacturer table.
constexpr const char* kStationPrefixes[] = {"00:03:93", "00:17:f2", "00:1b:21", "00:13:e8",
                                            "00:16:32", "00:a0:f8", "70:b3:d5"};

std::string mac_for(const char* prefix, std::uint32_t low) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s:%02x:%02x:%02x", prefix, (low >> 16) & 0xff, (low >> 8) & 0xff,
                low & 0xff);
  return buf;
}

bool ap_only(const std::string& token) { return token.rfind("ciscoLwappAp", 0) == 0; }

struct PendingEntry {
  std::int64_t second;
  std::string text;
  int anomaly = -1;
  std::string token;
};

}  // namespace

void SyntheticSpec::validate() const {
  if (vocabulary.empty()) throw ConfigError("synthetic vocabulary is empty");
  if (n_days <= 0) throw ConfigError("n_days must be positive");
  if (entries_per_day <= 0) throw ConfigError("entries_per_day must be positive");
  for (const auto& t : vocabulary)
    if (!(t.probability > 0 && t.probability <= 1))
      throw ConfigError("token " + t.token + " probability must be in (0,1]");
  for (const auto& a : anomalies) {
    if (a.multiplier < 1) throw ConfigError("anomaly " + a.name + " multiplier must be >= 1");
    if (a.first_day < 0 || a.last_day >= n_days || a.first_day > a.last_day)
      throw ConfigError("anomaly " + a.name + " day range outside [0, n_days)");
    for (const auto& tok : a.tokens) {
      bool known = std::any_of(vocabulary.begin(), vocabulary.end(),
                               [&](const TokenSpec& t) { return t.token == tok; });
      if (!known) throw ConfigError("anomaly " + a.name + " uses unknown token " + tok);
    }
  }
  if (n_aps <= 0 || n_stations <= 0 || n_users <= 0 || n_controllers <= 0)
    throw ConfigError("population sizes must be positive");
  if (heavy_station_share < 0 || heavy_station_share >= 1)
    throw ConfigError("heavy_station_share must be in [0,1)");
  if (!parse_utc(start_date, "%Y-%m-%d")) throw ConfigError("start_date must be YYYY-MM-DD");
}

void to_json(json& j, const SyntheticSpec& s) {
  json vocab = json::array();
  for (const auto& t : s.vocabulary) vocab.push_back({{"token", t.token}, {"probability", t.probability}});
  json anomalies = json::array();
  for (const auto& a : s.anomalies)
    anomalies.push_back({{"name", a.name}, {"first_day", a.first_day}, {"last_day", a.last_day},
                         {"tokens", a.tokens}, {"multiplier", a.multiplier}});
  j = json{{"n_days", s.n_days},
           {"entries_per_day", s.entries_per_day},
           {"vocabulary", vocab},
           {"anomalies", anomalies},
           {"rng_seed", s.rng_seed},
           {"start_date", s.start_date},
           {"activity_sd", s.activity_sd},
           {"n_controllers", s.n_controllers},
           {"n_aps", s.n_aps},
           {"n_stations", s.n_stations},
           {"n_users", s.n_users},
           {"user_share", s.user_share},
           {"heavy_station_share", s.heavy_station_share}};
}

void from_json(const json& j, SyntheticSpec& s) {
  s = SyntheticSpec{};
  j.at("n_days").get_to(s.n_days);
  j.at("entries_per_day").get_to(s.entries_per_day);
  for (const auto& t : j.at("vocabulary"))
    s.vocabulary.push_back({t.at("token").get<std::string>(), t.at("probability").get<double>()});
  if (j.contains("anomalies"))
    for (const auto& a : j.at("anomalies"))
      s.anomalies.push_back({a.value("name", std::string{}), a.at("first_day").get<int>(),
                             a.at("last_day").get<int>(), a.at("tokens").get<std::vector<std::string>>(),
                             a.at("multiplier").get<double>()});
  s.rng_seed = j.value("rng_seed", s.rng_seed);
  s.start_date = j.value("start_date", s.start_date);
  s.activity_sd = j.value("activity_sd", s.activity_sd);
  s.n_controllers = j.value("n_controllers", s.n_controllers);
  s.n_aps = j.value("n_aps", s.n_aps);
  s.n_stations = j.value("n_stations", s.n_stations);
  s.n_users = j.value("n_users", s.n_users);
  s.user_share = j.value("user_share", s.user_share);
  s.heavy_station_share = j.value("heavy_station_share", s.heavy_station_share);
}

json to_json(const GroundTruth& truth) {
  json anomalies = json::array();
  for (const auto& a : truth.anomalies) {
    json entries = json::array();
    for (const auto& e : a.entries)
      entries.push_back({{"path", e.path}, {"offset", e.offset}, {"token", e.token}, {"bin", e.bin}});
    anomalies.push_back({{"name", a.spec.name},
                         {"first_day", a.spec.first_day},
                         {"last_day", a.spec.last_day},
                         {"tokens", a.spec.tokens},
                         {"multiplier", a.spec.multiplier},
                         {"bins", a.bins},
                         {"entries", entries}});
  }
  return {{"anomalies", anomalies}, {"heavy_station", truth.heavy_station}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth t;
  for (const auto& a : j.at("anomalies")) {
    InjectedAnomaly ia;
    ia.spec = {a.at("name").get<std::string>(), a.at("first_day").get<int>(), a.at("last_day").get<int>(),
               a.at("tokens").get<std::vector<std::string>>(), a.at("multiplier").get<double>()};
    ia.bins = a.at("bins").get<std::vector<std::string>>();
    for (const auto& e : a.at("entries"))
      ia.entries.push_back({e.at("path").get<std::string>(), e.at("offset").get<std::uint64_t>(),
                            e.at("token").get<std::string>(), e.at("bin").get<std::string>()});
    t.anomalies.push_back(std::move(ia));
  }
  t.heavy_station = j.value("heavy_station", std::string{});
  return t;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir + ": " + ec.message());
  const fs::path dir = fs::absolute(out_dir).lexically_normal();

  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> activity(0.0, spec.activity_sd);
  std::uniform_int_distribution<std::int64_t> second_of_day(0, kSecondsPerDay - 1);
  std::uniform_int_distribution<int> controller(1, spec.n_controllers);
  std::uniform_int_distribution<int> station(0, spec.n_stations - 1);
  std::uniform_int_distribution<int> user(0, spec.n_users - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> weights;
  double total_weight = 0;
  for (const auto& t : spec.vocabulary) {
    weights.push_back(t.probability);
    total_weight += t.probability;
  }
  std::discrete_distribution<std::size_t> token_dist(weights.begin(), weights.end());
  std::vector<double> ap_weights;
  for (int i = 0; i < spec.n_aps; ++i) ap_weights.push_back(1.0 / std::pow(i + 1.0, 0.8));
  std::discrete_distribution<int> ap_dist(ap_weights.begin(), ap_weights.end());

  std::vector<std::string> stations;
  constexpr std::size_t kPrefixCount = std::size(kStationPrefixes);
  for (int i = 0; i < spec.n_stations; ++i)
    stations.push_back(mac_for(kStationPrefixes[i % kPrefixCount],
                               static_cast<std::uint32_t>(fnv1a(std::to_string(i)) & 0xffffff)));
  const std::string heavy = spec.heavy_station_share > 0 ? mac_for("00:1e:0b", 0x4a11ce) : "";

  auto make_entry = [&](std::int64_t day_start, std::size_t token_index) {
    const std::string& token = spec.vocabulary[token_index].token;
    std::int64_t sec = day_start + second_of_day(rng);
    std::string text = format_iso8601(Instant{std::chrono::seconds{sec}});
    text += " wlc-" + std::to_string(controller(rng)) + " # trap = OID: " + token;
    int ap = ap_dist(rng);
    if (!ap_only(token)) {
      const std::string& sta = (!heavy.empty() && unit(rng) < spec.heavy_station_share)
                                   ? heavy
                                   : stations[static_cast<std::size_t>(station(rng))];
      text += " # sta = MAC: " + sta;
    }
    char apname[16];
    std::snprintf(apname, sizeof apname, "ap-%03d", ap);
    text += " # ap = STRING: ";
    text += apname;
    if (!ap_only(token) && unit(rng) < spec.user_share) {
      char uname[16];
      std::snprintf(uname, sizeof uname, "u%05d", user(rng));
      text += " # user = STRING: ";
      text += uname;
    }
    return PendingEntry{sec, std::move(text), -1, token};
  };

  const Instant start = *parse_utc(spec.start_date, "%Y-%m-%d");
  GroundTruth truth;
  truth.heavy_station = heavy;
  for (const auto& a : spec.anomalies) truth.anomalies.push_back({a, {}, {}});

  for (int d = 0; d < spec.n_days; ++d) {
    const std::int64_t day_start = start.time_since_epoch().count() + d * kSecondsPerDay;
    const std::string label = bin_label(Instant{std::chrono::seconds{day_start}}, kSecondsPerDay);
    const double expected = spec.entries_per_day * std::exp(activity(rng));
    std::poisson_distribution<long> base_count(expected);
    const long n = base_count(rng);

    std::vector<PendingEntry> day;
    day.reserve(static_cast<std::size_t>(n) + 1024);
    for (long i = 0; i < n; ++i) day.push_back(make_entry(day_start, token_dist(rng)));

    for (std::size_t a = 0; a < spec.anomalies.size(); ++a) {
      const auto& an = spec.anomalies[a];
      if (d < an.first_day || d > an.last_day) continue;
      truth.anomalies[a].bins.push_back(label);
      for (const auto& tok : an.tokens) {
        std::size_t ti = 0;
        while (spec.vocabulary[ti].token != tok) ++ti;
        const double baseline = expected * spec.vocabulary[ti].probability / total_weight;
        std::poisson_distribution<long> extra((an.multiplier - 1.0) * baseline);
        const long k = an.multiplier > 1 ? extra(rng) : 0;
        for (long i = 0; i < k; ++i) {
          auto e = make_entry(day_start, ti);
          e.anomaly = static_cast<int>(a);
          day.push_back(std::move(e));
        }
      }
    }
    std::stable_sort(day.begin(), day.end(),
                     [](const PendingEntry& x, const PendingEntry& y) { return x.second < y.second; });

    const std::string path = (dir / ("day-" + label + ".log")).string();
    std::string buffer;
    buffer.reserve(day.size() * 128);
    for (const auto& e : day) {
      if (e.anomaly >= 0)
        truth.anomalies[static_cast<std::size_t>(e.anomaly)].entries.push_back(
            {path, buffer.size(), e.token, label});
      buffer += e.text;
      buffer.push_back('\n');
    }
    write_file(path, buffer);
  }

  CorpusManifest manifest = scan_corpus({dir.string()}, TimestampSpec{}, "\n", kSecondsPerDay);
  return {std::move(manifest), std::move(truth)};
}

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec s;
  s.n_days = 60;
  s.entries_per_day = 50000;
  s.rng_seed = 20121006;
  s.vocabulary = {
      {"bsnDot11StationAssociate", 0.20},
      {"bsnDot11StationDisassociate", 0.14},
      {"ciscoLwappDot11ClientMovedToRunState", 0.12},
      {"bsnDot11StationDeauthenticate", 0.09},
      {"bsnDot11StationReassociate", 0.07},
      {"ciscoLwappApRogueDetected", 0.06},
      {"bsnRogueAPDetected", 0.055},
      {"ciscoLwappDot11ClientDisassocDataStatsTrap", 0.05},
      {"ciscoLwappApIfUpNotify", 0.03},
      {"ciscoLwappApIfDownNotify", 0.03},
      {"bsnDot11StationAuthenticateFail", 0.02},
      {"bsnAuthenticationFailure", 0.02},
      {"bsnDot11StationBlacklisted", 0.015},
      {"ciscoLwappApCrashNotify", 0.01},
      {"bsnAPRadioCardTxFailure", 0.01},
      {"bsnDot11StationAssociateFail", 0.01},
      {"bsnRadiosExceedLicenseCount", 0.008},
      {"ciscoLwappDot11ClientCoverageHole", 0.008},
      {"bsnAPLoadProfileFailed", 0.006},
      {"bsnRADIUSServerNotResponding", 0.002},
  };
  s.anomalies = {
      {"auth-failures", 20, 22, {"bsnDot11StationAuthenticateFail", "bsnAuthenticationFailure"}, 10},
      {"radius-timeouts", 44, 45, {"bsnRADIUSServerNotResponding"}, 40},
  };
  s.heavy_station_share = 0.05;
  return s;
}

}  // namespace mbda
