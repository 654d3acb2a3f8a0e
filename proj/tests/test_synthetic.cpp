#include "mbda/faac.hpp"
#include "mbda/synthetic.hpp"
#include "support.hpp"

using namespace mbda;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_days = 6;
  s.entries_per_day = 2000;
  s.vocabulary = {{"bsnDot11StationAssociate", 0.5}, {"bsnAuthenticationFailure", 0.02},
                  {"ciscoLwappApIfUpNotify", 0.1}};
  s.anomalies = {{"burst", 2, 3, {"bsnAuthenticationFailure"}, 10}};
  s.rng_seed = 99;
  s.heavy_station_share = 0.2;
  return s;
}

}  // namespace

TEST_CASE("generator is a pure function of the spec") {
  test::TempDir a, b;
  auto ca = generate_synthetic_corpus(small_spec(), a.str());
  auto cb = generate_synthetic_corpus(small_spec(), b.str());
  REQUIRE(ca.manifest.chunks.size() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(read_file(ca.manifest.chunks[i].path) == read_file(cb.manifest.chunks[i].path));
  auto ta = to_json(ca.truth), tb = to_json(cb.truth);
  for (auto* t : {&ta, &tb})
    for (auto& an : (*t)["anomalies"])
      for (auto& e : an["entries"]) e["path"] = std::filesystem::path(e["path"].get<std::string>()).filename().string();
  CHECK(ta.dump() == tb.dump());
  CHECK(std::filesystem::path(ca.manifest.chunks[0].path).filename() == "day-2012-01-01.log");
}

TEST_CASE("ground truth offsets point at injected token entries on anomalous days") {
  test::TempDir dir;
  auto c = generate_synthetic_corpus(small_spec(), dir.str());
  REQUIRE(c.truth.anomalies.size() == 1);
  const auto& an = c.truth.anomalies[0];
  CHECK(an.bins == std::vector<std::string>{"2012-01-03", "2012-01-04"});
  CHECK(an.entries.size() > 100);
  std::map<std::string, std::string> files;
  for (const auto& e : an.entries) {
    if (!files.count(e.path)) files[e.path] = read_file(e.path);
    const auto& text = files[e.path];
    auto end = text.find('\n', e.offset);
    auto line = text.substr(e.offset, end - e.offset);
    CHECK(line.find("OID: " + e.token) != std::string::npos);
    CHECK(line.rfind(e.bin, 0) == 0);
    CHECK((e.offset == 0 || text[e.offset - 1] == '\n'));
  }
  CHECK(c.truth.heavy_station == "00:1e:0b:4a:11:ce");
  auto back = ground_truth_from_json(to_json(c.truth));
  CHECK(back.anomalies[0].entries.size() == an.entries.size());
}

TEST_CASE("anomalous days carry roughly multiplier x the baseline token count") {
  test::TempDir dir;
  auto spec = small_spec();
  auto c = generate_synthetic_corpus(spec, dir.str());
  ParserConfig cfg;
  cfg.variables = default_trap_variables();
  cfg.features = {{"auth", "trap", MatchKind::kLiteral, "bsnAuthenticationFailure"},
                  {"trap=<ANY>", "trap", MatchKind::kDefault, ""},
                  {"sta=<ANY>", "sta", MatchKind::kDefault, ""},
                  {"ap=<ANY>", "ap", MatchKind::kDefault, ""},
                  {"user=<ANY>", "user", MatchKind::kDefault, ""}};
  auto m = parse_corpus(c.manifest, cfg).matrix;
  auto col = static_cast<std::size_t>(m.column_index("auth"));
  double normal = (m.at(0, col) + m.at(1, col) + m.at(4, col) + m.at(5, col)) / 4.0;
  double burst = (m.at(2, col) + m.at(3, col)) / 2.0;
  CHECK(burst / normal > 6);
  CHECK(burst / normal < 15);
}

TEST_CASE("AP-only traps carry no station") {
  test::TempDir dir;
  auto c = generate_synthetic_corpus(small_spec(), dir.str());
  std::istringstream in(read_file(c.manifest.chunks[0].path));
  std::string line;
  int checked = 0;
  while (std::getline(in, line))
    if (line.find("ciscoLwappAp") != std::string::npos) {
      CHECK(line.find("sta = MAC") == std::string::npos);
      CHECK(line.find("ap = STRING") != std::string::npos);
      ++checked;
    }
  CHECK(checked > 0);
}

TEST_CASE("spec validation and JSON round trip") {
  auto s = small_spec();
  nlohmann::json j = s;
  auto back = j.get<SyntheticSpec>();
  CHECK(nlohmann::json(back).dump() == j.dump());
  s.anomalies[0].last_day = 10;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  auto d = default_synthetic_spec();
  CHECK_NOTHROW(d.validate());
  CHECK(d.n_days == 60);
}
