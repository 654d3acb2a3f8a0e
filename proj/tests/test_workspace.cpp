#include <thread>

#include "scenario.hpp"

using namespace mbda;

TEST_CASE("settings and layout") {
  test::TempDir dir;
  WorkspaceSettings s;
  s.alpha = 0.95;
  s.policy.kind = ComponentPolicy::Kind::kFixed;
  s.policy.fixed = 4;
  Workspace::create(dir.file("ws"), s);
  auto ws = Workspace::open(dir.file("ws"));
  CHECK(ws.settings().alpha == 0.95);
  CHECK(ws.settings().policy.fixed == 4);
  CHECK(ws.iteration() == -1);
  CHECK_THROWS_AS(ws.manifest(), ConfigError);
  CHECK_THROWS_AS(Workspace::open(dir.file("nope")), ConfigError);
}

TEST_CASE("lock: exclusive across threads, re-entrant within one") {
  test::TempDir dir;
  auto ws = Workspace::create(dir.str());
  WorkspaceLock outer(ws.root());
  {
    WorkspaceLock inner(ws.root());
  }
  bool threw = false;
  std::thread([&] {
    try {
      WorkspaceLock other(ws.root());
    } catch (const LockError&) {
      threw = true;
    }
  }).join();
  CHECK(threw);
}

TEST_CASE("pipeline on a small scenario") {
  test::ScenarioWorkspace s;
  auto& ws = s.ws;
  REQUIRE(ws.iteration() == 0);
  CHECK_THROWS_AS(parse_initial(ws, 1), ConfigError);
  CHECK_THROWS_AS(detect(ws, 0.99), DataError);  // no model yet

  auto rep = s.detect_now();
  CHECK(rep.iteration == 0);
  CHECK(std::find(rep.flagged.begin(), rep.flagged.end(), "2012-01-09") != rep.flagged.end());
  CHECK(std::find(rep.flagged.begin(), rep.flagged.end(), "2012-01-10") != rep.flagged.end());
  REQUIRE_FALSE(rep.new_cases.empty());

  SUBCASE("detect is idempotent on the registry") {
    auto before = ws.events().size();
    auto again = detect(ws, 0.99);
    CHECK(again.new_cases.empty());
    CHECK(ws.events().size() == before);
  }

  std::string case_id;
  for (const auto& [id, st] : ws.cases())
    if (std::find(st.anomaly.bins.begin(), st.anomaly.bins.end(), "2012-01-09") != st.anomaly.bins.end()) case_id = id;
  REQUIRE_FALSE(case_id.empty());
  CHECK(ws.cases().at(case_id).status == CaseStatus::kDetected);

  auto result = diagnose_case(ws, case_id, {});
  auto top = case_features(result, TopRule::top_k(1), ws.config());
  CHECK(top == std::vector<std::string>{"trap=bsnAuthenticationFailure"});
  CHECK(ws.cases().at(case_id).status == CaseStatus::kDiagnosed);

  SUBCASE("observation-wise update") {
    const auto bins = ws.cases().at(case_id).anomaly.bins;
    auto before = ws.matrix(0);
    auto out = update_observationwise(ws, {bins.begin(), bins.end()}, case_id);
    CHECK(ws.iteration() == 1);
    CHECK(out.matrix.rows() == before.rows() - bins.size());
    CHECK(out.matrix.columns() == before.columns());
    CHECK(out.record.removed_rows == bins.size());
    CHECK(ws.cases().at(case_id).status == CaseStatus::kExtracted);
    CHECK_THROWS_AS(diagnose_case(ws, case_id, {}), ConfigError);
    CHECK_THROWS_AS(update_observationwise(ws, {bins.begin(), bins.end()}), DataError);

    s.detect_now();
    auto scores = plot_payload(ws, "scores");
    for (const auto& p : scores["points"])
      CHECK(std::find(bins.begin(), bins.end(), p["label"].get<std::string>()) == bins.end());

    auto replayed = replay_matrices(ws, 3);
    REQUIRE(replayed.size() == 2);
    CHECK(matrix_to_csv(replayed[1]) == matrix_to_csv(ws.matrix(1)));
  }

  SUBCASE("log-wise update") {
    CHECK_THROWS_AS(update_logwise(ws, case_id, 1), ConfigError);  // no report yet
    auto report = deparse_case(ws, case_id, 2);
    CHECK(report.matched_entries > 0);
    CHECK(ws.cases().at(case_id).status == CaseStatus::kDeparsed);
    auto before = ws.matrix(0);
    auto out = update_logwise(ws, case_id, 2);
    const auto& bins = out.record.bins;
    const auto features = ws.cases().at(case_id).anomaly.features;
    bool decreased = false;
    for (std::size_t r = 0; r < before.rows(); ++r) {
      const auto& label = before.labels()[r];
      bool affected = std::find(bins.begin(), bins.end(), label) != bins.end();
      auto a = before.row(r), b = out.matrix.row(r);
      if (!affected) {
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
        continue;
      }
      for (const auto& f : features) {
        auto c = static_cast<std::size_t>(before.column_index(f));
        CHECK(b[c] <= a[c]);
        decreased = decreased || b[c] < a[c];
      }
    }
    CHECK(decreased);
    CHECK(out.record.removed_entries == report.matched_entries);
    auto replayed = replay_matrices(ws, 1);
    CHECK(matrix_to_csv(replayed.back()) == matrix_to_csv(ws.matrix(1)));
  }

  SUBCASE("stale report after the manifest changes") {
    deparse_case(ws, case_id, 1);
    auto m = ws.manifest();
    m.chunks[0].entry_count += 1;
    ws.save_manifest(m);
    CHECK_THROWS_AS(update_logwise(ws, case_id, 1), DataError);
  }

  SUBCASE("cannot remove every row") {
    auto labels = ws.matrix(0).labels();
    CHECK_THROWS_AS(update_observationwise(ws, {labels.begin(), labels.end()}), DataError);
    CHECK_THROWS_AS(update_observationwise(ws, {"1999-01-01"}), DataError);
  }

  SUBCASE("registry is append-only") {
    auto before = read_file(ws.path("registry.jsonl"));
    create_case(ws, {"2012-01-03"}, {"trap=bsnAuthenticationFailure"}, "by hand");
    auto after = read_file(ws.path("registry.jsonl"));
    CHECK(after.substr(0, before.size()) == before);
    CHECK_THROWS_AS(create_case(ws, {"2012-01-03"}, {"no-such-feature"}), ConfigError);
  }
}

TEST_CASE("degenerate matrix for the requested A") {
  test::ScenarioWorkspace s;
  auto labels = s.ws.matrix(0).labels();
  std::set<std::string> drop(labels.begin() + 3, labels.end());
  update_observationwise(s.ws, drop);
  CHECK_THROWS(s.detect_now(3));
}

TEST_CASE("workspace artifacts: plot payloads and registry payload") {
  test::ScenarioWorkspace s;
  s.detect_now();
  for (const auto* kind : {"model", "scores", "loadings", "biplot", "msnm", "curves"}) {
    CAPTURE(kind);
    CHECK_NOTHROW(plot_payload(s.ws, kind));
  }
  CHECK_THROWS_AS(plot_payload(s.ws, "pie"), ConfigError);
  auto reg = registry_payload(s.ws);
  CHECK(reg["iteration"] == 0);
  CHECK_FALSE(reg["cases"].empty());
  CHECK(reg["cases"][0]["status"] == "detected");
}
