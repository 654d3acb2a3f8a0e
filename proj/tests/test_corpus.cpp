#include "mbda/corpus.hpp"
#include "support.hpp"

using namespace mbda;
using test::trap;

TEST_CASE("scan splits files into per-bin chunks") {
  test::TempDir dir;
  test::write_lines(dir.file("a.log"), {trap("2012-01-01T00:00:01Z", "x"), trap("2012-01-01T12:00:00Z", "y"),
                                        trap("2012-01-02T00:00:00Z", "x")});
  test::write_lines(dir.file("b.log"), {trap("2012-01-02T05:00:00Z", "z"), "garbage line without a time"});
  auto m = scan_corpus({dir.str()});
  CHECK(m.issues.empty());
  CHECK(m.bin_labels() == std::vector<std::string>{"2012-01-01", "2012-01-02"});
  CHECK(m.total_entries() == 5);
  CHECK(m.unparsable_records == 1);
  REQUIRE(m.chunks.size() == 4);
  CHECK(m.chunks.back().unbinned());
  CHECK(m.chunks_for("2012-01-02").size() == 2);

  SUBCASE("visit_entries yields a chunk's records with offsets") {
    auto id = m.chunks_for("2012-01-01").front();
    auto entries = read_entries(m, id);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].offset == 0);
    CHECK(entries[1].raw_text.find("OID: y") != std::string::npos);
    CHECK(entries[1].offset == entries[0].raw_text.size() + 1);
    CHECK(format_iso8601(entries[1].timestamp) == "2012-01-01T12:00:00Z");
  }

  SUBCASE("manifest round trips through JSON") {
    save_manifest(m, dir.file("manifest.json"));
    auto back = load_manifest(dir.file("manifest.json"));
    CHECK(back == m);
    CHECK(back.fingerprint() == m.fingerprint());
  }

  SUBCASE("a vanished file is a data error naming it") {
    std::filesystem::remove(dir.file("a.log"));
    auto id = m.chunks_for("2012-01-01").front();
    CHECK_THROWS_WITH_AS(read_entries(m, id), doctest::Contains("a.log"), DataError);
  }
}

TEST_CASE("custom delimiter and timestamp format") {
  test::TempDir dir;
  write_file(dir.file("c.log"), "[15/01/2012 10:00:00] one||[16/01/2012 10:00:00] two||");
  TimestampSpec ts{R"(^\[(\d{2}/\d{2}/\d{4} \d{2}:\d{2}:\d{2})\])", "%d/%m/%Y %H:%M:%S"};
  auto m = scan_corpus({dir.file("c.log")}, ts, "||");
  CHECK(m.bin_labels() == std::vector<std::string>{"2012-01-15", "2012-01-16"});
  CHECK(m.total_entries() == 2);
}

TEST_CASE("unreadable roots are reported, not fatal") {
  test::TempDir dir;
  test::write_lines(dir.file("ok.log"), {trap("2012-01-01T00:00:01Z", "x")});
  auto m = scan_corpus({dir.file("ok.log"), dir.file("missing.log")});
  CHECK(m.total_entries() == 1);
  CHECK(m.issues.size() == 1);
}

TEST_CASE("fingerprint changes with file content") {
  test::TempDir dir;
  test::write_lines(dir.file("a.log"), {trap("2012-01-01T00:00:01Z", "x")});
  auto before = scan_corpus({dir.str()}).fingerprint();
  test::write_lines(dir.file("a.log"), {trap("2012-01-01T00:00:01Z", "x"), trap("2012-01-01T00:00:02Z", "y")});
  CHECK(scan_corpus({dir.str()}).fingerprint() != before);
}
