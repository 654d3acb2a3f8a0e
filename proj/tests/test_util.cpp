#include <atomic>
#include <stdexcept>

#include "mbda/util.hpp"
#include "support.hpp"

using namespace mbda;

TEST_CASE("parse_utc and ISO formatting round trip") {
  auto t = parse_utc("2012-01-15T08:12:33", "%Y-%m-%dT%H:%M:%S");
  REQUIRE(t);
  CHECK(format_iso8601(*t) == "2012-01-15T08:12:33Z");
  CHECK_FALSE(parse_utc("not a date", "%Y-%m-%dT%H:%M:%S"));
  CHECK_FALSE(parse_utc("2012-01-15T08:12:33junk", "%Y-%m-%dT%H:%M:%S"));
}

TEST_CASE("bin labels") {
  auto t = *parse_utc("2012-01-15T23:59:59", "%Y-%m-%dT%H:%M:%S");
  CHECK(bin_label(t, kSecondsPerDay) == "2012-01-15");
  CHECK(bin_label(t + std::chrono::seconds(1), kSecondsPerDay) == "2012-01-16");
  CHECK(bin_label(t, 3600) == "2012-01-15T23:00:00Z");
  CHECK(bin_start(t, 3600) == *parse_utc("2012-01-15T23:00:00", "%Y-%m-%dT%H:%M:%S"));
}

TEST_CASE("fnv1a is the reference FNV-1a") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (std::size_t workers : {1, 3, 8}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  CHECK_THROWS_AS(parallel_for(10, 4,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("read_file reports missing files as data errors") {
  CHECK_THROWS_AS(read_file("/nonexistent/mbda/file"), DataError);
  test::TempDir dir;
  write_file(dir.file("x.txt"), "hello");
  CHECK(read_file(dir.file("x.txt")) == "hello");
}
