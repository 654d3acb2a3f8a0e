#include <thread>
#include <sstream>

#include "mbda/cli.hpp"
#include "scenario.hpp"

using namespace mbda;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors") {
  auto r = cli({"frobnicate"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"update", "--kind", "sideways"}).code == kExitUsage);
}

TEST_CASE("missing workspace is a config error") {
  test::TempDir dir;
  CHECK(cli({"-w", dir.file("none"), "fit"}).code == kExitConfig);
}

TEST_CASE("full command sequence on a generated corpus") {
  test::TempDir dir;
  const auto ws = dir.file("ws");
  const auto spec_path = dir.file("spec.json");
  nlohmann::json spec = test::small_scenario();
  write_file(spec_path, spec.dump());

  auto gen = cli({"generate", "--out", dir.file("gen"), "--spec", spec_path});
  REQUIRE(gen.code == 0);
  CHECK(std::filesystem::exists(dir.file("gen/ground_truth.json")));
  REQUIRE(cli({"-w", ws, "scan", dir.file("gen/logs")}).code == 0);
  REQUIRE(cli({"-w", ws, "--workers", "2", "learn"}).code == 0);
  REQUIRE(cli({"-w", ws, "parse"}).code == 0);
  CHECK(cli({"-w", ws, "parse"}).code == kExitConfig);
  REQUIRE(cli({"-w", ws, "fit", "--preprocess", "autoscale", "--pcs", "2"}).code == 0);

  auto det = cli({"-w", ws, "detect", "--alpha", "0.99"});
  REQUIRE(det.code == 0);
  auto msnm = nlohmann::json::parse(det.out);
  CHECK(msnm["points"].size() == 20);
  CHECK(det.out == cli({"-w", ws, "plot", "msnm"}).out);

  CHECK(cli({"-w", ws, "diagnose", "--case", "nope"}).code == kExitConfig);
  auto reg = nlohmann::json::parse(cli({"-w", ws, "registry"}).out);
  REQUIRE_FALSE(reg["cases"].empty());
  std::string id = reg["cases"][0]["id"];

  auto diag = cli({"-w", ws, "diagnose", "--case", id});
  REQUIRE(diag.code == 0);
  CHECK(nlohmann::json::parse(diag.out)["top"].size() == 3);
  auto dep = cli({"-w", ws, "deparse", "--case", id});
  REQUIRE(dep.code == 0);
  CHECK(nlohmann::json::parse(dep.out)["matched"].get<int>() > 0);

  auto gexf = cli({"-w", ws, "graph", "--case", id, "--node-min", "5"});
  CHECK(gexf.code == 0);
  CHECK(gexf.out.find("<gexf") != std::string::npos);

  REQUIRE(cli({"-w", ws, "update", "--case", id}).code == 0);
  auto it = cli({"-w", ws, "iterate"});
  REQUIRE(it.code == 0);
  CHECK(nlohmann::json::parse(it.out)["iteration"] == 1);
  auto replay = cli({"-w", ws, "replay"});
  CHECK(replay.code == 0);

  CHECK(cli({"-w", ws, "plot", "scores", "--pcs", "1,9"}).code != 0);
  auto a = dir.file("ws/iterations/000/matrix.csv");
  CHECK(cli({"fuse", "a=" + a, "b=" + a, "--out", dir.file("fused.csv")}).code == 0);
  CHECK(read_matrix(dir.file("fused.csv")).cols() == 2 * read_matrix(a).cols());
  CHECK(cli({"fuse", "a=" + a, "b=" + dir.file("ws/iterations/001/matrix.csv"), "--out", dir.file("x.csv")}).code ==
        kExitData);
}

TEST_CASE("lock contention exits with the lock code") {
  test::TempDir dir;
  auto ws = Workspace::create(dir.str());
  int code = 0;
  std::thread t;
  {
    WorkspaceLock held(ws.root());
    t = std::thread([&] { code = cli({"-w", dir.str(), "scan", dir.str()}).code; });
    t.join();
  }
  CHECK(code == kExitLock);
}
