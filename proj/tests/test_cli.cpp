#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "voiceloop/cli.hpp"
#include "voiceloop/serialization.hpp"

using namespace voiceloop;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("voiceloop_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"fit-pca"}).code == 2);
  CHECK(run({"gen-population", "--count", "5", "--out", "/tmp/never.json"}).code == 2);
}

TEST_CASE("population, basis, simulate and replay") {
  TempDir dir("pipeline");
  REQUIRE(run({"--seed", "31", "gen-population", "--count", "20", "--out", dir / "pop.json"}).code == 0);
  const Json pop = parse_json(read_file(dir / "pop.json"));
  REQUIRE(pop["groups"].size() == 2);
  CHECK(pop["groups"][0]["group"] == "low-f0");
  CHECK(pop["groups"][1]["speakers"].size() == 20);

  REQUIRE(run({"--seed", "31", "fit-pca", "--population", dir / "pop.json", "--components", "8", "--out",
               dir / "basis.json"})
              .code == 0);
  const Json basis = parse_json(read_file(dir / "basis.json"));
  CHECK(basis["directions"].size() == 8);

  const std::vector<std::string> sim = {"--seed",      "31",  "simulate",     "--population", dir / "pop.json",
                                        "--targets",   "2",   "--inits",      "2",            "--max-queries",
                                        "6",           "--threshold",        "0.99",         "--basis",
                                        dir / "basis.json", "--json",          dir / "r1.json", "--csv",
                                        dir / "r1.csv", "--session-out",     dir / "s.json"};
  REQUIRE(run(sim).code == 0);
  auto sim2 = sim;
  sim2[sim2.size() - 5] = dir / "r2.json";
  sim2.push_back("--threads");
  sim2.push_back("1");
  REQUIRE(run(sim2).code == 0);
  CHECK(read_file(dir / "r1.json") == read_file(dir / "r2.json"));
  const std::string csv = read_file(dir / "r1.csv");
  CHECK(csv.rfind("target_id,init_index,seed,best_similarity,first_success_query,success", 0) == 0);

  const Result ok = run({"replay", "--session", dir / "s.json"});
  CHECK(ok.code == 0);
  Json tampered = parse_json(read_file(dir / "s.json"));
  tampered["trajectory_hash"] = "0000000000000000";
  write_file(dir / "bad.json", dump(tampered));
  CHECK(run({"replay", "--session", dir / "bad.json"}).code == 1);
}

TEST_CASE("fit-pca rejects degenerate corpora") {
  TempDir dir("corpus");
  std::string line;
  for (int i = 0; i < 192; ++i) line += (i ? "," : "") + std::to_string(i * 0.01);
  write_file(dir / "one.csv", line + "\n");
  const Result r = run({"fit-pca", "--corpus", dir / "one.csv", "--out", dir / "b.json"});
  CHECK(r.code != 0);
  CHECK(r.err.find("TooFewSamples") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "b.json"));
  CHECK(run({"fit-pca", "--corpus", dir / "missing.csv", "--out", dir / "b.json"}).code == 1);
}

TEST_CASE("calibrate writes a threshold") {
  TempDir dir("calibrate");
  REQUIRE(run({"--seed", "3", "calibrate", "--count", "17", "--tracks", "3", "--out", dir / "t.json"}).code == 0);
  const Json t = parse_json(read_file(dir / "t.json"));
  CHECK(t["threshold"].get<double>() > 0.0);
  CHECK(t["threshold"].get<double>() <= 1.0);
  CHECK(run({"calibrate", "--count", "17", "--tracks", "1"}).code == 1);
}

TEST_CASE("analyze and render-diff") {
  TempDir dir("analyze");
  REQUIRE(run({"--seed", "5", "analyze", "--count", "17", "--speakers", "3", "--min-pts", "2", "--out",
               dir / "d.json", "--alignment", dir / "a.csv"})
              .code == 0);
  const Json d = parse_json(read_file(dir / "d.json"));
  REQUIRE(d["directions"].size() > 0);
  REQUIRE(run({"--seed", "5", "render-diff", "--count", "17", "--directions", dir / "d.json", "--out-prefix",
               dir / "diff"})
              .code == 0);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) pngs += e.path().extension() == ".png";
  CHECK(pngs == static_cast<int>(d["directions"].size()));
}
