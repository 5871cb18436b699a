#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support/tmpdir.hpp"

// Smoke tests for the CLI surface: each subcommand named in the interface
// runs against the bundled mini corpus and produces its artifact.

namespace {

namespace fs = std::filesystem;

const std::string kCli = POLAUDIT_CLI_PATH;
const std::string kSrc = POLAUDIT_SOURCE_DIR;

int run(const std::string& args) {
  std::string cmd = "\"" + kCli + "\" " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("cli: stats, segment, distances, cluster chain on the mini corpus") {
  testutil::TmpDir tmp;
  std::string corpus = kSrc + "/data/mini/corpus.jsonl";
  std::string vectors = kSrc + "/data/mini/vectors.vec";
  auto out = tmp.path();

  CHECK(run("stats --corpus " + corpus + " --keywords " + kSrc +
            "/data/mini/keywords.json --out " + (out / "stats.json").string()) == 0);
  auto stats = nlohmann::json::parse(testutil::slurp(out / "stats.json"));
  CHECK(stats["corpus_size"] == 15);

  CHECK(run("segment --corpus " + corpus + " --out " +
            (out / "segs.jsonl").string()) == 0);
  CHECK(fs::exists(out / "segs.jsonl"));

  CHECK(run("distances --corpus " + corpus + " --vectors " + vectors +
            " --out " + (out / "dist.csv").string() + " --sim-out " +
            (out / "sim.csv").string()) == 0);
  CHECK(fs::exists(out / "dist.csv"));

  CHECK(run("cluster --similarities " + (out / "sim.csv").string() +
            " --grid 0.30:0.80:0.05 --seed 7 --out " +
            (out / "cluster").string()) == 0);
  CHECK(fs::exists(out / "cluster" / "sweep.csv"));
  CHECK(fs::exists(out / "cluster" / "partition.json"));
  CHECK(fs::exists(out / "cluster" / "plots" / "combined.csv"));

  CHECK(run("train --annotations " + kSrc + "/data/mini/annotations.csv" +
            " --vectors " + vectors + " --kind centroid --out " +
            (out / "model.json").string()) == 0);
  CHECK(run("classify --model " + (out / "model.json").string() +
            " --segments " + (out / "segs.jsonl").string() + " --vectors " +
            vectors + " --out " + (out / "labels.jsonl").string()) == 0);
  CHECK(run("eval --model " + (out / "model.json").string() +
            " --annotations " + kSrc + "/data/mini/annotations.csv" +
            " --vectors " + vectors + " --out " +
            (out / "eval.json").string()) == 0);
  auto eval = nlohmann::json::parse(testutil::slurp(out / "eval.json"));
  CHECK(eval["accuracy"].get<double>() > 0.9);  // trained on the same data

  CHECK(run("template --segments " + (out / "segs.jsonl").string() +
            " --labels " + (out / "labels.jsonl").string() + " --vectors " +
            vectors + " --category TPD --k 10 --lambda 0.5 "
            "--method pagerank-mmr --out " + (out / "tpl.json").string()) == 0);
  auto tpl = nlohmann::json::parse(testutil::slurp(out / "tpl.json"));
  CHECK(tpl["entries"].size() == 10);

  CHECK(run("audit --segments " + (out / "segs.jsonl").string() + " --labels " +
            (out / "labels.jsonl").string() + " --law " + kSrc +
            "/data/mini/law.jsonl --vectors " + vectors + " --out " +
            (out / "flags.jsonl").string()) == 0);
  CHECK(fs::exists(out / "flags.jsonl"));
}

TEST_CASE("cli: template baselines run") {
  testutil::TmpDir tmp;
  std::string corpus = kSrc + "/data/mini/corpus.jsonl";
  std::string vectors = kSrc + "/data/mini/vectors.vec";
  auto out = tmp.path();
  REQUIRE(run("segment --corpus " + corpus + " --out " +
              (out / "segs.jsonl").string()) == 0);
  for (const char* method : {"random", "avgprob"}) {
    CHECK(run("template --segments " + (out / "segs.jsonl").string() +
              " --vectors " + vectors + " --k 5 --method " + method +
              " --out " + (out / method).string() + ".json") == 0);
  }
}

TEST_CASE("cli: exit codes distinguish validation from stage failures") {
  testutil::TmpDir tmp;
  // Missing required input: validation error -> 2.
  CHECK(run("stats --corpus " + (tmp.path() / "missing.jsonl").string() +
            " --out -") == 2);
  // Config pointing at missing vectors: validation -> 2, nothing runs.
  auto cfg = tmp.file("bad.json", R"({
    "country": "US",
    "paths": {"corpus": ")" + kSrc + R"(/data/mini/corpus.jsonl",
              "vectors": "/nonexistent.vec",
              "annotations": ")" + kSrc + R"(/data/mini/annotations.csv",
              "out_dir": ")" + (tmp.path() / "out").string() + R"("},
    "stages": {"ingest": false}
  })");
  CHECK(run("run --config " + cfg.string()) == 2);
  CHECK(!fs::exists(tmp.path() / "out" / "stats"));
  // Unknown flag: CLI11 parse error (not 2/3).
  CHECK(run("frobnicate") != 0);
}
