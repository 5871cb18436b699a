#include <doctest.h>

#include <httplib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <thread>

#include "polaudit/pipeline.hpp"
#include "support/tmpdir.hpp"

using namespace polaudit;
namespace fs = std::filesystem;

namespace {

PipelineConfig mini_config(const fs::path& out_dir) {
  const std::string src = POLAUDIT_SOURCE_DIR;
  PipelineConfig cfg;
  cfg.country = "US";
  cfg.paths.corpus = src + "/data/mini/corpus.jsonl";
  cfg.paths.vectors = src + "/data/mini/vectors.vec";
  cfg.paths.annotations = src + "/data/mini/annotations.csv";
  cfg.paths.law = src + "/data/mini/law.jsonl";
  cfg.paths.keywords = src + "/data/mini/keywords.json";
  cfg.paths.out_dir = out_dir.string();
  cfg.stages.ingest = false;
  return cfg;
}

// Parses the first markdown table after a heading into rows of cells.
std::vector<std::vector<std::string>> parse_md_table(const std::string& md,
                                                     const std::string& heading) {
  std::vector<std::vector<std::string>> rows;
  auto pos = md.find(heading);
  if (pos == std::string::npos) return rows;
  std::istringstream in(md.substr(pos));
  std::string line;
  bool in_table = false;
  while (std::getline(in, line)) {
    if (line.rfind("|", 0) == 0) {
      in_table = true;
      if (line.find("---") != std::string::npos) continue;  // separator
      std::vector<std::string> cells;
      std::string cell;
      for (std::size_t i = 1; i < line.size(); ++i) {
        if (line[i] == '|') {
          cells.push_back(trim(cell));
          cell.clear();
        } else {
          cell.push_back(line[i]);
        }
      }
      rows.push_back(cells);
    } else if (in_table) {
      break;
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("pipeline config round-trips through JSON") {
  testutil::TmpDir tmp;
  auto cfg = mini_config(tmp.path() / "out");
  cfg.params.threshold = 0.42;
  cfg.params.categories = {"TPD"};
  cfg.params.domain_filter = true;
  auto restored = config_from_json(config_to_json(cfg));
  CHECK(canonical_json(config_to_json(restored)) ==
        canonical_json(config_to_json(cfg)));
}

TEST_CASE("config validation catches missing paths and bad params") {
  testutil::TmpDir tmp;
  auto cfg = mini_config(tmp.path() / "out");
  cfg.paths.vectors = (tmp.path() / "missing.vec").string();
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = mini_config(tmp.path() / "out");
  cfg.params.lambda = 1.5;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = mini_config(tmp.path() / "out");
  cfg.params.classifier = "transformer";
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = mini_config(tmp.path() / "out");
  cfg.params.categories = {"BOGUS"};
  CHECK_THROWS_AS(validate_config(cfg), InputError);
  cfg = mini_config(tmp.path() / "out");
  cfg.paths.out_dir.clear();
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
}

TEST_CASE("mini corpus end-to-end run") {
  testutil::TmpDir tmp;
  fs::path out = tmp.path() / "run1";
  auto cfg = mini_config(out);
  auto report = run_pipeline(cfg);

  SUBCASE("three planted communities are recovered") {
    REQUIRE(report.contains("community_table"));
    CHECK(report["community_table"]["n_communities"].get<std::size_t>() == 3);
    CHECK(report["community_table"]["policies_covered"].get<std::size_t>() == 15);
    // Each family lands in its own community.
    auto assignment = report["cluster"]["assignment"];
    std::set<std::size_t> med, web, law;
    for (int v = 0; v < 5; ++v) {
      med.insert(assignment.at("med" + std::to_string(v)).get<std::size_t>());
      web.insert(assignment.at("web" + std::to_string(v)).get<std::size_t>());
      law.insert(assignment.at("law" + std::to_string(v)).get<std::size_t>());
    }
    CHECK(med.size() == 1);
    CHECK(web.size() == 1);
    CHECK(law.size() == 1);
    CHECK(med != web);
    CHECK(web != law);
  }

  SUBCASE("templates carry 10 entries per requested category") {
    REQUIRE(report.contains("templates"));
    for (const char* cat : {"FPCU", "TPD"}) {
      REQUIRE(report["templates"].contains(cat));
      CHECK(report["templates"][cat]["entries"].size() == 10);
      // Entries are distinct segments.
      std::set<std::string> ids;
      for (const auto& entry : report["templates"][cat]["entries"])
        ids.insert(entry["segment_id"].get<std::string>());
      CHECK(ids.size() == 10);
    }
  }

  SUBCASE("corpus stats mirror the keyword sets") {
    REQUIRE(report.contains("corpus_stats"));
    CHECK(report["corpus_stats"]["corpus_size"].get<std::size_t>() == 15);
    bool found = false;
    for (const auto& row : report["corpus_stats"]["keywords"]) {
      if (row["keyword"] == "medical records") {
        found = true;
        CHECK(row["doc_count"].get<std::size_t>() == 5);  // family A only
        CHECK(row["percentage"].get<double>() == doctest::Approx(5.0 / 15.0));
      }
    }
    CHECK(found);
  }

  SUBCASE("flag summary counts equal a recount of flags.jsonl") {
    REQUIRE(report.contains("flag_summary"));
    std::map<std::string, std::size_t> recount;
    std::ifstream in(out / "audit" / "flags.jsonl");
    std::string line;
    std::size_t total = 0;
    while (std::getline(in, line)) {
      if (trim_view(line).empty()) continue;
      auto j = nlohmann::json::parse(line);
      ++recount[j["flag_kind"].get<std::string>()];
      ++total;
    }
    CHECK(report["flag_summary"]["total"].get<std::size_t>() == total);
    for (const auto& [kind, count] : recount)
      CHECK(report["flag_summary"]["per_kind"][kind].get<std::size_t>() == count);
  }

  SUBCASE("law alignment aggregates are ordered") {
    REQUIRE(report.contains("law_alignment"));
    double lo = report["law_alignment"]["min"].get<double>();
    double mid = report["law_alignment"]["median"].get<double>();
    double hi = report["law_alignment"]["max"].get<double>();
    CHECK(lo <= mid);
    CHECK(mid <= hi);
    CHECK(lo >= 0.0);
  }

  SUBCASE("classifier eval is present with high accuracy on held-out rows") {
    REQUIRE(report.contains("classifier_eval"));
    CHECK(report["classifier_eval"]["accuracy"].get<double>() >= 0.7);
  }

  SUBCASE("rerun with unchanged config skips every stage, bytes identical") {
    std::string first = testutil::slurp(out / "report.json");
    Pipeline again(cfg);
    again.run();
    CHECK(again.stages_run().empty());
    CHECK(again.stages_skipped().size() == 7);
    CHECK(testutil::slurp(out / "report.json") == first);
  }

  SUBCASE("deleting one artifact reruns only it and its descendants") {
    fs::remove(out / "distances" / "sim.csv");
    Pipeline again(cfg);
    again.run();
    auto ran = again.stages_run();
    CHECK(std::find(ran.begin(), ran.end(), "distances") != ran.end());
    CHECK(std::find(ran.begin(), ran.end(), "cluster") != ran.end());
    CHECK(std::find(ran.begin(), ran.end(), "stats") == ran.end());
    CHECK(std::find(ran.begin(), ran.end(), "segment") == ran.end());
    CHECK(std::find(ran.begin(), ran.end(), "classify") == ran.end());
  }

  SUBCASE("markdown render mirrors the canonical JSON") {
    std::string md = testutil::slurp(out / "report.md");
    auto table = parse_md_table(md, "## Communities");
    REQUIRE(table.size() == 2);  // header + one data row
    CHECK(table[1][1] ==
          std::to_string(
              report["community_table"]["policies_covered"].get<std::size_t>()));
    CHECK(table[1][2] ==
          std::to_string(
              report["community_table"]["n_communities"].get<std::size_t>()));
    auto eval_table = parse_md_table(md, "## Classifier evaluation");
    REQUIRE(eval_table.size() >= 4);
    CHECK(md.find("config hash") != std::string::npos);
  }
}

TEST_CASE("end-to-end determinism across fresh runs") {
  testutil::TmpDir tmp;
  fs::path out = tmp.path() / "det";
  auto cfg = mini_config(out);
  run_pipeline(cfg);
  std::string first = testutil::slurp(out / "report.json");
  REQUIRE(!first.empty());
  fs::remove_all(out);
  run_pipeline(cfg);
  std::string second = testutil::slurp(out / "report.json");
  CHECK(first == second);
}

TEST_CASE("fixed threshold from config overrides the sweep") {
  testutil::TmpDir tmp;
  fs::path out = tmp.path() / "fixed";
  auto cfg = mini_config(out);
  cfg.params.threshold = 0.6;
  cfg.stages.build_template = false;
  cfg.stages.audit = false;
  cfg.stages.classify = false;
  cfg.stages.segment = false;
  cfg.stages.stats = false;
  auto report = run_pipeline(cfg);
  CHECK(report["cluster"]["threshold"].get<double>() == doctest::Approx(0.6));
  CHECK(report["cluster"]["threshold_source"] == "config");
}

TEST_CASE("validation failures happen before any stage runs") {
  testutil::TmpDir tmp;
  auto cfg = mini_config(tmp.path() / "out");
  cfg.paths.vectors = (tmp.path() / "nope.vec").string();
  CHECK_THROWS_AS(run_pipeline(cfg), ValidationError);
  CHECK(!fs::exists(tmp.path() / "out" / "stats"));
}

TEST_CASE("the output directory lock is exclusive") {
  testutil::TmpDir tmp;
  fs::path out = tmp.path() / "locked";
  fs::create_directories(out);
  std::ofstream(out / ".lock") << "pid 0\n";
  auto cfg = mini_config(out);
  CHECK_THROWS_AS(run_pipeline(cfg), StageError);
  fs::remove(out / ".lock");
}

TEST_CASE("emit_plot_data writes one CSV per metric plus a combined file") {
  testutil::TmpDir tmp;
  std::vector<SweepRow> rows(3);
  rows[0] = {0.5, 0.30, 0.10, 0.20, 0.90, 3};
  rows[1] = {0.3, 0.20, 0.15, 0.25, 1.00, 2};
  rows[2] = {0.4, 0.25, 0.12, 0.22, 0.95, 2};
  auto dir = (tmp.path() / "plots").string();
  Pipeline::emit_plot_data(rows, dir);
  for (const char* name :
       {"modularity", "cut_ratio", "conductance", "coverage", "combined"}) {
    CHECK(fs::exists(fs::path(dir) / (std::string(name) + ".csv")));
  }
  auto modularity_csv = testutil::slurp(fs::path(dir) / "modularity.csv");
  // Sorted ascending by threshold.
  CHECK(modularity_csv ==
        "threshold,value\n0.29999999999999999,0.20000000000000001\n"
        "0.40000000000000002,0.25\n0.5,0.29999999999999999\n");
  // Re-emit is byte-identical.
  Pipeline::emit_plot_data(rows, dir);
  CHECK(testutil::slurp(fs::path(dir) / "modularity.csv") == modularity_csv);
  CHECK_THROWS_AS(Pipeline::emit_plot_data({}, dir), InputError);
}

TEST_CASE("ingest stage end-to-end against a local fixture site") {
  httplib::Server server;
  const char* landing_a = R"(<html><body>
    <nav><a href="/">Home</a></nav>
    <p>Welcome to General Hospital A.</p>
    <a href="/privacy">Privacy Policy</a></body></html>)";
  const char* landing_b = R"(<html><body>
    <a href="/privacy-b">Privacy Notice</a></body></html>)";
  const char* policy = R"(<html><body><header>chrome</header>
    <h2>Data We Collect</h2>
    <p>We collect patient records when you register at our hospital desk.</p>
    <h2>Sharing</h2>
    <p>We may disclose records to insurers to process claims.</p>
    </body></html>)";
  server.Get("/", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(landing_a, "text/html");
  });
  server.Get("/b", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(landing_b, "text/html");
  });
  server.Get("/privacy", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(policy, "text/html");
  });
  server.Get("/privacy-b", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(policy, "text/html");  // identical text, different URL
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  testutil::TmpDir tmp;
  std::string base = "http://127.0.0.1:" + std::to_string(port);
  auto orgs = tmp.file("orgs.csv",
                       "org_id,name,region,country,landing_url,facility_type\n"
                       "hospA,General Hospital A,North,US," + base + "/,acute\n"
                       "hospB,Clinic B,South,US," + base + "/b,clinic\n"
                       "hospC,No Site,East,US,,\n");
  PipelineConfig cfg;
  cfg.country = "US";
  cfg.paths.orgs = orgs.string();
  cfg.paths.out_dir = (tmp.path() / "out").string();
  cfg.stages = {};
  cfg.stages.ingest = true;
  cfg.stages.stats = cfg.stages.distances = cfg.stages.cluster = false;
  cfg.stages.segment = cfg.stages.classify = cfg.stages.build_template = false;
  cfg.stages.audit = false;
  cfg.params.rate = 50.0;
  Pipeline pipeline(cfg);
  pipeline.run();
  server.stop();
  server_thread.join();

  auto corpus =
      load_corpus_jsonl((tmp.path() / "out" / "ingest" / "corpus.jsonl").string());
  // Identical policy text behind two URLs collapses to one document with the
  // org ids merged.
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].org_ids == std::set<std::string>{"hospA", "hospB"});
  CHECK(corpus[0].text.find("## Data We Collect") != std::string::npos);
  CHECK(corpus[0].text.find("chrome") == std::string::npos);
  CHECK(corpus[0].word_count > 10);
  auto tallies = nlohmann::json::parse(
      testutil::slurp(tmp.path() / "out" / "ingest" / "tallies.json"));
  CHECK(tallies["orgs_without_url"] == 1);
  CHECK(tallies["unique_policies"] == 1);
}

TEST_CASE("split_annotations: explicit file and seeded default") {
  std::vector<LabeledSegment> items;
  for (int i = 0; i < 10; ++i)
    items.push_back({"text " + std::to_string(i), CategoryLabel::OTHER});
  SUBCASE("explicit eval indices") {
    testutil::TmpDir tmp;
    auto path = tmp.file("split.json", R"({"eval": [0, 3, 7]})");
    auto split = split_annotations(items, path.string(), 7, 0.2);
    REQUIRE(split.eval.size() == 3);
    CHECK(split.eval[0].text == "text 0");
    CHECK(split.eval[1].text == "text 3");
    CHECK(split.eval[2].text == "text 7");
    CHECK(split.train.size() == 7);
  }
  SUBCASE("out-of-range index rejected") {
    testutil::TmpDir tmp;
    auto path = tmp.file("split.json", R"({"eval": [99]})");
    CHECK_THROWS_AS(split_annotations(items, path.string(), 7, 0.2), InputError);
  }
  SUBCASE("seeded split is deterministic and respects the fraction") {
    auto a = split_annotations(items, "", 7, 0.2);
    auto b = split_annotations(items, "", 7, 0.2);
    CHECK(a.eval.size() == 2);
    CHECK(a.train.size() == 8);
    REQUIRE(b.eval.size() == a.eval.size());
    for (std::size_t i = 0; i < a.eval.size(); ++i)
      CHECK(a.eval[i].text == b.eval[i].text);
  }
}

TEST_CASE("markdown renderer handles an empty flag list and keeps provenance") {
  nlohmann::json report;
  report["country"] = "US";
  report["provenance"] = {{"config_hash", "deadbeef"}, {"tool_version", "0.1.0"}};
  report["flag_summary"] = {{"total", 0},
                            {"per_kind", nlohmann::json::object()},
                            {"per_community", nlohmann::json::object()},
                            {"screening_note", "n/a"}};
  auto md = Pipeline::render_report_markdown(report);
  CHECK(md.find("No flags.") != std::string::npos);
  CHECK(md.find("deadbeef") != std::string::npos);
  nlohmann::json bare;
  bare["country"] = "US";
  bare["provenance"] = {{"config_hash", "c0ffee"}, {"tool_version", "0.1.0"}};
  auto md2 = Pipeline::render_report_markdown(bare);
  CHECK(md2.find("No flags.") != std::string::npos);
  CHECK(md2.find("c0ffee") != std::string::npos);
}

TEST_CASE("load_config reads the bundled mini config") {
  const std::string src = POLAUDIT_SOURCE_DIR;
  auto cfg = load_config(src + "/data/mini/audit.json");
  CHECK(cfg.country == "US");
  CHECK(cfg.paths.corpus == "data/mini/corpus.jsonl");
  CHECK(!cfg.stages.ingest);
  CHECK(cfg.params.k == 10);
  CHECK(cfg.params.categories == std::vector<std::string>{"FPCU", "TPD"});
}
