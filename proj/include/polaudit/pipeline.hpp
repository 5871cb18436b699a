#pragma once

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "polaudit/auditor.hpp"
#include "polaudit/canonical_json.hpp"
#include "polaudit/classifier.hpp"
#include "polaudit/clustering.hpp"
#include "polaudit/embeddings.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/fetch.hpp"
#include "polaudit/ingest.hpp"
#include "polaudit/segmentation.hpp"
#include "polaudit/sha256.hpp"
#include "polaudit/templates.hpp"
#include "polaudit/text_metrics.hpp"
#include "polaudit/transport.hpp"
#include "polaudit/version.hpp"

namespace polaudit {

namespace fs = std::filesystem;

struct PipelinePaths {
  std::string orgs;          // org CSV (ingest stage)
  std::string corpus;        // existing corpus when ingest is disabled
  std::string vectors;
  std::string annotations;
  std::string split;         // explicit eval split; empty = seeded 80/20
  std::string law;           // law clause JSONL (audit stage)
  std::string ci_lexicon;    // empty = builtin defaults
  std::string vague_lexicon; // empty = builtin defaults
  std::string keywords;      // empty = builtin default keyword sets
  std::string out_dir;
};

struct PipelineStages {
  bool ingest = false;
  bool stats = true;
  bool distances = true;
  bool cluster = true;
  bool segment = true;
  bool classify = true;
  bool build_template = true;
  bool audit = true;
};

struct PipelineParams {
  std::optional<double> threshold;  // overrides the sweep recommendation
  double grid_begin = 0.30, grid_end = 0.80, grid_step = 0.01;
  std::size_t k = 10;
  double lambda = 0.5;
  double damping = 0.85;
  std::uint32_t seed = 7;
  double coverage_floor = 0.5;
  std::string classifier = "centroid";
  std::vector<std::string> categories = {"FPCU", "TPD"};
  double rate = 1.0;  // requests per second per host
  int depth = 0;
  double eval_fraction = 0.2;
  std::size_t min_segment_chars = 200;
  std::optional<bool> domain_filter;  // default: country == "IN"
};

struct PipelineConfig {
  std::string country = "US";
  PipelinePaths paths;
  PipelineStages stages;
  PipelineParams params;
};

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["country"] = cfg.country;
  nlohmann::json paths;
  paths["orgs"] = cfg.paths.orgs;
  paths["corpus"] = cfg.paths.corpus;
  paths["vectors"] = cfg.paths.vectors;
  paths["annotations"] = cfg.paths.annotations;
  paths["split"] = cfg.paths.split;
  paths["law"] = cfg.paths.law;
  paths["ci_lexicon"] = cfg.paths.ci_lexicon;
  paths["vague_lexicon"] = cfg.paths.vague_lexicon;
  paths["keywords"] = cfg.paths.keywords;
  paths["out_dir"] = cfg.paths.out_dir;
  j["paths"] = paths;
  nlohmann::json stages;
  stages["ingest"] = cfg.stages.ingest;
  stages["stats"] = cfg.stages.stats;
  stages["distances"] = cfg.stages.distances;
  stages["cluster"] = cfg.stages.cluster;
  stages["segment"] = cfg.stages.segment;
  stages["classify"] = cfg.stages.classify;
  stages["template"] = cfg.stages.build_template;
  stages["audit"] = cfg.stages.audit;
  j["stages"] = stages;
  nlohmann::json params;
  if (cfg.params.threshold) params["threshold"] = *cfg.params.threshold;
  params["grid"] = {{"begin", cfg.params.grid_begin},
                    {"end", cfg.params.grid_end},
                    {"step", cfg.params.grid_step}};
  params["k"] = cfg.params.k;
  params["lambda"] = cfg.params.lambda;
  params["damping"] = cfg.params.damping;
  params["seed"] = cfg.params.seed;
  params["coverage_floor"] = cfg.params.coverage_floor;
  params["classifier"] = cfg.params.classifier;
  params["categories"] = cfg.params.categories;
  params["rate"] = cfg.params.rate;
  params["depth"] = cfg.params.depth;
  params["eval_fraction"] = cfg.params.eval_fraction;
  params["min_segment_chars"] = cfg.params.min_segment_chars;
  if (cfg.params.domain_filter) params["domain_filter"] = *cfg.params.domain_filter;
  j["params"] = params;
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.country = j.value("country", "US");
  const auto paths = j.value("paths", nlohmann::json::object());
  cfg.paths.orgs = paths.value("orgs", "");
  cfg.paths.corpus = paths.value("corpus", "");
  cfg.paths.vectors = paths.value("vectors", "");
  cfg.paths.annotations = paths.value("annotations", "");
  cfg.paths.split = paths.value("split", "");
  cfg.paths.law = paths.value("law", "");
  cfg.paths.ci_lexicon = paths.value("ci_lexicon", "");
  cfg.paths.vague_lexicon = paths.value("vague_lexicon", "");
  cfg.paths.keywords = paths.value("keywords", "");
  cfg.paths.out_dir = paths.value("out_dir", "");
  const auto stages = j.value("stages", nlohmann::json::object());
  cfg.stages.ingest = stages.value("ingest", false);
  cfg.stages.stats = stages.value("stats", true);
  cfg.stages.distances = stages.value("distances", true);
  cfg.stages.cluster = stages.value("cluster", true);
  cfg.stages.segment = stages.value("segment", true);
  cfg.stages.classify = stages.value("classify", true);
  cfg.stages.build_template = stages.value("template", true);
  cfg.stages.audit = stages.value("audit", true);
  const auto params = j.value("params", nlohmann::json::object());
  if (params.contains("threshold"))
    cfg.params.threshold = params.at("threshold").get<double>();
  if (params.contains("grid")) {
    cfg.params.grid_begin = params.at("grid").value("begin", 0.30);
    cfg.params.grid_end = params.at("grid").value("end", 0.80);
    cfg.params.grid_step = params.at("grid").value("step", 0.01);
  }
  cfg.params.k = params.value("k", std::size_t{10});
  cfg.params.lambda = params.value("lambda", 0.5);
  cfg.params.damping = params.value("damping", 0.85);
  cfg.params.seed = params.value("seed", 7u);
  cfg.params.coverage_floor = params.value("coverage_floor", 0.5);
  cfg.params.classifier = params.value("classifier", "centroid");
  if (params.contains("categories"))
    cfg.params.categories = params.at("categories").get<std::vector<std::string>>();
  cfg.params.rate = params.value("rate", 1.0);
  cfg.params.depth = params.value("depth", 0);
  cfg.params.eval_fraction = params.value("eval_fraction", 0.2);
  cfg.params.min_segment_chars = params.value("min_segment_chars", std::size_t{200});
  if (params.contains("domain_filter"))
    cfg.params.domain_filter = params.at("domain_filter").get<bool>();
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config parse: ") + e.what());
  }
}

inline void validate_config(const PipelineConfig& cfg) {
  auto require_file = [](const std::string& path, const std::string& what) {
    if (path.empty()) throw ValidationError(what + " path is required");
    if (!fs::exists(path)) throw ValidationError(what + " not found: " + path);
  };
  if (cfg.paths.out_dir.empty()) throw ValidationError("out_dir is required");
  if (cfg.stages.ingest)
    require_file(cfg.paths.orgs, "org list");
  else if (cfg.stages.stats || cfg.stages.distances || cfg.stages.segment)
    require_file(cfg.paths.corpus, "corpus");
  if (cfg.stages.distances || cfg.stages.classify || cfg.stages.build_template ||
      cfg.stages.audit)
    require_file(cfg.paths.vectors, "vectors");
  if (cfg.stages.classify) require_file(cfg.paths.annotations, "annotations");
  if (!cfg.paths.split.empty()) require_file(cfg.paths.split, "split file");
  if (cfg.stages.audit && !cfg.paths.law.empty())
    require_file(cfg.paths.law, "law corpus");
  if (!cfg.paths.ci_lexicon.empty()) require_file(cfg.paths.ci_lexicon, "CI lexicon");
  if (!cfg.paths.vague_lexicon.empty())
    require_file(cfg.paths.vague_lexicon, "vagueness lexicon");
  if (!cfg.paths.keywords.empty()) require_file(cfg.paths.keywords, "keywords");
  if (cfg.params.threshold &&
      !(*cfg.params.threshold >= 0 && *cfg.params.threshold < 1))
    throw ValidationError("threshold must lie in [0,1)");
  if (!(cfg.params.grid_step > 0) || cfg.params.grid_begin < 0 ||
      cfg.params.grid_end >= 1 || cfg.params.grid_begin > cfg.params.grid_end)
    throw ValidationError("grid must satisfy 0 <= begin <= end < 1, step > 0");
  if (!(cfg.params.lambda >= 0 && cfg.params.lambda <= 1))
    throw ValidationError("lambda must lie in [0,1]");
  if (!(cfg.params.damping > 0 && cfg.params.damping < 1))
    throw ValidationError("damping must lie in (0,1)");
  if (cfg.params.k < 1) throw ValidationError("k must be >= 1");
  if (!(cfg.params.coverage_floor >= 0 && cfg.params.coverage_floor <= 1))
    throw ValidationError("coverage_floor must lie in [0,1]");
  if (cfg.params.classifier != "centroid" && cfg.params.classifier != "linear")
    throw ValidationError("classifier must be 'centroid' or 'linear'");
  if (!(cfg.params.eval_fraction > 0 && cfg.params.eval_fraction < 1))
    throw ValidationError("eval_fraction must lie in (0,1)");
  for (const auto& cat : cfg.params.categories) category_from_string(cat);
}

// ---- small helpers -----------------------------------------------------------

namespace detail {

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Exclusive ownership of the output directory for one process.
class DirLock {
public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw StageError("lock", "output directory is locked by " + path_.string() +
                                   " (remove it if no other run is active)");
    std::ofstream out(path_);
    out << "pid " << ::getpid() << '\n';
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  fs::path path_;
};

}  // namespace detail

inline std::vector<std::pair<std::string, std::vector<std::string>>>
default_keyword_sets() {
  return {{"Healthcare Specific Information", {"medical records", "PHI"}},
          {"Online Information", {"cookies", "logs"}},
          {"Data Disclosure Practices", {"share", "sell", "disclose", "pass"}}};
}

inline std::vector<std::pair<std::string, std::vector<std::string>>>
load_keyword_sets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open keywords " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("keywords JSON: ") + e.what(), 0);
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> sets;
  for (auto it = j.begin(); it != j.end(); ++it)
    sets.emplace_back(it.key(), it.value().get<std::vector<std::string>>());
  return sets;
}

struct AnnotationSplit {
  std::vector<LabeledSegment> train;
  std::vector<LabeledSegment> eval;
};

// Explicit split file ({"eval": [indices into the deduplicated annotation
// order]}) when given, otherwise a seeded shuffled split.
inline AnnotationSplit split_annotations(const std::vector<LabeledSegment>& items,
                                         const std::string& split_path,
                                         std::uint32_t seed,
                                         double eval_fraction) {
  AnnotationSplit out;
  if (!split_path.empty()) {
    std::ifstream in(split_path);
    if (!in) throw InputError("cannot open split file " + split_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("split file: ") + e.what(), 0);
    }
    std::set<std::size_t> eval_idx;
    for (const auto& v : j.at("eval")) {
      std::size_t idx = v.get<std::size_t>();
      if (idx >= items.size())
        throw InputError("split file: index " + std::to_string(idx) +
                         " out of range");
      eval_idx.insert(idx);
    }
    if (eval_idx.empty() || eval_idx.size() >= items.size())
      throw InputError("split file must leave both sides non-empty");
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (eval_idx.count(i))
        out.eval.push_back(items[i]);
      else
        out.train.push_back(items[i]);
    }
    return out;
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng() % i]);
  std::size_t eval_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(order.size()) *
                                  eval_fraction));
  if (eval_count >= order.size()) eval_count = order.size() - 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < eval_count)
      out.eval.push_back(items[order[i]]);
    else
      out.train.push_back(items[order[i]]);
  }
  return out;
}

// ---- stage results used by the report ----------------------------------------

class Pipeline {
public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    out_ = fs::path(cfg_.paths.out_dir);
    config_hash_ = sha256_hex(canonical_json(config_to_json(cfg_)));
  }

  // Executes every enabled stage (skipping fresh ones), writes report.json /
  // report.md and returns the canonical report JSON.
  nlohmann::json run() {
    detail::DirLock lock(out_);
    auto started = std::chrono::system_clock::now();
    run_stage("ingest", cfg_.stages.ingest, {cfg_.paths.orgs},
              {ingest_corpus_path()}, [&] { stage_ingest(); });
    run_stage("stats", cfg_.stages.stats, {corpus_path()},
              {out_ / "stats" / "stats.json"}, [&] { stage_stats(); });
    run_stage("distances", cfg_.stages.distances,
              {corpus_path(), cfg_.paths.vectors},
              {out_ / "distances" / "dist.csv", out_ / "distances" / "sim.csv"},
              [&] { stage_distances(); });
    run_stage("cluster", cfg_.stages.cluster, {out_ / "distances" / "sim.csv"},
              {out_ / "cluster" / "sweep.csv", out_ / "cluster" / "partition.json"},
              [&] { stage_cluster(); });
    run_stage("segment", cfg_.stages.segment, {corpus_path()},
              {out_ / "segment" / "segments.jsonl"}, [&] { stage_segment(); });
    {
      std::vector<fs::path> inputs = {out_ / "segment" / "segments.jsonl",
                                      cfg_.paths.annotations, cfg_.paths.vectors};
      if (!cfg_.paths.split.empty()) inputs.push_back(cfg_.paths.split);
      run_stage("classify", cfg_.stages.classify, inputs,
                {out_ / "classify" / "model.json",
                 out_ / "classify" / "eval.json",
                 out_ / "classify" / "labels.jsonl"},
                [&] { stage_classify(); });
    }
    {
      std::vector<fs::path> outputs;
      for (const auto& cat : cfg_.params.categories) {
        outputs.push_back(out_ / "template" / ("template_" + cat + ".json"));
        outputs.push_back(out_ / "template" / ("metrics_" + cat + ".json"));
      }
      run_stage("template", cfg_.stages.build_template,
                {out_ / "classify" / "labels.jsonl",
                 out_ / "segment" / "segments.jsonl", cfg_.paths.vectors},
                outputs, [&] { stage_template(); });
    }
    {
      std::vector<fs::path> inputs = {out_ / "classify" / "labels.jsonl",
                                      out_ / "segment" / "segments.jsonl",
                                      cfg_.paths.vectors};
      if (!cfg_.paths.law.empty()) inputs.push_back(cfg_.paths.law);
      run_stage("audit", cfg_.stages.audit, inputs,
                {out_ / "audit" / "flags.jsonl", out_ / "audit" / "alignment.json"},
                [&] { stage_audit(); });
    }

    nlohmann::json report = assemble_report();
    detail::write_file(out_ / "report.json", canonical_json(report));
    detail::write_file(out_ / "report.md", render_report_markdown(report));
    auto finished = std::chrono::system_clock::now();
    nlohmann::json meta;
    meta["started_at_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                started.time_since_epoch())
                                .count();
    meta["finished_at_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 finished.time_since_epoch())
                                 .count();
    meta["stages_run"] = stages_run_;
    meta["stages_skipped"] = stages_skipped_;
    detail::write_file(out_ / "run_meta.json", meta.dump(2) + "\n");
    return report;
  }

  const std::vector<std::string>& stages_run() const { return stages_run_; }
  const std::vector<std::string>& stages_skipped() const { return stages_skipped_; }

  // Markdown rendering of the canonical report (same content, human layout).
  static std::string render_report_markdown(const nlohmann::json& report);

private:
  fs::path ingest_corpus_path() const { return out_ / "ingest" / "corpus.jsonl"; }

  fs::path corpus_path() const {
    return cfg_.stages.ingest ? ingest_corpus_path() : fs::path(cfg_.paths.corpus);
  }

  template <typename Body>
  void run_stage(const std::string& name, bool enabled,
                 const std::vector<fs::path>& inputs,
                 const std::vector<fs::path>& outputs, Body body) {
    if (!enabled) return;
    if (stage_fresh(name, inputs, outputs)) {
      stages_skipped_.push_back(name);
      return;
    }
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    detail::write_file(out_ / name / ".stamp", config_hash_ + "\n");
    stages_run_.push_back(name);
  }

  bool stage_fresh(const std::string& name, const std::vector<fs::path>& inputs,
                   const std::vector<fs::path>& outputs) const {
    fs::path stamp = out_ / name / ".stamp";
    if (!fs::exists(stamp)) return false;
    std::string recorded = trim(detail::read_file(stamp));
    if (recorded != config_hash_) return false;
    fs::file_time_type newest_input = fs::file_time_type::min();
    for (const auto& input : inputs) {
      if (!fs::exists(input)) return false;
      newest_input = std::max(newest_input, fs::last_write_time(input));
    }
    for (const auto& output : outputs) {
      if (!fs::exists(output)) return false;
      if (fs::last_write_time(output) < newest_input) return false;
    }
    return true;
  }

  // ---- stages ---------------------------------------------------------------

  void stage_ingest() {
    std::ifstream orgs_in(cfg_.paths.orgs);
    if (!orgs_in) throw InputError("cannot open orgs " + cfg_.paths.orgs);
    auto orgs = load_org_csv(orgs_in);
    bool domain_filter = cfg_.params.domain_filter.value_or(cfg_.country == "IN");

    PolitenessConfig politeness;
    politeness.min_delay_seconds =
        cfg_.params.rate > 0 ? 1.0 / cfg_.params.rate : 0.0;
    Fetcher fetcher(politeness);

    nlohmann::json tallies;
    tallies["orgs"] = orgs.size();
    std::size_t no_url = 0, filtered = 0, fetch_failed = 0, extract_failed = 0;

    fs::create_directories(out_ / "ingest");
    fs::path corpus_file = ingest_corpus_path();
    std::error_code ec;
    fs::remove(corpus_file, ec);

    std::map<std::string, std::set<std::string>> candidates;  // url -> org_ids
    std::vector<std::string> candidate_order;
    for (const auto& org : orgs) {
      if (!org.landing_url) {
        ++no_url;
        continue;
      }
      if (domain_filter &&
          !filter_by_domain_overlap(*org.landing_url, org.name)) {
        ++filtered;
        continue;
      }
      auto landing = fetcher.fetch(*org.landing_url);
      if (!landing.body) {
        ++fetch_failed;
        continue;
      }
      LinkDiagnostics diag;
      auto links =
          discover_policy_links(*landing.body, *org.landing_url, {}, &diag);
      if (cfg_.params.depth >= 1) {
        std::vector<std::string> extra;
        for (const auto& link : links) {
          auto page = fetcher.fetch(link);
          if (!page.body) continue;
          for (auto& deeper : discover_policy_links(*page.body, link, {}, &diag))
            extra.push_back(std::move(deeper));
        }
        for (auto& link : extra)
          if (std::find(links.begin(), links.end(), link) == links.end())
            links.push_back(std::move(link));
      }
      for (const auto& link : links) {
        auto [it, inserted] = candidates.emplace(link, std::set<std::string>{});
        it->second.insert(org.org_id);
        if (inserted) candidate_order.push_back(link);
      }
    }

    std::vector<PolicyDocument> docs;
    for (const auto& url : candidate_order) {
      auto page = fetcher.fetch(url);
      if (!page.body) {
        ++fetch_failed;
        continue;
      }
      std::optional<std::string> charset;
      if (page.content_type) {
        auto pos = to_lower(*page.content_type).find("charset=");
        if (pos != std::string::npos) {
          std::string cs = page.content_type->substr(pos + 8);
          auto end = cs.find_first_of("; \t");
          charset = trim(end == std::string::npos ? cs : cs.substr(0, end));
        }
      }
      std::string text;
      try {
        text = extract_main_text(*page.body, {}, charset);
      } catch (const EmptyDocumentError&) {
        ++extract_failed;
        continue;
      }
      std::string policy_id = "P" + sha256_hex(url).substr(0, 12);
      docs.push_back(make_policy_document(policy_id, candidates.at(url),
                                          cfg_.country, url, std::move(text)));
    }
    // Distinct URLs can carry identical policies; dedupe merges their orgs.
    CorpusWriter writer(corpus_file.string());
    for (const auto& doc : dedupe_policies(docs)) writer.append(doc);

    tallies["orgs_without_url"] = no_url;
    tallies["orgs_filtered_by_domain"] = filtered;
    tallies["fetch_failures"] = fetch_failed;
    tallies["extraction_failures"] = extract_failed;
    tallies["unique_policies"] = writer.size();
    detail::write_file(out_ / "ingest" / "tallies.json", tallies.dump(2) + "\n");
  }

  void stage_stats() {
    auto corpus = load_corpus_jsonl(corpus_path().string());
    std::vector<double> words, sentences, flesch;
    std::vector<std::vector<std::string>> corpus_words;
    for (const auto& doc : corpus) {
      auto tok = tokenize(doc.text);
      words.push_back(static_cast<double>(tok.words.size()));
      sentences.push_back(static_cast<double>(tok.sentences.size()));
      if (!tok.sentences.empty() && !tok.words.empty())
        flesch.push_back(flesch_reading_ease(tok));
      corpus_words.push_back(std::move(tok.words));
    }
    auto keyword_sets = cfg_.paths.keywords.empty()
                            ? default_keyword_sets()
                            : load_keyword_sets(cfg_.paths.keywords);
    auto report = keyword_report(corpus_words, keyword_sets);

    nlohmann::json j;
    j["corpus_size"] = corpus.size();
    j["words"] = {{"mean", detail::mean_of(words)},
                  {"median", detail::median_of(words)}};
    j["sentences"] = {{"mean", detail::mean_of(sentences)},
                      {"median", detail::median_of(sentences)}};
    j["flesch"] = {{"mean", detail::mean_of(flesch)},
                   {"median", detail::median_of(flesch)}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows)
      rows.push_back({{"group", row.group},
                      {"keyword", row.keyword},
                      {"doc_count", row.doc_count},
                      {"percentage", row.percentage}});
    j["keywords"] = rows;
    detail::write_file(out_ / "stats" / "stats.json", canonical_json(j));
  }

  void stage_distances() {
    auto corpus = load_corpus_jsonl(corpus_path().string());
    auto vectors = load_word_vectors(cfg_.paths.vectors);
    std::vector<std::string> ids;
    std::vector<DocDistribution> dists;
    nlohmann::json excluded = nlohmann::json::array();
    for (const auto& doc : corpus) {
      try {
        auto words = tokenize(doc.text).words;
        dists.push_back(doc_to_nbow(words, vectors));
        ids.push_back(doc.policy_id);
      } catch (const EmptyDistributionError&) {
        excluded.push_back(doc.policy_id);
      }
    }
    auto dm = pairwise_distances(ids, dists, vectors);
    auto sm = normalize_similarities(dm);
    std::ostringstream dist_csv, sim_csv;
    save_distance_matrix(dm, dist_csv);
    save_similarity_matrix(sm, sim_csv);
    detail::write_file(out_ / "distances" / "dist.csv", dist_csv.str());
    detail::write_file(out_ / "distances" / "sim.csv", sim_csv.str());
    nlohmann::json meta;
    meta["excluded_policies"] = excluded;
    detail::write_file(out_ / "distances" / "excluded.json", meta.dump(2) + "\n");
  }

  void stage_cluster() {
    std::ifstream sim_in(out_ / "distances" / "sim.csv");
    auto sm = load_similarity_matrix(sim_in);
    std::vector<double> grid;
    for (std::size_t i = 0;; ++i) {
      double t = cfg_.params.grid_begin + static_cast<double>(i) * cfg_.params.grid_step;
      if (t > cfg_.params.grid_end + 1e-12) break;
      grid.push_back(t);
    }
    SweepOptions sweep_opt;
    sweep_opt.coverage_floor = cfg_.params.coverage_floor;
    auto sweep = threshold_sweep(sm, grid, cfg_.params.seed, sweep_opt);

    std::ostringstream sweep_csv;
    sweep_csv << "threshold,modularity,mean_cut_ratio,mean_conductance,coverage,"
                 "n_communities\n";
    char buf[64];
    for (const auto& row : sweep.rows) {
      auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        sweep_csv << buf << sep;
      };
      put(row.threshold, ',');
      put(row.modularity, ',');
      put(row.mean_cut_ratio, ',');
      put(row.mean_conductance, ',');
      put(row.coverage, ',');
      sweep_csv << row.n_communities_ge2 << '\n';
    }
    detail::write_file(out_ / "cluster" / "sweep.csv", sweep_csv.str());
    emit_plot_data(sweep.rows, (out_ / "cluster" / "plots").string());

    std::optional<double> chosen = cfg_.params.threshold;
    if (!chosen) chosen = sweep.recommended;
    if (!chosen)
      throw InputError(
          "no threshold meets the coverage floor; set params.threshold");
    auto graph = build_graph(sm, *chosen);
    if (graph.edges.empty())
      throw InputError("similarity graph is empty at the chosen threshold");
    auto part = louvain(graph, cfg_.params.seed);

    nlohmann::json j;
    j["threshold"] = *chosen;
    j["threshold_source"] = cfg_.params.threshold ? "config" : "sweep";
    j["modularity"] = part.modularity;
    nlohmann::json assignment;
    for (std::size_t c = 0; c < part.communities.size(); ++c)
      for (std::size_t v : part.communities[c])
        assignment[graph.nodes[v]] = c;
    j["assignment"] = assignment;
    nlohmann::json isolated = nlohmann::json::array();
    for (std::size_t v : part.isolated) isolated.push_back(graph.nodes[v]);
    j["isolated"] = isolated;
    nlohmann::json communities = nlohmann::json::array();
    for (std::size_t c = 0; c < part.communities.size(); ++c) {
      communities.push_back({{"id", c},
                             {"size", part.per_community[c].size},
                             {"cut_ratio", part.per_community[c].cut_ratio},
                             {"conductance", part.per_community[c].conductance}});
    }
    j["communities"] = communities;
    detail::write_file(out_ / "cluster" / "partition.json", canonical_json(j));
  }

  void stage_segment() {
    auto corpus = load_corpus_jsonl(corpus_path().string());
    SegmenterConfig seg_cfg;
    seg_cfg.min_segment_chars = cfg_.params.min_segment_chars;
    std::ostringstream lines;
    for (const auto& doc : corpus)
      for (const auto& seg : segment_policy(doc, seg_cfg))
        lines << segment_to_json(seg).dump() << '\n';
    detail::write_file(out_ / "segment" / "segments.jsonl", lines.str());
  }

  void stage_classify() {
    auto vectors = load_word_vectors(cfg_.paths.vectors);
    auto annotations = load_annotations(cfg_.paths.annotations);
    if (annotations.items.empty())
      throw InputError("annotation set is empty");
    auto split = split_annotations(annotations.items, cfg_.paths.split,
                                   cfg_.params.seed, cfg_.params.eval_fraction);
    ClassifierConfig cls_cfg;
    cls_cfg.kind = cfg_.params.classifier;
    cls_cfg.seed = cfg_.params.seed;
    auto model = train_classifier(split.train, vectors, cls_cfg);
    auto eval_report = evaluate_classifier(model, split.eval, vectors);
    detail::write_file(out_ / "classify" / "model.json",
                       canonical_json(model_to_json(model)));
    detail::write_file(out_ / "classify" / "eval.json",
                       canonical_json(eval_report_to_json(eval_report)));

    auto segments = load_segments_jsonl((out_ / "segment" / "segments.jsonl").string());
    std::ostringstream lines;
    for (const auto& seg : segments) {
      auto words = tokenize(seg.text).words;
      auto cls = classify_segment(model, words, vectors);
      nlohmann::json j;
      j["segment_id"] = seg.segment_id;
      j["label"] = to_string(cls.label);
      j["confidence"] = cls.confidence;
      j["empty_features"] = cls.empty_features;
      lines << j.dump() << '\n';
    }
    detail::write_file(out_ / "classify" / "labels.jsonl", lines.str());
  }

  std::map<std::string, std::string> load_labels() const {
    std::map<std::string, std::string> labels;
    std::ifstream in(out_ / "classify" / "labels.jsonl");
    if (!in) throw InputError("labels.jsonl missing; run the classify stage");
    std::string line;
    while (std::getline(in, line)) {
      if (trim_view(line).empty()) continue;
      auto j = nlohmann::json::parse(line);
      labels[j.at("segment_id").get<std::string>()] =
          j.at("label").get<std::string>();
    }
    return labels;
  }

  void stage_template() {
    auto vectors = load_word_vectors(cfg_.paths.vectors);
    auto segments = load_segments_jsonl((out_ / "segment" / "segments.jsonl").string());
    auto labels = load_labels();
    for (const auto& cat : cfg_.params.categories) {
      std::vector<std::string> ids;
      std::vector<std::vector<std::string>> words;
      std::map<std::string, std::string> text_by_id;
      for (const auto& seg : segments) {
        auto it = labels.find(seg.segment_id);
        if (it == labels.end() || it->second != cat) continue;
        ids.push_back(seg.segment_id);
        words.push_back(tokenize(seg.text).words);
        text_by_id[seg.segment_id] = seg.text;
      }
      nlohmann::json tpl_json;
      tpl_json["country"] = cfg_.country;
      tpl_json["category"] = cat;
      tpl_json["k"] = cfg_.params.k;
      tpl_json["lambda"] = cfg_.params.lambda;
      nlohmann::json metrics_json;
      metrics_json["category"] = cat;
      if (ids.size() < 2) {
        tpl_json["entries"] = nlohmann::json::array();
        tpl_json["warning"] = "fewer than two usable segments in this category";
        metrics_json["warning"] = tpl_json["warning"];
      } else {
        auto graph = build_segment_graph(ids, words, vectors);
        PageRankConfig pr_cfg;
        pr_cfg.damping = cfg_.params.damping;
        auto tpl = build_template(graph, cfg_.params.k, cfg_.params.lambda, pr_cfg);
        nlohmann::json entries = nlohmann::json::array();
        std::vector<std::size_t> picked_sources;
        for (const auto& entry : tpl.entries) {
          entries.push_back({{"segment_id", entry.segment_id},
                             {"importance", entry.importance},
                             {"mmr_score", entry.mmr_score},
                             {"text", text_by_id.at(entry.segment_id)}});
        }
        tpl_json["entries"] = entries;

        // Summary-quality metrics for PageRank+MMR and the two baselines.
        auto graph_words = [&]() {
          std::vector<std::vector<std::string>> usable;
          for (std::size_t s : graph.source_index) usable.push_back(words[s]);
          return usable;
        }();
        auto scores = pagerank(graph, pr_cfg);
        auto pr_sel = mmr_select(scores, graph, cfg_.params.k, cfg_.params.lambda);
        auto random_sel =
            random_n_baseline(graph.size(), cfg_.params.k, cfg_.params.seed);
        auto avg_sel = avg_probability_baseline(graph_words, cfg_.params.k);
        auto put = [&](const char* name, const std::vector<std::size_t>& sel) {
          auto eval = evaluate_summary(sel, graph_words, vectors);
          metrics_json[name] = {{"js_divergence", eval.js_divergence},
                                {"cosine_similarity", eval.cosine_similarity},
                                {"wmd", eval.wmd}};
        };
        put("pagerank_mmr", pr_sel);
        put("random_n", random_sel);
        put("avg_probability", avg_sel);
      }
      detail::write_file(out_ / "template" / ("template_" + cat + ".json"),
                         canonical_json(tpl_json));
      detail::write_file(out_ / "template" / ("metrics_" + cat + ".json"),
                         canonical_json(metrics_json));
    }
  }

  void stage_audit() {
    auto segments = load_segments_jsonl((out_ / "segment" / "segments.jsonl").string());
    auto labels = load_labels();
    CiLexicons ci = cfg_.paths.ci_lexicon.empty()
                        ? default_ci_lexicons()
                        : load_ci_lexicons(cfg_.paths.ci_lexicon);
    VaguenessLexicon vague = cfg_.paths.vague_lexicon.empty()
                                 ? default_vagueness_lexicon()
                                 : load_vagueness_lexicon(cfg_.paths.vague_lexicon);
    std::ostringstream lines;
    std::vector<std::pair<std::string, std::vector<std::string>>> practices;
    for (const auto& seg : segments) {
      auto it = labels.find(seg.segment_id);
      if (it == labels.end()) continue;
      if (it->second != "FPCU" && it->second != "TPD") continue;
      practices.emplace_back(seg.segment_id, tokenize(seg.text).words);
      for (const auto& flag : flag_incompleteness(seg.segment_id, seg.text, ci))
        lines << flag_to_json(flag).dump() << '\n';
      for (const auto& flag : flag_vagueness(seg.segment_id, seg.text, vague))
        lines << flag_to_json(flag).dump() << '\n';
    }
    detail::write_file(out_ / "audit" / "flags.jsonl", lines.str());

    nlohmann::json alignment;
    alignment["note"] =
        "deterministic lexicon screening; findings are candidates for human review";
    if (!cfg_.paths.law.empty() && !practices.empty()) {
      auto vectors = load_word_vectors(cfg_.paths.vectors);
      auto clauses = load_law_jsonl(cfg_.paths.law);
      auto report = law_alignment_wmd(practices, clauses, vectors);
      alignment["min"] = report.min;
      alignment["median"] = report.median;
      alignment["max"] = report.max;
      alignment["skipped_practices"] = report.skipped_practices;
      alignment["skipped_clauses"] = report.skipped_clauses;
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& row : report.per_practice)
        rows.push_back({{"segment_id", row.id},
                        {"min_wmd", row.min_wmd},
                        {"nearest_clause", row.nearest_clause}});
      alignment["per_practice"] = rows;
    }
    detail::write_file(out_ / "audit" / "alignment.json", canonical_json(alignment));
  }

  // ---- report ----------------------------------------------------------------

  nlohmann::json assemble_report() const {
    nlohmann::json report;
    report["country"] = cfg_.country;
    report["provenance"] = {{"config_hash", config_hash_},
                            {"tool_version", kVersion},
                            {"note", "timestamps live in run_meta.json"}};
    auto maybe_load = [&](const fs::path& p) -> std::optional<nlohmann::json> {
      if (!fs::exists(p)) return std::nullopt;
      return nlohmann::json::parse(detail::read_file(p));
    };
    if (auto stats = maybe_load(out_ / "stats" / "stats.json"))
      report["corpus_stats"] = *stats;
    if (auto partition = maybe_load(out_ / "cluster" / "partition.json")) {
      report["cluster"] = *partition;
      // Table-6-shaped community summary.
      std::size_t covered = 0;
      if (partition->contains("assignment"))
        covered = partition->at("assignment").size();
      std::size_t gt50 = 0, s11_50 = 0, s6_10 = 0, s2_5 = 0, singleton = 0;
      for (const auto& c : partition->at("communities")) {
        std::size_t size = c.at("size").get<std::size_t>();
        if (size > 50) ++gt50;
        else if (size >= 11) ++s11_50;
        else if (size >= 6) ++s6_10;
        else if (size >= 2) ++s2_5;
        else ++singleton;
      }
      report["community_table"] = {
          {"threshold", partition->at("threshold")},
          {"policies_covered", covered},
          {"n_communities", gt50 + s11_50 + s6_10 + s2_5},
          {"size_gt_50", gt50},
          {"size_11_50", s11_50},
          {"size_6_10", s6_10},
          {"size_2_5", s2_5},
          {"singletons", singleton}};
    }
    if (fs::exists(out_ / "cluster" / "sweep.csv"))
      report["sweep_csv"] = "cluster/sweep.csv";
    if (auto eval = maybe_load(out_ / "classify" / "eval.json"))
      report["classifier_eval"] = *eval;
    nlohmann::json templates = nlohmann::json::object();
    for (const auto& cat : cfg_.params.categories) {
      if (auto tpl = maybe_load(out_ / "template" / ("template_" + cat + ".json")))
        templates[cat] = *tpl;
      if (auto metrics = maybe_load(out_ / "template" / ("metrics_" + cat + ".json")))
        templates[cat]["metrics"] = *metrics;
    }
    if (!templates.empty()) report["templates"] = templates;

    if (fs::exists(out_ / "audit" / "flags.jsonl")) {
      // Counts recomputed from the flag file itself so the report can never
      // drift from the artifact.
      std::map<std::string, std::size_t> per_kind;
      std::map<std::string, std::map<std::string, std::size_t>> per_community;
      std::map<std::string, std::string> community_of;
      if (auto partition = maybe_load(out_ / "cluster" / "partition.json")) {
        for (auto it = partition->at("assignment").begin();
             it != partition->at("assignment").end(); ++it)
          community_of[it.key()] = std::to_string(it.value().get<std::size_t>());
      }
      std::ifstream in(out_ / "audit" / "flags.jsonl");
      std::string line;
      std::size_t total = 0;
      while (std::getline(in, line)) {
        if (trim_view(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        auto kind = j.at("flag_kind").get<std::string>();
        ++per_kind[kind];
        ++total;
        auto seg_id = j.at("segment_id").get<std::string>();
        auto policy = seg_id.substr(0, seg_id.find('#'));
        auto community = community_of.count(policy) ? community_of[policy]
                                                    : std::string("uncovered");
        ++per_community[community][kind];
      }
      nlohmann::json flags;
      flags["total"] = total;
      flags["per_kind"] = per_kind;
      flags["per_community"] = per_community;
      flags["screening_note"] =
          "deterministic lexicon screening; candidates for human review";
      report["flag_summary"] = flags;
    }
    if (auto alignment = maybe_load(out_ / "audit" / "alignment.json")) {
      nlohmann::json summary = *alignment;
      summary.erase("per_practice");
      report["law_alignment"] = summary;
    }
    return report;
  }

  PipelineConfig cfg_;
  fs::path out_;
  std::string config_hash_;
  std::vector<std::string> stages_run_;
  std::vector<std::string> stages_skipped_;

public:
  // One CSV per metric plus a combined file, rows sorted by threshold.
  static void emit_plot_data(const std::vector<SweepRow>& rows,
                             const std::string& dir) {
    if (rows.empty()) throw InputError("emit_plot_data: no sweep rows");
    std::vector<SweepRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const SweepRow& a, const SweepRow& b) {
                return a.threshold < b.threshold;
              });
    fs::create_directories(dir);
    char buf[64];
    auto fmt = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    auto write_metric = [&](const std::string& name, auto getter) {
      std::ostringstream csv;
      csv << "threshold,value\n";
      for (const auto& row : sorted)
        csv << fmt(row.threshold) << ',' << fmt(getter(row)) << '\n';
      detail::write_file(fs::path(dir) / (name + ".csv"), csv.str());
    };
    write_metric("modularity", [](const SweepRow& r) { return r.modularity; });
    write_metric("cut_ratio", [](const SweepRow& r) { return r.mean_cut_ratio; });
    write_metric("conductance",
                 [](const SweepRow& r) { return r.mean_conductance; });
    write_metric("coverage", [](const SweepRow& r) { return r.coverage; });
    std::ostringstream combined;
    combined << "threshold,modularity,cut_ratio,conductance,coverage\n";
    for (const auto& row : sorted) {
      combined << fmt(row.threshold) << ',' << fmt(row.modularity) << ','
               << fmt(row.mean_cut_ratio) << ',' << fmt(row.mean_conductance)
               << ',' << fmt(row.coverage) << '\n';
    }
    detail::write_file(fs::path(dir) / "combined.csv", combined.str());
  }
};

inline std::string Pipeline::render_report_markdown(const nlohmann::json& report) {
  std::ostringstream md;
  md << "# Privacy policy audit report\n\n";
  md << "Country: " << report.value("country", "?") << "\n\n";
  if (report.contains("corpus_stats")) {
    const auto& stats = report["corpus_stats"];
    md << "## Corpus statistics\n\n";
    md << "| Measure | Mean | Median |\n|---|---|---|\n";
    for (const char* key : {"words", "sentences", "flesch"}) {
      md << "| " << key << " | " << stats[key]["mean"].dump() << " | "
         << stats[key]["median"].dump() << " |\n";
    }
    md << "\nCorpus size: " << stats["corpus_size"].dump() << "\n\n";
    if (stats.contains("keywords")) {
      md << "## Keyword presence\n\n";
      md << "| Group | Keyword | Policies | Percentage |\n|---|---|---|---|\n";
      for (const auto& row : stats["keywords"]) {
        md << "| " << row["group"].get<std::string>() << " | "
           << row["keyword"].get<std::string>() << " | "
           << row["doc_count"].dump() << " | " << row["percentage"].dump()
           << " |\n";
      }
      md << "\n";
    }
  }
  if (report.contains("community_table")) {
    const auto& t = report["community_table"];
    md << "## Communities\n\n";
    md << "| Threshold | Covered | Communities | >50 | 11-50 | 6-10 | 2-5 |\n"
       << "|---|---|---|---|---|---|---|\n";
    md << "| " << t["threshold"].dump() << " | " << t["policies_covered"].dump()
       << " | " << t["n_communities"].dump() << " | " << t["size_gt_50"].dump()
       << " | " << t["size_11_50"].dump() << " | " << t["size_6_10"].dump()
       << " | " << t["size_2_5"].dump() << " |\n\n";
  }
  if (report.contains("classifier_eval")) {
    const auto& e = report["classifier_eval"];
    md << "## Classifier evaluation\n\n";
    md << "| Class | Precision | Recall | F1 |\n|---|---|---|---|\n";
    for (const char* cls : {"FPCU", "TPD", "OTHER"}) {
      const auto& row = e["per_class"][cls];
      md << "| " << cls << " | " << row["precision"].dump() << " | "
         << row["recall"].dump() << " | " << row["f1"].dump() << " |\n";
    }
    md << "| macro | " << e["macro"]["precision"].dump() << " | "
       << e["macro"]["recall"].dump() << " | " << e["macro"]["f1"].dump()
       << " |\n\n";
    md << "Accuracy: " << e["accuracy"].dump() << "\n\n";
  }
  if (report.contains("templates")) {
    md << "## Templates\n\n";
    for (auto it = report["templates"].begin(); it != report["templates"].end();
         ++it) {
      md << "### " << it.key() << "\n\n";
      for (const auto& entry : it.value()["entries"]) {
        md << "- (" << entry["importance"].dump() << ") "
           << entry["text"].get<std::string>() << "\n";
      }
      md << "\n";
    }
  }
  md << "## Practice flags\n\n";
  if (report.contains("flag_summary") &&
      report["flag_summary"]["total"].get<std::size_t>() > 0) {
    md << "| Flag kind | Count |\n|---|---|\n";
    const auto& per_kind = report["flag_summary"]["per_kind"];
    for (auto it = per_kind.begin(); it != per_kind.end(); ++it)
      md << "| " << it.key() << " | " << it.value().dump() << " |\n";
    md << "\n" << report["flag_summary"]["screening_note"].get<std::string>()
       << "\n\n";
  } else {
    md << "No flags.\n\n";
  }
  if (report.contains("law_alignment") && report["law_alignment"].contains("min")) {
    const auto& a = report["law_alignment"];
    md << "## Law alignment (WMD)\n\n";
    md << "| Min | Median | Max |\n|---|---|---|\n";
    md << "| " << a["min"].dump() << " | " << a["median"].dump() << " | "
       << a["max"].dump() << " |\n\n";
  }
  md << "## Provenance\n\n";
  md << "- config hash: `" << report["provenance"]["config_hash"].get<std::string>()
     << "`\n";
  md << "- tool version: " << report["provenance"]["tool_version"].get<std::string>()
     << "\n";
  return md.str();
}

inline nlohmann::json run_pipeline(const PipelineConfig& cfg) {
  Pipeline pipeline(cfg);
  return pipeline.run();
}

}  // namespace polaudit
