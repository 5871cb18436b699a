// polaudit: batch auditing of healthcare privacy-policy corpora.
//
// Subcommands mirror the pipeline stages; `run` executes the whole workflow
// from one JSON config. Exit codes: 0 success, 2 validation/input error,
// 3 stage failure.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polaudit/auditor.hpp"
#include "polaudit/canonical_json.hpp"
#include "polaudit/classifier.hpp"
#include "polaudit/clustering.hpp"
#include "polaudit/embeddings.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/fetch.hpp"
#include "polaudit/ingest.hpp"
#include "polaudit/pipeline.hpp"
#include "polaudit/segmentation.hpp"
#include "polaudit/templates.hpp"
#include "polaudit/text_metrics.hpp"
#include "polaudit/transport.hpp"
#include "polaudit/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    return;
  }
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw polaudit::InputError("cannot write " + path);
  out << content;
}

std::vector<double> parse_grid(const std::string& spec) {
  auto parts = polaudit::split(spec, ':');
  if (parts.size() != 3)
    throw polaudit::InputError("grid must be begin:end:step, got '" + spec + "'");
  double begin = std::stod(parts[0]);
  double end = std::stod(parts[1]);
  double step = std::stod(parts[2]);
  if (!(step > 0) || begin > end)
    throw polaudit::InputError("grid must satisfy begin <= end, step > 0");
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    double t = begin + static_cast<double>(i) * step;
    if (t > end + 1e-12) break;
    grid.push_back(t);
  }
  return grid;
}

int cmd_ingest(const std::string& orgs_path, const std::string& out_path,
               const std::string& country, int depth, double rate,
               bool domain_filter_flag, bool no_domain_filter_flag) {
  polaudit::PipelineConfig cfg;
  cfg.country = country;
  cfg.paths.orgs = orgs_path;
  cfg.paths.out_dir = fs::temp_directory_path() /
                      ("polaudit-ingest-" + std::to_string(::getpid()));
  cfg.stages = {};
  cfg.stages.ingest = true;
  cfg.stages.stats = cfg.stages.distances = cfg.stages.cluster = false;
  cfg.stages.segment = cfg.stages.classify = cfg.stages.build_template = false;
  cfg.stages.audit = false;
  cfg.params.depth = depth;
  cfg.params.rate = rate;
  if (domain_filter_flag) cfg.params.domain_filter = true;
  if (no_domain_filter_flag) cfg.params.domain_filter = false;
  polaudit::Pipeline pipeline(cfg);
  pipeline.run();
  fs::path produced = fs::path(cfg.paths.out_dir) / "ingest" / "corpus.jsonl";
  fs::path target(out_path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  // Append-only target: policies whose hash is already present are no-ops.
  {
    polaudit::CorpusWriter writer(target.string());
    for (const auto& doc : polaudit::load_corpus_jsonl(produced.string()))
      writer.append(doc);
  }
  fs::path tallies = fs::path(cfg.paths.out_dir) / "ingest" / "tallies.json";
  std::ifstream t(tallies);
  std::cout << t.rdbuf();
  fs::remove_all(cfg.paths.out_dir);
  return 0;
}

int cmd_stats(const std::string& corpus_path, const std::string& keywords_path,
              const std::string& out_path) {
  auto corpus = polaudit::load_corpus_jsonl(corpus_path);
  std::vector<double> words, sentences, flesch;
  std::vector<std::vector<std::string>> corpus_words;
  for (const auto& doc : corpus) {
    auto tok = polaudit::tokenize(doc.text);
    words.push_back(static_cast<double>(tok.words.size()));
    sentences.push_back(static_cast<double>(tok.sentences.size()));
    if (!tok.sentences.empty() && !tok.words.empty())
      flesch.push_back(polaudit::flesch_reading_ease(tok));
    corpus_words.push_back(std::move(tok.words));
  }
  auto sets = keywords_path.empty() ? polaudit::default_keyword_sets()
                                    : polaudit::load_keyword_sets(keywords_path);
  auto report = polaudit::keyword_report(corpus_words, sets);
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  };
  json j;
  j["corpus_size"] = corpus.size();
  j["words"] = {{"mean", mean(words)}, {"median", median(words)}};
  j["sentences"] = {{"mean", mean(sentences)}, {"median", median(sentences)}};
  j["flesch"] = {{"mean", mean(flesch)}, {"median", median(flesch)}};
  json rows = json::array();
  for (const auto& row : report.rows)
    rows.push_back({{"group", row.group},
                    {"keyword", row.keyword},
                    {"doc_count", row.doc_count},
                    {"percentage", row.percentage}});
  j["keywords"] = rows;
  write_text(out_path, polaudit::canonical_json(j));
  return 0;
}

int cmd_distances(const std::string& corpus_path, const std::string& vectors_path,
                  const std::string& out_path, const std::string& sim_out,
                  std::optional<double> prefilter) {
  auto corpus = polaudit::load_corpus_jsonl(corpus_path);
  auto vectors = polaudit::load_word_vectors(vectors_path);
  std::vector<std::string> ids;
  std::vector<polaudit::DocDistribution> dists;
  std::size_t excluded = 0;
  for (const auto& doc : corpus) {
    try {
      dists.push_back(
          polaudit::doc_to_nbow(polaudit::tokenize(doc.text).words, vectors));
      ids.push_back(doc.policy_id);
    } catch (const polaudit::EmptyDistributionError&) {
      ++excluded;
    }
  }
  polaudit::TransportConfig cfg;
  cfg.prefilter_cutoff = prefilter;
  auto dm = polaudit::pairwise_distances(ids, dists, vectors, cfg);
  std::ostringstream dist_csv;
  polaudit::save_distance_matrix(dm, dist_csv);
  write_text(out_path, dist_csv.str());
  if (!sim_out.empty()) {
    auto sm = polaudit::normalize_similarities(dm);
    std::ostringstream sim_csv;
    polaudit::save_similarity_matrix(sm, sim_csv);
    write_text(sim_out, sim_csv.str());
  }
  std::cerr << "documents: " << ids.size() << ", excluded (empty nBOW): "
            << excluded << ", approximate pairs: " << dm.approximate_pairs.size()
            << "\n";
  return 0;
}

int cmd_cluster(const std::string& sim_path, const std::string& grid_spec,
                std::uint32_t seed, double coverage_floor,
                std::optional<double> fixed_threshold,
                const std::string& out_dir) {
  std::ifstream sim_in(sim_path);
  if (!sim_in) throw polaudit::InputError("cannot open " + sim_path);
  auto sm = polaudit::load_similarity_matrix(sim_in);
  auto grid = parse_grid(grid_spec);
  polaudit::SweepOptions opt;
  opt.coverage_floor = coverage_floor;
  auto sweep = polaudit::threshold_sweep(sm, grid, seed, opt);

  fs::create_directories(out_dir);
  std::ostringstream sweep_csv;
  sweep_csv << "threshold,modularity,mean_cut_ratio,mean_conductance,coverage,"
               "n_communities\n";
  char buf[64];
  for (const auto& row : sweep.rows) {
    auto fmt = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    sweep_csv << fmt(row.threshold) << ',' << fmt(row.modularity) << ','
              << fmt(row.mean_cut_ratio) << ',' << fmt(row.mean_conductance)
              << ',' << fmt(row.coverage) << ',' << row.n_communities_ge2 << '\n';
  }
  write_text((fs::path(out_dir) / "sweep.csv").string(), sweep_csv.str());
  polaudit::Pipeline::emit_plot_data(sweep.rows, (fs::path(out_dir) / "plots").string());

  std::optional<double> chosen = fixed_threshold ? fixed_threshold : sweep.recommended;
  if (!chosen) {
    std::cerr << "no threshold meets the coverage floor; sweep table written\n";
    return 0;
  }
  auto graph = polaudit::build_graph(sm, *chosen);
  if (graph.edges.empty())
    throw polaudit::InputError("graph is empty at threshold " +
                               std::to_string(*chosen));
  auto part = polaudit::louvain(graph, seed);
  json j;
  j["threshold"] = *chosen;
  j["modularity"] = part.modularity;
  json assignment;
  for (std::size_t c = 0; c < part.communities.size(); ++c)
    for (std::size_t v : part.communities[c]) assignment[graph.nodes[v]] = c;
  j["assignment"] = assignment;
  json isolated = json::array();
  for (std::size_t v : part.isolated) isolated.push_back(graph.nodes[v]);
  j["isolated"] = isolated;
  write_text((fs::path(out_dir) / "partition.json").string(),
             polaudit::canonical_json(j));
  std::cerr << "threshold " << *chosen << ": " << part.communities.size()
            << " communities, modularity " << part.modularity << "\n";
  return 0;
}

int cmd_segment(const std::string& corpus_path, const std::string& out_path,
                std::size_t min_chars) {
  auto corpus = polaudit::load_corpus_jsonl(corpus_path);
  polaudit::SegmenterConfig cfg;
  cfg.min_segment_chars = min_chars;
  std::ostringstream lines;
  for (const auto& doc : corpus)
    for (const auto& seg : polaudit::segment_policy(doc, cfg))
      lines << polaudit::segment_to_json(seg).dump() << '\n';
  write_text(out_path, lines.str());
  return 0;
}

int cmd_train(const std::string& annotations_path, const std::string& vectors_path,
              const std::string& kind, std::uint32_t seed,
              const std::string& out_path) {
  auto vectors = polaudit::load_word_vectors(vectors_path);
  auto annotations = polaudit::load_annotations(annotations_path);
  for (const auto& w : annotations.warnings) std::cerr << "warning: " << w << "\n";
  polaudit::ClassifierConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  auto model = polaudit::train_classifier(annotations.items, vectors, cfg);
  write_text(out_path, polaudit::canonical_json(polaudit::model_to_json(model)));
  return 0;
}

int cmd_classify(const std::string& model_path, const std::string& segments_path,
                 const std::string& vectors_path, const std::string& out_path) {
  std::ifstream model_in(model_path);
  if (!model_in) throw polaudit::InputError("cannot open model " + model_path);
  auto model = polaudit::model_from_json(json::parse(model_in));
  auto vectors = polaudit::load_word_vectors(vectors_path);
  auto segments = polaudit::load_segments_jsonl(segments_path);
  std::ostringstream lines;
  for (const auto& seg : segments) {
    auto cls = polaudit::classify_segment(
        model, polaudit::tokenize(seg.text).words, vectors);
    json j;
    j["segment_id"] = seg.segment_id;
    j["label"] = polaudit::to_string(cls.label);
    j["confidence"] = cls.confidence;
    j["empty_features"] = cls.empty_features;
    lines << j.dump() << '\n';
  }
  write_text(out_path, lines.str());
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& annotations_path,
             const std::string& vectors_path, const std::string& out_path) {
  std::ifstream model_in(model_path);
  if (!model_in) throw polaudit::InputError("cannot open model " + model_path);
  auto model = polaudit::model_from_json(json::parse(model_in));
  auto vectors = polaudit::load_word_vectors(vectors_path);
  auto annotations = polaudit::load_annotations(annotations_path);
  auto report = polaudit::evaluate_classifier(model, annotations.items, vectors);
  write_text(out_path, polaudit::canonical_json(polaudit::eval_report_to_json(report)));
  return 0;
}

int cmd_template(const std::string& segments_path, const std::string& labels_path,
                 const std::string& vectors_path, const std::string& category,
                 std::size_t k, double lambda, const std::string& method,
                 std::uint32_t seed, const std::string& out_path) {
  auto vectors = polaudit::load_word_vectors(vectors_path);
  auto segments = polaudit::load_segments_jsonl(segments_path);
  std::map<std::string, std::string> labels;
  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw polaudit::InputError("cannot open labels " + labels_path);
    std::string line;
    while (std::getline(in, line)) {
      if (polaudit::trim_view(line).empty()) continue;
      auto j = json::parse(line);
      labels[j.at("segment_id").get<std::string>()] =
          j.at("label").get<std::string>();
    }
  }
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> words;
  std::map<std::string, std::string> text_by_id;
  for (const auto& seg : segments) {
    if (!labels.empty()) {
      auto it = labels.find(seg.segment_id);
      if (it == labels.end() || it->second != category) continue;
    }
    ids.push_back(seg.segment_id);
    words.push_back(polaudit::tokenize(seg.text).words);
    text_by_id[seg.segment_id] = seg.text;
  }
  if (ids.size() < 2)
    throw polaudit::InputError("fewer than two segments in category " + category);
  auto graph = polaudit::build_segment_graph(ids, words, vectors);
  auto graph_words = [&]() {
    std::vector<std::vector<std::string>> usable;
    for (std::size_t s : graph.source_index) usable.push_back(words[s]);
    return usable;
  }();

  std::vector<std::size_t> selection;
  json entries = json::array();
  if (method == "pagerank-mmr") {
    auto tpl = polaudit::build_template(graph, k, lambda);
    auto scores = polaudit::pagerank(graph);
    selection = polaudit::mmr_select(scores, graph, k, lambda);
    for (const auto& entry : tpl.entries)
      entries.push_back({{"segment_id", entry.segment_id},
                         {"importance", entry.importance},
                         {"mmr_score", entry.mmr_score},
                         {"text", text_by_id.at(entry.segment_id)}});
  } else if (method == "random") {
    selection = polaudit::random_n_baseline(graph.size(), k, seed);
    for (std::size_t s : selection)
      entries.push_back({{"segment_id", graph.segment_ids[s]},
                         {"text", text_by_id.at(graph.segment_ids[s])}});
  } else if (method == "avgprob") {
    selection = polaudit::avg_probability_baseline(graph_words, k);
    for (std::size_t s : selection)
      entries.push_back({{"segment_id", graph.segment_ids[s]},
                         {"text", text_by_id.at(graph.segment_ids[s])}});
  } else {
    throw polaudit::InputError("method must be pagerank-mmr|random|avgprob");
  }
  auto eval = polaudit::evaluate_summary(selection, graph_words, vectors);
  json j;
  j["category"] = category;
  j["method"] = method;
  j["k"] = k;
  j["lambda"] = lambda;
  j["entries"] = entries;
  j["metrics"] = {{"js_divergence", eval.js_divergence},
                  {"cosine_similarity", eval.cosine_similarity},
                  {"wmd", eval.wmd}};
  write_text(out_path, polaudit::canonical_json(j));
  return 0;
}

int cmd_audit(const std::string& segments_path, const std::string& labels_path,
              const std::string& ci_path, const std::string& vague_path,
              const std::string& law_path, const std::string& vectors_path,
              const std::string& out_path) {
  auto segments = polaudit::load_segments_jsonl(segments_path);
  polaudit::CiLexicons ci = ci_path.empty() ? polaudit::default_ci_lexicons()
                                            : polaudit::load_ci_lexicons(ci_path);
  polaudit::VaguenessLexicon vague =
      vague_path.empty() ? polaudit::default_vagueness_lexicon()
                         : polaudit::load_vagueness_lexicon(vague_path);
  std::map<std::string, std::string> labels;
  if (!labels_path.empty()) {
    std::ifstream in(labels_path);
    if (!in) throw polaudit::InputError("cannot open labels " + labels_path);
    std::string line;
    while (std::getline(in, line)) {
      if (polaudit::trim_view(line).empty()) continue;
      auto j = json::parse(line);
      labels[j.at("segment_id").get<std::string>()] =
          j.at("label").get<std::string>();
    }
  }
  std::ostringstream lines;
  std::vector<std::pair<std::string, std::vector<std::string>>> practices;
  for (const auto& seg : segments) {
    if (!labels.empty()) {
      auto it = labels.find(seg.segment_id);
      if (it == labels.end() || (it->second != "FPCU" && it->second != "TPD"))
        continue;
    }
    practices.emplace_back(seg.segment_id, polaudit::tokenize(seg.text).words);
    for (const auto& flag :
         polaudit::flag_incompleteness(seg.segment_id, seg.text, ci))
      lines << polaudit::flag_to_json(flag).dump() << '\n';
    for (const auto& flag :
         polaudit::flag_vagueness(seg.segment_id, seg.text, vague))
      lines << polaudit::flag_to_json(flag).dump() << '\n';
  }
  write_text(out_path, lines.str());
  if (!law_path.empty()) {
    if (vectors_path.empty())
      throw polaudit::InputError("--vectors is required with --law");
    auto vectors = polaudit::load_word_vectors(vectors_path);
    auto clauses = polaudit::load_law_jsonl(law_path);
    auto report = polaudit::law_alignment_wmd(practices, clauses, vectors);
    std::cerr << "law alignment WMD (min/median/max): " << report.min << "/"
              << report.median << "/" << report.max << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polaudit: audit healthcare privacy-policy corpora"};
  app.set_version_flag("--version", polaudit::kVersion);
  app.require_subcommand(1);

  // ingest
  std::string orgs, out, country = "US";
  int depth = 0;
  double rate = 1.0;
  bool domain_filter = false, no_domain_filter = false;
  auto* ingest = app.add_subcommand("ingest", "fetch and extract a policy corpus");
  ingest->add_option("--orgs", orgs, "org list CSV")->required();
  ingest->add_option("--out", out, "output corpus JSONL")->required();
  ingest->add_option("--country", country, "ISO country code");
  ingest->add_option("--depth", depth, "extra link-discovery depth (default 0)");
  ingest->add_option("--rate", rate, "requests per second per host");
  ingest->add_flag("--domain-filter", domain_filter,
                   "require org-name/domain overlap");
  ingest->add_flag("--no-domain-filter", no_domain_filter,
                   "disable the domain overlap filter");

  // stats
  std::string corpus, keywords, stats_out = "-";
  auto* stats = app.add_subcommand("stats", "corpus statistics and keyword report");
  stats->add_option("--corpus", corpus, "corpus JSONL")->required();
  stats->add_option("--keywords", keywords, "keyword sets JSON");
  stats->add_option("--out", stats_out, "output JSON ('-' for stdout)");

  // distances
  std::string vectors, dist_out, sim_out;
  double prefilter = -1;
  auto* distances = app.add_subcommand("distances", "pairwise WMD matrix");
  distances->add_option("--corpus", corpus, "corpus JSONL")->required();
  distances->add_option("--vectors", vectors, "word vector file")->required();
  distances->add_option("--out", dist_out, "distance CSV")->required();
  distances->add_option("--sim-out", sim_out, "similarity CSV");
  distances->add_option("--prefilter", prefilter,
                        "relaxed-bound cutoff (skip exact solve above it)");

  // cluster
  std::string sim_path, grid = "0.30:0.80:0.01", cluster_out = ".";
  std::uint32_t seed = 7;
  double coverage_floor = 0.5, fixed_threshold = -1;
  auto* cluster = app.add_subcommand("cluster", "threshold sweep + Louvain");
  cluster->add_option("--similarities", sim_path, "similarity CSV")->required();
  cluster->add_option("--grid", grid, "threshold grid begin:end:step");
  cluster->add_option("--seed", seed, "louvain shuffle seed");
  cluster->add_option("--coverage-floor", coverage_floor, "recommendation floor");
  cluster->add_option("--threshold", fixed_threshold,
                      "fixed threshold (skip recommendation)");
  cluster->add_option("--out", cluster_out, "output directory");

  // segment
  std::string seg_out;
  std::size_t min_chars = 200;
  auto* segment = app.add_subcommand("segment", "split policies into segments");
  segment->add_option("--corpus", corpus, "corpus JSONL")->required();
  segment->add_option("--out", seg_out, "segments JSONL")->required();
  segment->add_option("--min-chars", min_chars, "minimum segment length");

  // train
  std::string annotations, kind = "centroid", model_out;
  auto* train = app.add_subcommand("train", "train a category classifier");
  train->add_option("--annotations", annotations, "annotation CSV")->required();
  train->add_option("--vectors", vectors, "word vector file")->required();
  train->add_option("--kind", kind, "centroid|linear");
  train->add_option("--seed", seed, "training seed");
  train->add_option("--out", model_out, "model JSON")->required();

  // classify
  std::string model_path, segments_path, labels_out;
  auto* classify = app.add_subcommand("classify", "label segments");
  classify->add_option("--model", model_path, "model JSON")->required();
  classify->add_option("--segments", segments_path, "segments JSONL")->required();
  classify->add_option("--vectors", vectors, "word vector file")->required();
  classify->add_option("--out", labels_out, "labels JSONL")->required();

  // eval
  std::string eval_out = "-";
  auto* eval = app.add_subcommand("eval", "evaluate a classifier");
  eval->add_option("--model", model_path, "model JSON")->required();
  eval->add_option("--annotations", annotations, "labeled CSV")->required();
  eval->add_option("--vectors", vectors, "word vector file")->required();
  eval->add_option("--out", eval_out, "report JSON ('-' for stdout)");

  // template
  std::string category = "TPD", method = "pagerank-mmr", labels_path, tpl_out = "-";
  std::size_t k = 10;
  double lambda = 0.5;
  auto* tpl = app.add_subcommand("template", "representative segment template");
  tpl->add_option("--segments", segments_path, "segments JSONL")->required();
  tpl->add_option("--labels", labels_path, "labels JSONL (filters by category)");
  tpl->add_option("--vectors", vectors, "word vector file")->required();
  tpl->add_option("--category", category, "FPCU|TPD|OTHER");
  tpl->add_option("--k", k, "template size");
  tpl->add_option("--lambda", lambda, "MMR relevance/diversity balance");
  tpl->add_option("--method", method, "pagerank-mmr|random|avgprob");
  tpl->add_option("--seed", seed, "seed for the random baseline");
  tpl->add_option("--out", tpl_out, "template JSON ('-' for stdout)");

  // audit
  std::string ci_path, vague_path, law_path, flags_out;
  auto* audit = app.add_subcommand("audit", "CI incompleteness and vagueness flags");
  audit->add_option("--segments", segments_path, "segments JSONL")->required();
  audit->add_option("--labels", labels_path, "labels JSONL (FPCU/TPD only)");
  audit->add_option("--ci-lexicon", ci_path, "CI lexicon JSON");
  audit->add_option("--vague-lexicon", vague_path, "vagueness lexicon JSON");
  audit->add_option("--law", law_path, "law clause JSONL (adds WMD alignment)");
  audit->add_option("--vectors", vectors, "word vector file (with --law)");
  audit->add_option("--out", flags_out, "flags JSONL")->required();

  // run
  std::string config_path;
  auto* run = app.add_subcommand("run", "execute the full pipeline from a config");
  run->add_option("--config", config_path, "pipeline config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest)
      return cmd_ingest(orgs, out, country, depth, rate, domain_filter,
                        no_domain_filter);
    if (*stats) return cmd_stats(corpus, keywords, stats_out);
    if (*distances) {
      std::optional<double> cutoff;
      if (prefilter >= 0) cutoff = prefilter;
      return cmd_distances(corpus, vectors, dist_out, sim_out, cutoff);
    }
    if (*cluster) {
      std::optional<double> fixed;
      if (fixed_threshold >= 0) fixed = fixed_threshold;
      return cmd_cluster(sim_path, grid, seed, coverage_floor, fixed, cluster_out);
    }
    if (*segment) return cmd_segment(corpus, seg_out, min_chars);
    if (*train) return cmd_train(annotations, vectors, kind, seed, model_out);
    if (*classify)
      return cmd_classify(model_path, segments_path, vectors, labels_out);
    if (*eval) return cmd_eval(model_path, annotations, vectors, eval_out);
    if (*tpl)
      return cmd_template(segments_path, labels_path, vectors, category, k,
                          lambda, method, seed, tpl_out);
    if (*audit)
      return cmd_audit(segments_path, labels_path, ci_path, vague_path, law_path,
                       vectors, flags_out);
    if (*run) {
      auto cfg = polaudit::load_config(config_path);
      auto report = polaudit::run_pipeline(cfg);
      std::cout << "report written to "
                << (fs::path(cfg.paths.out_dir) / "report.json").string() << "\n";
      return 0;
    }
  } catch (const polaudit::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const polaudit::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const polaudit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
