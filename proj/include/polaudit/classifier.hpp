#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "polaudit/embeddings.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/segmentation.hpp"
#include "polaudit/text_metrics.hpp"

namespace polaudit {

constexpr std::array<CategoryLabel, 3> kLabelOrder = {
    CategoryLabel::FPCU, CategoryLabel::TPD, CategoryLabel::OTHER};

// Versioned description of the feature space: mean word embedding
// concatenated with TF-IDF weights over the highest-DF training terms.
// Each half is L2-normalized independently.
struct FeatureSpec {
  int version = 1;
  std::size_t embedding_dim = 0;
  std::size_t max_tfidf_terms = 2000;
  std::vector<std::string> tfidf_terms;  // ordered
  std::vector<double> idf;               // aligned with tfidf_terms

  std::size_t feature_dim() const { return embedding_dim + tfidf_terms.size(); }
};

inline FeatureSpec build_feature_spec(
    const std::vector<std::vector<std::string>>& train_words,
    const WordVectors& vectors, std::size_t max_tfidf_terms = 2000) {
  FeatureSpec spec;
  spec.embedding_dim = vectors.dim;
  spec.max_tfidf_terms = max_tfidf_terms;
  std::map<std::string, std::size_t> df;
  for (const auto& words : train_words) {
    std::set<std::string> uniq(words.begin(), words.end());
    for (const auto& w : uniq) ++df[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_tfidf_terms) ranked.resize(max_tfidf_terms);
  const double n_docs = static_cast<double>(train_words.size());
  for (const auto& [term, count] : ranked) {
    spec.tfidf_terms.push_back(term);
    spec.idf.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return spec;
}

// Zero vector when nothing featurizes (all tokens OOV and no TF-IDF hits).
inline std::vector<double> featurize(const std::vector<std::string>& words,
                                     const WordVectors& vectors,
                                     const FeatureSpec& spec) {
  std::vector<double> feat(spec.feature_dim(), 0.0);
  std::size_t in_vocab = 0;
  for (const auto& w : words) {
    auto idx = vectors.index_of(w);
    if (!idx) continue;
    const double* row = vectors.row(*idx);
    for (std::size_t k = 0; k < vectors.dim; ++k) feat[k] += row[k];
    ++in_vocab;
  }
  if (in_vocab > 0) {
    for (std::size_t k = 0; k < vectors.dim; ++k)
      feat[k] /= static_cast<double>(in_vocab);
    detail::l2_normalize(feat.data(), vectors.dim);
  }
  if (!spec.tfidf_terms.empty() && !words.empty()) {
    std::map<std::string, std::size_t> counts;
    for (const auto& w : words) ++counts[w];
    for (std::size_t t = 0; t < spec.tfidf_terms.size(); ++t) {
      auto it = counts.find(spec.tfidf_terms[t]);
      if (it == counts.end()) continue;
      double tf = static_cast<double>(it->second) /
                  static_cast<double>(words.size());
      feat[spec.embedding_dim + t] = tf * spec.idf[t];
    }
    detail::l2_normalize(feat.data() + spec.embedding_dim,
                         spec.tfidf_terms.size());
  }
  return feat;
}

struct ClassifierConfig {
  std::string kind = "centroid";  // "centroid" | "linear"
  std::uint32_t seed = 7;
  std::size_t max_tfidf_terms = 2000;
  // linear-only knobs: full-batch gradient descent
  std::size_t iterations = 300;
  double learning_rate = 0.5;
  double l2_regularization = 1e-4;
};

struct ClassifierModel {
  std::string kind;
  FeatureSpec spec;
  std::vector<int> present;                   // indices into kLabelOrder
  std::vector<std::vector<double>> weights;   // per present class
  std::vector<double> bias;                   // linear only, per present class
};

struct Classification {
  CategoryLabel label = CategoryLabel::OTHER;
  double confidence = 0.0;
  bool empty_features = false;  // all-OOV segment, classified OTHER
};

// Deterministic baselines behind one interface: nearest-centroid by cosine,
// and multinomial logistic regression trained by full-batch gradient descent
// with a fixed iteration budget and seeded initialization.
inline ClassifierModel train_classifier(const std::vector<LabeledSegment>& train,
                                        const WordVectors& vectors,
                                        const ClassifierConfig& cfg = {}) {
  if (cfg.kind != "centroid" && cfg.kind != "linear")
    throw TrainingError("unknown classifier kind '" + cfg.kind + "'");
  std::array<std::size_t, 3> class_counts{};
  for (const auto& item : train)
    ++class_counts[static_cast<std::size_t>(item.label)];
  std::vector<int> present;
  for (std::size_t c = 0; c < 3; ++c) {
    if (class_counts[c] == 0) continue;
    if (class_counts[c] < 5)
      throw TrainingError(std::string("class ") +
                          to_string(kLabelOrder[c]) +
                          " has fewer than 5 examples");
    present.push_back(static_cast<int>(c));
  }
  if (present.size() < 2)
    throw TrainingError("need at least 2 classes present in training data");

  std::vector<std::vector<std::string>> words;
  words.reserve(train.size());
  for (const auto& item : train) words.push_back(tokenize(item.text).words);

  ClassifierModel model;
  model.kind = cfg.kind;
  model.spec = build_feature_spec(words, vectors, cfg.max_tfidf_terms);
  model.present = present;

  std::vector<std::vector<double>> features;
  features.reserve(train.size());
  for (const auto& w : words) features.push_back(featurize(w, vectors, model.spec));
  const std::size_t dim = model.spec.feature_dim();
  const std::size_t n_classes = present.size();
  std::map<int, std::size_t> class_pos;
  for (std::size_t c = 0; c < n_classes; ++c) class_pos[present[c]] = c;

  if (cfg.kind == "centroid") {
    model.weights.assign(n_classes, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      std::size_t c = class_pos[static_cast<int>(train[i].label)];
      for (std::size_t k = 0; k < dim; ++k)
        model.weights[c][k] += features[i][k];
      ++counts[c];
    }
    for (std::size_t c = 0; c < n_classes; ++c)
      for (std::size_t k = 0; k < dim; ++k)
        model.weights[c][k] /= static_cast<double>(counts[c]);
    return model;
  }

  // linear: softmax regression
  std::mt19937 rng(cfg.seed);
  auto small_init = [&]() {
    // Deterministic tiny uniform in [-0.005, 0.005).
    return (static_cast<double>(rng()) / 4294967296.0 - 0.5) * 0.01;
  };
  model.weights.assign(n_classes, std::vector<double>(dim));
  model.bias.assign(n_classes, 0.0);
  for (auto& row : model.weights)
    for (auto& w : row) w = small_init();

  const double n_inv = 1.0 / static_cast<double>(train.size());
  std::vector<std::vector<double>> grad_w(n_classes, std::vector<double>(dim));
  std::vector<double> grad_b(n_classes);
  std::vector<double> logits(n_classes), probs(n_classes);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    for (auto& row : grad_w) std::fill(row.begin(), row.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (std::size_t c = 0; c < n_classes; ++c)
        logits[c] = detail::dot(model.weights[c], features[i]) + model.bias[c];
      double max_logit = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        probs[c] = std::exp(logits[c] - max_logit);
        z += probs[c];
      }
      std::size_t target = class_pos[static_cast<int>(train[i].label)];
      for (std::size_t c = 0; c < n_classes; ++c) {
        double err = probs[c] / z - (c == target ? 1.0 : 0.0);
        for (std::size_t k = 0; k < dim; ++k)
          grad_w[c][k] += err * features[i][k];
        grad_b[c] += err;
      }
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t k = 0; k < dim; ++k) {
        double g = grad_w[c][k] * n_inv +
                   cfg.l2_regularization * model.weights[c][k];
        model.weights[c][k] -= cfg.learning_rate * g;
      }
      model.bias[c] -= cfg.learning_rate * grad_b[c] * n_inv;
    }
  }
  return model;
}

// Argmax class; ties resolved by the fixed label order FPCU < TPD < OTHER.
inline Classification classify_segment(const ClassifierModel& model,
                                       const std::vector<std::string>& words,
                                       const WordVectors& vectors) {
  if (model.spec.embedding_dim != vectors.dim)
    throw InputError("classifier feature spec does not match vector dimension");
  auto feat = featurize(words, vectors, model.spec);
  bool all_zero = true;
  for (double v : feat)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  Classification result;
  if (all_zero) {
    result.label = CategoryLabel::OTHER;
    result.confidence = 0.0;
    result.empty_features = true;
    return result;
  }
  const std::size_t n_classes = model.present.size();
  std::vector<double> scores(n_classes);
  if (model.kind == "centroid") {
    for (std::size_t c = 0; c < n_classes; ++c)
      scores[c] = detail::cosine(feat, model.weights[c]);
  } else {
    std::vector<double> logits(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
      logits[c] = detail::dot(model.weights[c], feat) + model.bias[c];
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      scores[c] = std::exp(logits[c] - max_logit);
      z += scores[c];
    }
    for (auto& s : scores) s /= z;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < n_classes; ++c)
    if (scores[c] > scores[best]) best = c;  // earlier index wins ties
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n_classes; ++c)
    if (c != best) second = std::max(second, scores[c]);
  result.label = kLabelOrder[static_cast<std::size_t>(model.present[best])];
  if (model.kind == "centroid")
    result.confidence = std::clamp((scores[best] - second) / 2.0, 0.0, 1.0);
  else
    result.confidence = std::clamp(scores[best] - second, 0.0, 1.0);
  return result;
}

struct EvalReport {
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][pred]
  std::array<double, 3> precision{}, recall{}, f1{};
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double accuracy = 0;
  std::vector<std::string> warnings;
};

inline EvalReport eval_report_from_confusion(
    const std::array<std::array<std::size_t, 3>, 3>& confusion) {
  EvalReport report;
  report.confusion = confusion;
  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) {
      total += confusion[t][p];
      if (t == p) correct += confusion[t][p];
    }
  if (total == 0) throw InputError("evaluate_classifier: empty test set");
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t tp = confusion[c][c], pred = 0, truth = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      pred += confusion[k][c];
      truth += confusion[c][k];
    }
    report.precision[c] = pred ? static_cast<double>(tp) / pred : 0.0;
    report.recall[c] = truth ? static_cast<double>(tp) / truth : 0.0;
    double pr = report.precision[c] + report.recall[c];
    report.f1[c] = pr > 0 ? 2.0 * report.precision[c] * report.recall[c] / pr : 0.0;
    if (truth == 0)
      report.warnings.push_back(std::string("class ") + to_string(kLabelOrder[c]) +
                                " has zero support; contributes 0 to macro means");
  }
  for (std::size_t c = 0; c < 3; ++c) {
    report.macro_precision += report.precision[c] / 3.0;
    report.macro_recall += report.recall[c] / 3.0;
    report.macro_f1 += report.f1[c] / 3.0;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return report;
}

inline EvalReport evaluate_classifier(const ClassifierModel& model,
                                      const std::vector<LabeledSegment>& test,
                                      const WordVectors& vectors) {
  if (test.empty()) throw InputError("evaluate_classifier: empty test set");
  std::array<std::array<std::size_t, 3>, 3> confusion{};
  for (const auto& item : test) {
    auto words = tokenize(item.text).words;
    auto pred = classify_segment(model, words, vectors);
    confusion[static_cast<std::size_t>(item.label)]
             [static_cast<std::size_t>(pred.label)] += 1;
  }
  return eval_report_from_confusion(confusion);
}

// ---- model / report serialization -------------------------------------------

inline nlohmann::json model_to_json(const ClassifierModel& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = model.kind;
  j["feature_spec"] = {{"version", model.spec.version},
                       {"embedding_dim", model.spec.embedding_dim},
                       {"max_tfidf_terms", model.spec.max_tfidf_terms},
                       {"tfidf_terms", model.spec.tfidf_terms},
                       {"idf", model.spec.idf}};
  nlohmann::json labels = nlohmann::json::array();
  for (int c : model.present)
    labels.push_back(to_string(kLabelOrder[static_cast<std::size_t>(c)]));
  j["labels"] = labels;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  return j;
}

inline ClassifierModel model_from_json(const nlohmann::json& j) {
  ClassifierModel model;
  if (j.at("format_version").get<int>() != 1)
    throw ParseError("unsupported model format version", 0);
  model.kind = j.at("kind").get<std::string>();
  const auto& spec = j.at("feature_spec");
  model.spec.version = spec.at("version").get<int>();
  model.spec.embedding_dim = spec.at("embedding_dim").get<std::size_t>();
  model.spec.max_tfidf_terms = spec.at("max_tfidf_terms").get<std::size_t>();
  model.spec.tfidf_terms = spec.at("tfidf_terms").get<std::vector<std::string>>();
  model.spec.idf = spec.at("idf").get<std::vector<double>>();
  for (const auto& label : j.at("labels")) {
    auto cat = category_from_string(label.get<std::string>());
    for (std::size_t c = 0; c < 3; ++c)
      if (kLabelOrder[c] == cat) model.present.push_back(static_cast<int>(c));
  }
  model.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  model.bias = j.at("bias").get<std::vector<double>>();
  return model;
}

inline nlohmann::json eval_report_to_json(const EvalReport& report) {
  nlohmann::json j;
  nlohmann::json per_class;
  for (std::size_t c = 0; c < 3; ++c) {
    per_class[to_string(kLabelOrder[c])] = {{"precision", report.precision[c]},
                                            {"recall", report.recall[c]},
                                            {"f1", report.f1[c]}};
  }
  j["per_class"] = per_class;
  j["macro"] = {{"precision", report.macro_precision},
                {"recall", report.macro_recall},
                {"f1", report.macro_f1}};
  j["accuracy"] = report.accuracy;
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : report.confusion)
    confusion.push_back(std::vector<std::size_t>(row.begin(), row.end()));
  j["confusion"] = confusion;
  j["warnings"] = report.warnings;
  return j;
}

}  // namespace polaudit
