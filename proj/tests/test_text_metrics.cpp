#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "polaudit/text_metrics.hpp"

using namespace polaudit;

TEST_CASE("tokenize splits sentences on terminal punctuation") {
  auto doc = tokenize("We collect data. We share it.");
  CHECK(doc.sentences.size() == 2);
  CHECK(doc.sentences[0] == "We collect data.");
  CHECK(doc.sentences[1] == "We share it.");
  CHECK(doc.words == std::vector<std::string>{"we", "collect", "data", "we",
                                              "share", "it"});
}

TEST_CASE("tokenize honors the abbreviation list") {
  auto doc = tokenize("Dr. Smith visited.");
  CHECK(doc.sentences.size() == 1);
  auto doc2 = tokenize("It broke. Dr. Smith fixed it. We left.");
  CHECK(doc2.sentences.size() == 3);
}

TEST_CASE("tokenize rejects empty text") {
  CHECK_THROWS_AS(tokenize(""), InputError);
}

TEST_CASE("tokenize question and digit boundaries") {
  auto doc = tokenize("Is it safe? 42 users said yes! Good.");
  CHECK(doc.sentences.size() == 3);
}

TEST_CASE("word tokens are alphabetic/apostrophe runs") {
  auto doc = tokenize("Users' data isn't SOLD (ever).");
  CHECK(doc.words == std::vector<std::string>{"users", "data", "isn't", "sold",
                                              "ever"});
}

TEST_CASE("count_syllables basics") {
  CHECK(count_syllables("cat") == 1);
  CHECK(count_syllables("policy") == 3);
  CHECK(count_syllables("the") == 1);
  CHECK_THROWS_AS(count_syllables("covid-19"), InputError);
  CHECK_THROWS_AS(count_syllables(""), InputError);
}

TEST_CASE("count_syllables matches dictionary counts on the 50-word fixture") {
  // Reference counts from standard dictionary syllabification.
  const std::vector<std::pair<const char*, int>> fixture = {
      {"cat", 1},      {"dog", 1},       {"the", 1},       {"share", 1},
      {"store", 1},    {"law", 1},       {"rights", 1},    {"health", 1},
      {"trust", 1},    {"claims", 1},    {"time", 1},      {"state", 1},
      {"plan", 1},     {"track", 1},     {"know", 1},      {"means", 1},
      {"scope", 1},    {"breach", 1},    {"data", 2},      {"doctor", 2},
      {"consent", 2},  {"record", 2},    {"cookie", 2},    {"disclose", 2},
      {"patient", 2},  {"access", 2},    {"email", 2},     {"portal", 2},
      {"public", 2},   {"senders", 2},   {"contact", 2},   {"purpose", 2},
      {"practice", 2}, {"notice", 2},    {"treatment", 2}, {"review", 2},
      {"party", 2},    {"collect", 2},   {"policy", 3},    {"privacy", 3},
      {"medical", 3},  {"hospital", 3},  {"agency", 3},    {"consumer", 3},
      {"decision", 3}, {"provider", 3},  {"retention", 3}, {"information", 4},
      {"security", 4}, {"necessary", 4}};
  REQUIRE(fixture.size() == 50);
  for (const auto& [word, expected] : fixture) {
    INFO("word: " << word);
    CHECK(count_syllables(word) == expected);
  }
}

TEST_CASE("flesch reading ease on the three-word fixture") {
  auto doc = tokenize("The cat sat.");
  REQUIRE(doc.sentences.size() == 1);
  REQUIRE(doc.words.size() == 3);
  CHECK(flesch_reading_ease(doc) == doctest::Approx(119.19).epsilon(1e-12));
  CHECK(std::abs(flesch_reading_ease(doc) - 119.19) < 1e-9);
}

TEST_CASE("flesch is monotone in the syllable ratio") {
  TokenizedDoc doc;
  doc.sentences = {"a"};
  doc.words = {"w", "w", "w", "w"};
  doc.syllable_counts = {1, 1, 1, 1};
  double easy = flesch_reading_ease(doc);
  doc.syllable_counts = {2, 2, 2, 2};
  double hard = flesch_reading_ease(doc);
  CHECK(hard < easy);
  // Doubling the sentence count at fixed words/syllables raises the score.
  TokenizedDoc two = doc;
  two.sentences = {"a", "b"};
  CHECK(flesch_reading_ease(two) > flesch_reading_ease(doc));
}

TEST_CASE("flesch requires at least one sentence and word") {
  TokenizedDoc doc;
  CHECK_THROWS_AS(flesch_reading_ease(doc), InputError);
}

TEST_CASE("keyword report counts token sequences, not substrings") {
  std::vector<std::vector<std::string>> corpus = {
      tokenize("We keep server logs and cookie data.").words,
      tokenize("Please login to view this cookie policy.").words,
      tokenize("No tracking here.").words};
  auto report = keyword_report(corpus, {{"online", {"cookie", "logs", "log"}}});
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].keyword == "cookie");
  CHECK(report.rows[0].doc_count == 2);
  CHECK(report.rows[0].percentage == doctest::Approx(2.0 / 3.0));
  CHECK(report.rows[1].doc_count == 1);   // "logs"
  CHECK(report.rows[2].doc_count == 0);   // "log" must not match "login"/"logs"
  CHECK(report.rows[2].percentage == 0.0);
}

TEST_CASE("keyword report multiword sequences and partition sums") {
  std::vector<std::vector<std::string>> corpus;
  // 6 docs, each containing exactly one of three disjoint markers.
  const char* texts[] = {
      "alpha marker one", "alpha marker two", "beta marker here",
      "beta marker again", "gamma marker x",  "gamma marker y"};
  for (const char* t : texts) corpus.push_back(tokenize(t).words);
  auto report = keyword_report(
      corpus, {{"set", {"alpha marker", "beta marker", "gamma marker"}}});
  std::size_t total = 0;
  for (const auto& row : report.rows) total += row.doc_count;
  CHECK(total == corpus.size());
  CHECK_THROWS_AS(keyword_report(corpus, {}), InputError);
  CHECK_THROWS_AS(keyword_report(corpus, {{"bad", {}}}), InputError);
}

TEST_CASE("mann-whitney exact p on the [1,2] vs [3,4] fixture") {
  auto res = mann_whitney_u({1, 2}, {3, 4});
  CHECK(res.exact);
  CHECK(res.u == 0.0);
  CHECK(res.p_value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mann-whitney identical samples give U = nm/2") {
  auto res = mann_whitney_u({1, 2, 3}, {1, 2, 3});
  CHECK(res.u == doctest::Approx(4.5));
  CHECK_THROWS_AS(mann_whitney_u({}, {1.0}), InputError);
}

TEST_CASE("mann-whitney exact and normal paths agree within the sanity band") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& v : a) v = static_cast<double>(rng() % 1000) / 10.0;
    for (auto& v : b) v = static_cast<double>(rng() % 1000) / 10.0 +
                          static_cast<double>(trial % 5);
    auto exact = mann_whitney_u(a, b, 12);
    auto approx = mann_whitney_u(a, b, 0);
    REQUIRE(exact.exact);
    REQUIRE(!approx.exact);
    CHECK(std::abs(exact.p_value - approx.p_value) <= 0.05);
  }
}

TEST_CASE("cohens d fixture and identities") {
  CHECK(cohens_d({1, 2, 3}, {3, 4, 5}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cohens_d({1, 2, 3}, {1, 2, 3}) == 0.0);
  // Location shift identity: b = a + c with equal variances.
  std::vector<double> a = {2, 4, 6, 8};
  std::vector<double> b = {5, 7, 9, 11};
  double sd = std::sqrt((4 + 0 + 4 + 16 + 4 + 0 + 4 + 16) / 6.0 / 2.0 * 2.0);
  (void)sd;
  CHECK(cohens_d(a, b) == doctest::Approx(3.0 / std::sqrt(20.0 / 3.0)));
  // Antisymmetry.
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(5), y(7);
    for (auto& v : x) v = static_cast<double>(rng() % 100);
    for (auto& v : y) v = static_cast<double>(rng() % 100);
    if (cohens_d(x, y) == 0.0) continue;
    CHECK(cohens_d(x, y) == doctest::Approx(-cohens_d(y, x)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cohens_d({1}, {2, 3}), InputError);
  CHECK_THROWS_AS(cohens_d({1, 1}, {1, 1}), DegenerateInputError);
}
