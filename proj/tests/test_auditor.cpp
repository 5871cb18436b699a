#include <doctest.h>

#include <fstream>
#include <set>

#include "polaudit/auditor.hpp"
#include "support/tmpdir.hpp"

using namespace polaudit;

namespace {

// Incomplete-practice fixtures drawn from real healthcare policies (USA, UK,
// India), plus a fully specified example.
const char* kUsaCollect =
    "We and our Affiliates and Service Providers may collect personal "
    "information about you on the Website and from other sources, including "
    "commercially available sources.";
const char* kUsaDisclose =
    "If you are present and able to agree or object then we may only disclose "
    "your PHI if you don't object after you have been informed of your "
    "opportunity to do so (although such agreement may be reasonably inferred "
    "from the circumstances).";
const char* kUkCovid =
    "Any information used or shared during the Covid-19 outbreak will be "
    "limited to the period of the outbreak unless there is another legal basis "
    "to use the data.";
const char* kIndiaCollect =
    "We may collect any and all personal information you provide to us, like "
    "your name, mobile phone number, email address, feedback, and any other "
    "information you provide us.";
const char* kIndiaTransfer =
    "You acknowledge that some countries where we may transfer Your Personal "
    "Information may not have data protection laws. SIMS will place "
    "contractual obligations on the transferee which will oblige the "
    "transferee to adhere to the provisions of this Privacy Policy.";
const char* kComplete =
    "We may disclose your medical records to insurers to process claims.";

std::set<FlagKind> kinds_of(const std::vector<PracticeFlag>& flags) {
  std::set<FlagKind> kinds;
  for (const auto& f : flags) kinds.insert(f.kind);
  return kinds;
}

}  // namespace

TEST_CASE("span tokenizer keeps character offsets") {
  auto tokens = span_tokens("We, the 'users', share Covid-19 data.");
  REQUIRE(tokens.size() == 7);
  CHECK(tokens[0].text == "we");
  CHECK(tokens[2].text == "users");
  CHECK(tokens[4].text == "covid");
  CHECK(tokens[5].text == "19");
  for (const auto& t : tokens) CHECK(t.begin < t.end);
}

TEST_CASE("pattern language: literals, alternation, wildcards, gaps") {
  auto tokens = span_tokens("we may collect personal information about you");
  CHECK(find_pattern(compile_pattern("we"), tokens));
  CHECK(find_pattern(compile_pattern("may|might"), tokens));
  CHECK(!find_pattern(compile_pattern("never"), tokens));
  CHECK(find_pattern(compile_pattern("we * collect"), tokens));
  CHECK(!find_pattern(compile_pattern("we collect"), tokens));
  CHECK(find_pattern(compile_pattern("we ** information"), tokens));
  CHECK(find_pattern(compile_pattern("collect *? information"), tokens));
  CHECK(!find_pattern(compile_pattern("about *? collect"), tokens));
  CHECK_THROWS_AS(compile_pattern(""), InputError);
  CHECK_THROWS_AS(compile_pattern("a||b"), InputError);
}

TEST_CASE("pattern gap limits: *? spans at most 2 tokens, ** at most 8") {
  auto tokens = span_tokens("a x1 x2 x3 b");
  CHECK(!find_pattern(compile_pattern("a *? b"), tokens));
  CHECK(find_pattern(compile_pattern("a ** b"), tokens));
  auto far = span_tokens("a 1 2 3 4 5 6 7 8 9 b");
  CHECK(!find_pattern(compile_pattern("a ** b"), far));
}

TEST_CASE("evidence spans re-match their pattern when sliced") {
  std::string text = "We may share some information with trusted partners.";
  auto lex = default_vagueness_lexicon();
  auto flags = flag_vagueness("seg", text, lex);
  REQUIRE(!flags.empty());
  for (const auto& flag : flags) {
    for (const auto& ev : flag.evidence) {
      REQUIRE(ev.end <= text.size());
      std::string slice = text.substr(ev.begin, ev.end - ev.begin);
      CHECK(pattern_matches_exactly(ev.pattern, slice));
    }
  }
}

TEST_CASE("detect_ci_params on the complete worked example") {
  auto presence = detect_ci_params(kComplete, default_ci_lexicons());
  CHECK(presence.at("sender").present);
  CHECK(presence.at("attribute").present);
  CHECK(presence.at("recipient").present);
  CHECK(presence.at("transmission_principle").present);
  CHECK(presence.at("subject").present);
  for (const auto& [param, p] : presence) {
    if (!p.present) continue;
    CHECK(!p.evidence.empty());
  }
  auto flags = flag_incompleteness("seg", kComplete, default_ci_lexicons());
  CHECK(flags.empty());
}

TEST_CASE("incompleteness fixtures produce the expected judgments") {
  auto lex = default_ci_lexicons();
  SUBCASE("USA collection practice: missing transmission principle") {
    auto flags = flag_incompleteness("usa1", kUsaCollect, lex);
    CHECK(kinds_of(flags) ==
          std::set<FlagKind>{FlagKind::missing_transmission_principle});
  }
  SUBCASE("USA disclosure practice: missing recipient") {
    auto flags = flag_incompleteness("usa2", kUsaDisclose, lex);
    CHECK(kinds_of(flags) == std::set<FlagKind>{FlagKind::missing_recipient});
  }
  SUBCASE("UK covid practice: missing recipient") {
    auto flags = flag_incompleteness("uk1", kUkCovid, lex);
    CHECK(kinds_of(flags) == std::set<FlagKind>{FlagKind::missing_recipient});
  }
  SUBCASE("India collection practice: missing transmission principle") {
    auto flags = flag_incompleteness("in1", kIndiaCollect, lex);
    CHECK(kinds_of(flags) ==
          std::set<FlagKind>{FlagKind::missing_transmission_principle});
  }
  SUBCASE("India transfer practice: missing recipient") {
    auto flags = flag_incompleteness("in2", kIndiaTransfer, lex);
    CHECK(kinds_of(flags) == std::set<FlagKind>{FlagKind::missing_recipient});
  }
}

TEST_CASE("missing_* flags never carry evidence; vague_* always do") {
  auto lex = default_ci_lexicons();
  auto vague = default_vagueness_lexicon();
  for (const char* text : {kUsaCollect, kUsaDisclose, kUkCovid, kIndiaCollect,
                           kIndiaTransfer}) {
    for (const auto& flag : flag_incompleteness("s", text, lex))
      CHECK(flag.evidence.empty());
    for (const auto& flag : flag_vagueness("s", text, vague))
      CHECK(!flag.evidence.empty());
  }
}

TEST_CASE("vagueness fixtures") {
  auto lex = default_vagueness_lexicon();
  SUBCASE("modality and numeric cues fire together") {
    auto flags = flag_vagueness("s", "We may share some information", lex);
    CHECK(kinds_of(flags) ==
          std::set<FlagKind>{FlagKind::vague_M, FlagKind::vague_N});
  }
  SUBCASE("generalization fixture") {
    auto flags = flag_vagueness(
        "s",
        "Generally these contractors do not have any independent right to "
        "share this information",
        lex);
    CHECK(kinds_of(flags) == std::set<FlagKind>{FlagKind::vague_G});
  }
  SUBCASE("no cue terms, no flags") {
    CHECK(flag_vagueness("s", "We delete records after one year.", lex).empty());
  }
  SUBCASE("conditionality cues") {
    auto flags = flag_vagueness(
        "s", "We retain data as necessary for our operations", lex);
    CHECK(kinds_of(flags) == std::set<FlagKind>{FlagKind::vague_C});
  }
}

TEST_CASE("flag kinds are restricted to the eight defined kinds") {
  auto lex = default_ci_lexicons();
  auto vague = default_vagueness_lexicon();
  const std::set<FlagKind> missing = {
      FlagKind::missing_sender, FlagKind::missing_recipient,
      FlagKind::missing_attribute, FlagKind::missing_transmission_principle};
  const std::set<FlagKind> vague_kinds = {FlagKind::vague_C, FlagKind::vague_G,
                                          FlagKind::vague_M, FlagKind::vague_N};
  for (const char* text : {kUsaCollect, kUkCovid, "short text", "cookies only"}) {
    for (const auto& f : flag_incompleteness("s", text, lex))
      CHECK(missing.count(f.kind) == 1);
    for (const auto& f : flag_vagueness("s", text, vague))
      CHECK(vague_kinds.count(f.kind) == 1);
  }
}

TEST_CASE("lexicon validation rejects empty parameter lists") {
  CiLexicons bad = default_ci_lexicons();
  bad.patterns["recipient"].clear();
  CHECK_THROWS_AS(bad.validate(), InputError);
  VaguenessLexicon vbad = default_vagueness_lexicon();
  vbad.cues.erase("M");
  CHECK_THROWS_AS(vbad.validate(), InputError);
}

TEST_CASE("lexicons round-trip through JSON and match the shipped files") {
  auto ci = default_ci_lexicons();
  auto ci2 = ci_lexicons_from_json(ci_lexicons_to_json(ci));
  CHECK(ci2.version == ci.version);
  CHECK(ci2.patterns == ci.patterns);
  auto vague = default_vagueness_lexicon();
  auto vague2 = vagueness_lexicon_from_json(vagueness_lexicon_to_json(vague));
  CHECK(vague2.cues == vague.cues);

  // The shipped data files must stay in sync with the builtin defaults.
  auto shipped_ci =
      load_ci_lexicons(std::string(POLAUDIT_SOURCE_DIR) + "/data/ci_lexicon.json");
  CHECK(shipped_ci.version == ci.version);
  CHECK(shipped_ci.patterns == ci.patterns);
  auto shipped_vague = load_vagueness_lexicon(std::string(POLAUDIT_SOURCE_DIR) +
                                              "/data/vague_lexicon.json");
  CHECK(shipped_vague.version == vague.version);
  CHECK(shipped_vague.cues == vague.cues);
}

TEST_CASE("flag JSONL round-trip") {
  PracticeFlag flag;
  flag.segment_id = "p1#3";
  flag.kind = FlagKind::vague_M;
  flag.evidence.push_back({3, 6, "may"});
  flag.detector_version = 1;
  auto back = flag_from_json(flag_to_json(flag));
  CHECK(back.segment_id == flag.segment_id);
  CHECK(back.kind == flag.kind);
  REQUIRE(back.evidence.size() == 1);
  CHECK(back.evidence[0].begin == 3);
  CHECK(back.evidence[0].pattern == "may");
}

TEST_CASE("law alignment: identical text gives zero, aggregates are ordered") {
  testutil::TmpDir tmp;
  auto wv = load_word_vectors(
      tmp.file("v.vec",
               "6 2\nrecords 0 1\ndisclose 1 0\nconsent 0.5 0.5\n"
               "treatment 1 1\ncookies 0.2 0.9\nlaw 0.9 0.3\n")
          .string());
  std::vector<LawClause> clauses = {
      {"act.1", "disclose records consent", "XX"},
      {"act.2", "treatment law cookies", "XX"}};
  std::vector<std::pair<std::string, std::vector<std::string>>> practices = {
      {"a", {"disclose", "records", "consent"}},
      {"b", {"treatment", "treatment", "law"}},
      {"c", {"cookies", "consent"}}};
  auto report = law_alignment_wmd(practices, clauses, wv,
                                  std::set<std::string>{});
  REQUIRE(report.per_practice.size() == 3);
  CHECK(report.per_practice[0].min_wmd == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.per_practice[0].nearest_clause == "act.1");
  CHECK(report.min <= report.median);
  CHECK(report.median <= report.max);
  CHECK(report.min == doctest::Approx(0.0));

  SUBCASE("single practice, single clause: min = median = max") {
    auto single = law_alignment_wmd({practices[1]}, {clauses[0]}, wv,
                                    std::set<std::string>{});
    CHECK(single.min == single.median);
    CHECK(single.median == single.max);
  }
  SUBCASE("unfeaturizable practices are skipped and tallied") {
    auto mixed = practices;
    mixed.push_back({"oov", {"zzz"}});
    auto rep = law_alignment_wmd(mixed, clauses, wv, std::set<std::string>{});
    CHECK(rep.skipped_practices == 1);
    CHECK(rep.per_practice.size() == 3);
  }
  SUBCASE("median is the lower middle for even counts") {
    auto rep = law_alignment_wmd({practices[0], practices[1]}, clauses, wv,
                                 std::set<std::string>{});
    CHECK(rep.median == rep.min);
  }
  CHECK_THROWS_AS(law_alignment_wmd({}, clauses, wv), InputError);
}

TEST_CASE("law JSONL loader validates ids and text") {
  testutil::TmpDir tmp;
  auto good = tmp.file("law.jsonl",
                       R"({"clause_id":"r1","text":"collect with consent","jurisdiction":"IN"})"
                       "\n"
                       R"({"clause_id":"r2","text":"disclose with notice"})"
                       "\n");
  auto clauses = load_law_jsonl(good.string());
  REQUIRE(clauses.size() == 2);
  CHECK(clauses[0].jurisdiction == "IN");
  CHECK(clauses[1].jurisdiction.empty());
  auto dup = tmp.file("dup.jsonl",
                      R"({"clause_id":"r1","text":"a"})" "\n"
                      R"({"clause_id":"r1","text":"b"})" "\n");
  CHECK_THROWS_AS(load_law_jsonl(dup.string()), ParseError);
}
